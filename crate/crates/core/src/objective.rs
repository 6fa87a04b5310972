//! Primal and dual objective evaluators, used for convergence monitoring
//! and for checking the solvers. All values are minimisation objectives;
//! the dual functions return `-L(alpha)`.

use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, norm_sq};
use crate::model::{raw_decision, DualVars, Hyperparams, ModelState, TaskData};

fn check_shapes(model: &ModelState, tasks: &[TaskData]) -> Result<()> {
    check_len(tasks.len(), model.duals.len())?;
    check_len(tasks.len(), model.v.len())?;
    for (t, dual) in tasks.iter().zip(&model.duals) {
        check_len(t.n(), dual.len())?;
    }
    Ok(())
}

/// Per-task sums `u_k = sum_i coef_ik x_ik` and their total.
fn coefficient_sums(model: &ModelState, tasks: &[TaskData]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = tasks.first().map(TaskData::d).unwrap_or(0);
    let mut total = vec![0.0; d];
    let mut per_task = Vec::with_capacity(tasks.len());
    for (task, dual) in tasks.iter().zip(&model.duals) {
        let mut u = vec![0.0; d];
        for i in 0..task.n() {
            axpy(dual.coefficient(i, task.label(i)), task.sample(i), &mut u);
        }
        for (t, ui) in total.iter_mut().zip(&u) {
            *t += ui;
        }
        per_task.push(u);
    }
    (total, per_task)
}

fn quadratic_part(total: &[f64], per_task: &[Vec<f64>], c2: f64) -> f64 {
    let local: f64 = per_task.iter().map(|u| norm_sq(u)).sum();
    0.5 * norm_sq(total) + local / (2.0 * c2)
}

/// `1/2 ||sum a y x||^2 + 1/(2 C2) sum_k ||sum_i a y x||^2 - sum a`.
pub fn dual_objective_classification(
    model: &ModelState,
    tasks: &[TaskData],
    params: &Hyperparams,
) -> Result<f64> {
    check_shapes(model, tasks)?;
    let mut linear = 0.0;
    for dual in &model.duals {
        match dual {
            DualVars::Classification(a) => linear += a.iter().sum::<f64>(),
            DualVars::Regression(_) => {
                return Err(Error::InvalidInput("regression duals in classification objective".into()))
            }
        }
    }
    let (total, per_task) = coefficient_sums(model, tasks);
    Ok(quadratic_part(&total, &per_task, params.c2) - linear)
}

/// Regression dual with `da = a^- - a^+`:
/// `1/2 ||sum da x||^2 + 1/(2 C2) sum_k ||sum_i da x||^2 - sum da y + eps sum (a^- + a^+)`.
pub fn dual_objective_regression(
    model: &ModelState,
    tasks: &[TaskData],
    params: &Hyperparams,
) -> Result<f64> {
    check_shapes(model, tasks)?;
    let mut label_term = 0.0;
    let mut tube_term = 0.0;
    for (task, dual) in tasks.iter().zip(&model.duals) {
        let DualVars::Regression(r) = dual else {
            return Err(Error::InvalidInput("classification duals in regression objective".into()));
        };
        for i in 0..task.n() {
            label_term += r.delta_alpha()[i] * task.label(i);
            tube_term += r.alpha_minus()[i] + r.alpha_plus()[i];
        }
    }
    let (total, per_task) = coefficient_sums(model, tasks);
    Ok(quadratic_part(&total, &per_task, params.c2) - label_term + params.epsilon * tube_term)
}

fn regulariser(model: &ModelState, c2: f64) -> f64 {
    let local: f64 = model.v.iter().map(|v| norm_sq(v)).sum();
    // c2 = inf means v is pinned to zero; avoid inf * 0.
    let local = if local == 0.0 { 0.0 } else { 0.5 * c2 * local };
    0.5 * norm_sq(&model.w) + local
}

/// Soft-margin primal with slacks `xi = max(0, 1 - y a_k(x))`.
pub fn primal_objective_classification(
    model: &ModelState,
    tasks: &[TaskData],
    params: &Hyperparams,
) -> Result<f64> {
    check_len(tasks.len(), model.v.len())?;
    let mut slack = 0.0;
    for (k, task) in tasks.iter().enumerate() {
        for i in 0..task.n() {
            let a = raw_decision(&model.w, &model.v[k], task.sample(i))?;
            slack += (1.0 - task.label(i) * a).max(0.0);
        }
    }
    Ok(regulariser(model, params.c2) + params.c1 * slack)
}

/// Epsilon-insensitive primal: slacks are `max(0, |a_k(x) - y| - eps)`.
pub fn primal_objective_regression(
    model: &ModelState,
    tasks: &[TaskData],
    params: &Hyperparams,
) -> Result<f64> {
    check_len(tasks.len(), model.v.len())?;
    let mut slack = 0.0;
    for (k, task) in tasks.iter().enumerate() {
        for i in 0..task.n() {
            let a = dot(&model.w, task.sample(i)) + dot(&model.v[k], task.sample(i));
            slack += crate::model::epsilon_insensitive(a - task.label(i), params.epsilon);
        }
    }
    Ok(regulariser(model, params.c2) + params.c1 * slack)
}
