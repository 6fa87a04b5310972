//! Per-participant dual coordinate sweeps.
//!
//! A participant owns its copy of the global component `w`, its task
//! component `v_k` and the dual variables of its own samples. One sweep
//! visits every sample once in a seeded random order and applies the exact
//! coordinate minimiser of the dual, updating `w` and `v_k` after each
//! sample so later samples see earlier updates.

pub mod classification;
pub mod regression;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::linalg::{add, axpy, dot};
use crate::model::{common_dimension, DualVars, Hyperparams, ModelState, Problem, TaskData};

/// State held by one participant.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantState {
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub dual: DualVars,
}

impl ParticipantState {
    pub fn zeros(problem: Problem, task: &TaskData) -> Self {
        Self {
            w: vec![0.0; task.d()],
            v: vec![0.0; task.d()],
            dual: DualVars::zeros(problem, task.n()),
        }
    }

    pub fn problem(&self) -> Problem {
        self.dual.problem()
    }

    fn check(&self, task: &TaskData) -> Result<()> {
        check_len(task.d(), self.w.len())?;
        check_len(task.d(), self.v.len())?;
        check_len(task.n(), self.dual.len())
    }
}

/// Outcome of one (possibly interrupted) sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Unmasked change of the participant's global component.
    pub delta_w: Vec<f64>,
    /// `(sample index, change of its dual coefficient)` in visiting order.
    /// For regression the change is that of `alpha^- - alpha^+`.
    pub per_sample_deltas: Vec<(usize, f64)>,
}

impl SweepResult {
    pub fn visited(&self) -> usize {
        self.per_sample_deltas.len()
    }
}

/// Replaces the participant's global component with the coordinator's.
/// `v_k` and the dual variables are left as they are.
pub fn apply_global(state: &mut ParticipantState, w_global: &[f64]) -> Result<()> {
    check_len(state.w.len(), w_global.len())?;
    state.w.copy_from_slice(w_global);
    Ok(())
}

/// Runs one full sweep, dispatching on the kind of dual state.
pub fn sweep<R: Rng + ?Sized>(
    state: &mut ParticipantState,
    task: &TaskData,
    params: &Hyperparams,
    rng: &mut R,
) -> Result<SweepResult> {
    sweep_prefix(state, task, params, rng, task.n())
}

/// Runs the first `limit` steps of a sweep and commits them.
///
/// The permutation is always drawn in full, so the random stream advances
/// identically whether or not the sweep is interrupted.
pub fn sweep_prefix<R: Rng + ?Sized>(
    state: &mut ParticipantState,
    task: &TaskData,
    params: &Hyperparams,
    rng: &mut R,
    limit: usize,
) -> Result<SweepResult> {
    state.check(task)?;
    let mut order: Vec<usize> = (0..task.n()).collect();
    order.shuffle(rng);
    order.truncate(limit.min(task.n()));
    run_in_order(state, task, params, &order)
}

/// Sweeps the given sample indices in order.
pub fn run_in_order(
    state: &mut ParticipantState,
    task: &TaskData,
    params: &Hyperparams,
    order: &[usize],
) -> Result<SweepResult> {
    state.check(task)?;
    let d = task.d();
    let base = state.w.clone();
    let mut delta_w = vec![0.0; d];
    let mut per_sample_deltas = Vec::with_capacity(order.len());
    let inv_c2 = 1.0 / params.c2;
    let result = (|| {
        for &i in order {
            let x = task.sample(i);
            let sq_norm = task.sq_norm(i);
            let wx = dot(&state.w, x);
            let vx = dot(&state.v, x);
            let (delta, coef) = match &mut state.dual {
                DualVars::Classification(alpha) => {
                    let y = task.label(i);
                    let (new, delta) = classification::coordinate_step(
                        alpha[i], y, wx + vx, sq_norm, params,
                    )?;
                    alpha[i] = new;
                    (delta, delta * y)
                }
                DualVars::Regression(dual) => {
                    let (new, delta) = regression::coordinate_step(
                        dual.delta_alpha()[i],
                        task.label(i),
                        wx + vx,
                        sq_norm,
                        params,
                    )?;
                    dual.set(i, new);
                    (delta, delta)
                }
            };
            per_sample_deltas.push((i, delta));
            if delta != 0.0 {
                axpy(coef, x, &mut state.w);
                axpy(coef, x, &mut delta_w);
                axpy(coef * inv_c2, x, &mut state.v);
            }
        }
        Ok::<(), Error>(())
    })();
    // Committed steps survive an error part-way through.
    state.w = add(&base, &delta_w);
    result?;
    Ok(SweepResult { delta_w, per_sample_deltas })
}

/// Single-process coordinate descent over the whole multi-task dual:
/// tasks are swept one after another, each starting from the `w` left by
/// the previous one. Stops once an epoch changes no coefficient by more
/// than `tol` or after `max_epochs`.
pub fn solve_sequential<R: Rng + ?Sized>(
    problem: Problem,
    tasks: &[TaskData],
    params: &Hyperparams,
    max_epochs: usize,
    tol: f64,
    rng: &mut R,
) -> Result<ModelState> {
    let mut states: Vec<ParticipantState> =
        tasks.iter().map(|t| ParticipantState::zeros(problem, t)).collect();
    let mut w = vec![0.0; common_dimension(tasks)?];
    let mut epoch = 0;
    while epoch < max_epochs {
        epoch += 1;
        let mut largest: f64 = 0.0;
        for (state, task) in states.iter_mut().zip(tasks) {
            apply_global(state, &w)?;
            let result = sweep(state, task, params, rng)?;
            largest = result.per_sample_deltas.iter().fold(largest, |m, (_, d)| m.max(d.abs()));
            w.copy_from_slice(&state.w);
        }
        if largest <= tol {
            break;
        }
    }
    Ok(ModelState {
        w,
        v: states.iter().map(|s| s.v.clone()).collect(),
        duals: states.into_iter().map(|s| s.dual).collect(),
        epoch,
    })
}

pub(crate) fn zero_norm_error(sq_norm: f64) -> Result<()> {
    if sq_norm > 0.0 && sq_norm.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "coordinate step needs a sample with positive norm (||x||^2 = {sq_norm})"
        )))
    }
}
