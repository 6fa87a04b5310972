//! Reference solvers for small instances.
//!
//! Nothing here shares code with [`crate::solver`] or [`crate::objective`]:
//! the duals are written out through explicit Gram matrices over the
//! original variables (`alpha` for classification, the `(alpha^+, alpha^-)`
//! pair for regression) and minimised by accelerated projected gradient
//! over the box `[0, C1]`.

use crate::error::{Error, Result};
use crate::model::{DualVars, Hyperparams, Problem, TaskData};
use crate::solver::regression::RegressionDualState;

const MAX_SAMPLES: usize = 30;

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub duals: Vec<DualVars>,
    /// Dual objective (`-L`) at the returned point, evaluated by the oracle.
    pub objective: f64,
    pub steps: usize,
}

/// `Q[a][b] = s_a s_b x_a^T x_b (1 + [same task] / C2)` over all samples.
fn gram(tasks: &[TaskData], params: &Hyperparams, signed: bool) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut xs: Vec<(&[f64], f64, usize)> = Vec::new();
    for (k, t) in tasks.iter().enumerate() {
        for i in 0..t.n() {
            let s = if signed { t.label(i) } else { 1.0 };
            xs.push((t.sample(i), s, k));
        }
    }
    let n = xs.len();
    let mut q = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            let ip: f64 = xs[a].0.iter().zip(xs[b].0).map(|(p, r)| p * r).sum();
            let coupling = if xs[a].2 == xs[b].2 { 1.0 + 1.0 / params.c2 } else { 1.0 };
            q[a][b] = xs[a].1 * xs[b].1 * ip * coupling;
        }
    }
    (q, xs.iter().map(|x| x.2).collect())
}

fn matvec(q: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    q.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// Box-constrained quadratic `1/2 z^T H z + c^T z` over `[0, ub]^m`.
struct BoxQp {
    h: Vec<Vec<f64>>,
    c: Vec<f64>,
    ub: f64,
}

impl BoxQp {
    fn value(&self, z: &[f64]) -> f64 {
        let hz = matvec(&self.h, z);
        z.iter().zip(&hz).zip(&self.c).map(|((zi, hi), ci)| 0.5 * zi * hi + ci * zi).sum()
    }

    fn grad(&self, z: &[f64]) -> Vec<f64> {
        matvec(&self.h, z).iter().zip(&self.c).map(|(a, b)| a + b).collect()
    }

    fn project(&self, z: &mut [f64]) {
        for zi in z {
            *zi = zi.clamp(0.0, self.ub);
        }
    }

    /// Gershgorin bound on the largest eigenvalue.
    fn lipschitz(&self) -> f64 {
        self.h.iter().map(|row| row.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    fn mapping_norm(&self, z: &[f64], step: f64) -> f64 {
        let g = self.grad(z);
        let mut p: Vec<f64> = z.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        self.project(&mut p);
        z.iter().zip(&p).map(|(a, b)| ((a - b) / step).powi(2)).sum::<f64>().sqrt()
    }

    fn solve(&self, steps: usize, step_size: Option<f64>, tol: f64) -> Result<(Vec<f64>, usize)> {
        let m = self.c.len();
        let lip = self.lipschitz();
        if m == 0 || lip == 0.0 {
            // No curvature: minimise the linear term coordinate-wise.
            let z = self.c.iter().map(|&ci| if ci < 0.0 { self.ub } else { 0.0 }).collect();
            return Ok((z, 0));
        }
        let step = step_size.unwrap_or(1.0 / lip);
        let mut x = vec![0.0; m];
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut residual = f64::INFINITY;
        for k in 0..steps {
            let g = self.grad(&y);
            let mut next: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            self.project(&mut next);
            // Restart momentum when it points uphill.
            let uphill: f64 =
                g.iter().zip(next.iter().zip(&x)).map(|(gi, (n, o))| gi * (n - o)).sum();
            let t_next = if uphill > 0.0 { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
            let beta = if uphill > 0.0 { 0.0 } else { (t - 1.0) / t_next };
            y = next.iter().zip(&x).map(|(n, o)| n + beta * (n - o)).collect();
            x = next;
            t = t_next;
            if k % 16 == 0 {
                residual = self.mapping_norm(&x, step);
                if residual <= tol {
                    return Ok((x, k + 1));
                }
            }
        }
        residual = residual.min(self.mapping_norm(&x, step));
        if residual <= tol {
            Ok((x, steps))
        } else {
            Err(Error::NonConvergence { steps, residual })
        }
    }
}

/// Minimises the classification or regression dual of a small instance.
/// `step_size = None` uses `1 / L` with a Gershgorin bound on `L`.
pub fn solve_dual_projected_gradient(
    problem: Problem,
    tasks: &[TaskData],
    params: &Hyperparams,
    steps: usize,
    step_size: Option<f64>,
) -> Result<OracleSolution> {
    let total: usize = tasks.iter().map(TaskData::n).sum();
    if total > MAX_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "oracle is limited to {MAX_SAMPLES} samples, got {total}"
        )));
    }
    let tol = 1e-8;
    match problem {
        Problem::Classification => {
            let (q, _) = gram(tasks, params, true);
            let qp = BoxQp { h: q, c: vec![-1.0; total], ub: params.c1 };
            let (alpha, steps) = qp.solve(steps, step_size, tol)?;
            let objective = qp.value(&alpha);
            Ok(OracleSolution { duals: split_classification(tasks, &alpha), objective, steps })
        }
        Problem::Regression => {
            // z = (alpha^+, alpha^-), da = alpha^- - alpha^+.
            let (q, _) = gram(tasks, params, false);
            let m = 2 * total;
            let mut h = vec![vec![0.0; m]; m];
            for a in 0..total {
                for b in 0..total {
                    h[a][b] = q[a][b];
                    h[total + a][total + b] = q[a][b];
                    h[a][total + b] = -q[a][b];
                    h[total + a][b] = -q[a][b];
                }
            }
            let labels: Vec<f64> = tasks.iter().flat_map(|t| t.labels().to_vec()).collect();
            let mut c = vec![0.0; m];
            for a in 0..total {
                c[a] = labels[a] + params.epsilon;
                c[total + a] = -labels[a] + params.epsilon;
            }
            let qp = BoxQp { h, c, ub: params.c1 };
            let (z, steps) = qp.solve(steps, step_size, tol)?;
            let objective = qp.value(&z);
            let da: Vec<f64> = (0..total).map(|a| z[total + a] - z[a]).collect();
            Ok(OracleSolution { duals: split_regression(tasks, &da), objective, steps })
        }
    }
}

fn split_classification(tasks: &[TaskData], flat: &[f64]) -> Vec<DualVars> {
    let mut offset = 0;
    tasks
        .iter()
        .map(|t| {
            let part = flat[offset..offset + t.n()].to_vec();
            offset += t.n();
            DualVars::Classification(part)
        })
        .collect()
}

fn split_regression(tasks: &[TaskData], flat: &[f64]) -> Vec<DualVars> {
    let mut offset = 0;
    tasks
        .iter()
        .map(|t| {
            let part = flat[offset..offset + t.n()].to_vec();
            offset += t.n();
            DualVars::Regression(RegressionDualState::from_delta(part))
        })
        .collect()
}

/// Dual objective of arbitrary dual variables, via the Gram-matrix form.
pub fn dual_value(tasks: &[TaskData], params: &Hyperparams, duals: &[DualVars]) -> f64 {
    let signed = matches!(duals.first(), Some(DualVars::Classification(_)));
    let (q, _) = gram(tasks, params, signed);
    let mut coef = Vec::new();
    let mut linear = 0.0;
    for (t, dual) in tasks.iter().zip(duals) {
        match dual {
            DualVars::Classification(a) => {
                coef.extend_from_slice(a);
                linear -= a.iter().sum::<f64>();
            }
            DualVars::Regression(r) => {
                for i in 0..t.n() {
                    let da = r.alpha_minus()[i] - r.alpha_plus()[i];
                    coef.push(da);
                    linear += -da * t.label(i)
                        + params.epsilon * (r.alpha_minus()[i] + r.alpha_plus()[i]);
                }
            }
        }
    }
    let qc = matvec(&q, &coef);
    0.5 * coef.iter().zip(&qc).map(|(a, b)| a * b).sum::<f64>() + linear
}

/// Recomputes `w = sum coef x` and `v_k = (1/C2) sum_i coef x` from scratch.
pub fn reconstruct_weights(
    duals: &[DualVars],
    tasks: &[TaskData],
    params: &Hyperparams,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = tasks.first().map(TaskData::d).unwrap_or(0);
    let mut w = vec![0.0; d];
    let mut vs = Vec::with_capacity(tasks.len());
    for (t, dual) in tasks.iter().zip(duals) {
        let mut u = vec![0.0; d];
        for i in 0..t.n() {
            let coef = match dual {
                DualVars::Classification(a) => a[i] * t.label(i),
                DualVars::Regression(r) => r.alpha_minus()[i] - r.alpha_plus()[i],
            };
            for (j, x) in t.sample(i).iter().enumerate() {
                u[j] += coef * x;
            }
        }
        for j in 0..d {
            w[j] += u[j];
        }
        vs.push(u.iter().map(|x| x / params.c2).collect());
    }
    (w, vs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_data_stays_at_zero() {
        let tasks = vec![TaskData::from_rows(0, &[vec![0.0, 0.0]], vec![0.0]).unwrap()];
        let p = Hyperparams::new(1.0, 1.0, 0.1).unwrap();
        let sol = solve_dual_projected_gradient(Problem::Regression, &tasks, &p, 100, None).unwrap();
        assert_eq!(sol.objective, 0.0);
        let DualVars::Regression(r) = &sol.duals[0] else { unreachable!() };
        assert_eq!(r.delta_alpha(), &[0.0]);
    }

    #[test]
    fn single_sample_classification_optimum() {
        // Objective a^2 - a, minimised at a = 0.5 with value -0.25.
        let tasks = vec![TaskData::from_rows(0, &[vec![0.6, 0.8]], vec![1.0]).unwrap()];
        let p = Hyperparams::new(100.0, 1.0, 0.0).unwrap();
        let sol =
            solve_dual_projected_gradient(Problem::Classification, &tasks, &p, 10_000, None).unwrap();
        let DualVars::Classification(a) = &sol.duals[0] else { unreachable!() };
        assert!((a[0] - 0.5).abs() < 1e-8);
        assert!((sol.objective + 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_large_instances() {
        let rows: Vec<Vec<f64>> = (0..31).map(|i| vec![i as f64 + 1.0]).collect();
        let tasks = vec![TaskData::from_rows(0, &rows, vec![1.0; 31]).unwrap()];
        let p = Hyperparams::new(1.0, 1.0, 0.0).unwrap();
        assert!(solve_dual_projected_gradient(Problem::Classification, &tasks, &p, 10, None).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let rows = vec![vec![1.0, 0.3], vec![0.2, 1.0], vec![-1.0, 0.5]];
        let tasks = vec![TaskData::from_rows(0, &rows, vec![1.0, -1.0, 1.0]).unwrap()];
        let p = Hyperparams::new(1.0, 1.0, 0.0).unwrap();
        let err = solve_dual_projected_gradient(Problem::Classification, &tasks, &p, 1, Some(1e-6))
            .unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn reconstruct_zero_duals() {
        let tasks = vec![TaskData::from_rows(0, &[vec![1.0, 2.0]], vec![1.0]).unwrap()];
        let p = Hyperparams::new(1.0, 1.0, 0.0).unwrap();
        let (w, v) = reconstruct_weights(&[DualVars::Classification(vec![0.0])], &tasks, &p);
        assert_eq!(w, vec![0.0, 0.0]);
        assert_eq!(v, vec![vec![0.0, 0.0]]);
    }
}
