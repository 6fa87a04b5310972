//! Wall-clock timing of real local sweeps.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mtsvm::solver::sweep;
use mtsvm::{Hyperparams, ParticipantState, Problem, TaskData};

use crate::error::{CliError, CliResult};

/// Uniform features in `[-1, 1)`; alternating labels for classification,
/// uniform targets for regression.
pub fn random_task(problem: Problem, n: usize, d: usize, rng: &mut ChaCha8Rng) -> CliResult<TaskData> {
    let features = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let labels = (0..n)
        .map(|i| match problem {
            Problem::Classification => {
                if i % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Problem::Regression => rng.random_range(-3.0..3.0),
        })
        .collect();
    Ok(TaskData::new(0, d, features, labels)?)
}

/// Seconds per sweep, one value per repetition. Each repetition loops
/// until at least `min_seconds` have elapsed.
pub fn time_sweeps(
    problem: Problem,
    n: usize,
    d: usize,
    repetitions: usize,
    min_seconds: f64,
    seed: u64,
) -> CliResult<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let task = random_task(problem, n, d, &mut rng)?;
    let params = Hyperparams::new(1.0, 0.05, 0.1)?;
    let mut state = ParticipantState::zeros(problem, &task);
    sweep(&mut state, &task, &params, &mut rng)?;
    let mut out = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let mut count = 0usize;
        loop {
            std::hint::black_box(sweep(&mut state, &task, &params, &mut rng)?);
            count += 1;
            let elapsed = start.elapsed().as_secs_f64();
            if elapsed >= min_seconds {
                out.push(elapsed / count as f64);
                break;
            }
        }
    }
    Ok(out)
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Least-squares fit of `t = c_nd*n*d + c_n*n + c_d*d + c_0` with
/// non-negative coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFit {
    /// `[c_nd, c_n, c_d, c_0]`.
    pub coefficients: [f64; 4],
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

fn design(sizes: &[(usize, usize)]) -> DMatrix<f64> {
    DMatrix::from_fn(sizes.len(), 4, |i, j| {
        let (n, d) = (sizes[i].0 as f64, sizes[i].1 as f64);
        [n * d, n, d, 1.0][j]
    })
}

/// Column-scaled design matrix has full column rank.
pub fn is_determined(sizes: &[(usize, usize)]) -> bool {
    if sizes.len() < 4 {
        return false;
    }
    let (a, _) = scaled(&design(sizes));
    a.svd(false, false).rank(1e-9) == 4
}

fn scaled(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let scales: Vec<f64> =
        (0..a.ncols()).map(|j| a.column(j).amax().max(f64::MIN_POSITIVE)).collect();
    let mut s = a.clone();
    for (j, sc) in scales.iter().enumerate() {
        s.column_mut(j).scale_mut(1.0 / sc);
    }
    (s, scales)
}

/// Non-negative least squares by enumerating the active sets; exact for
/// four unknowns.
pub fn fit_cost_model(sizes: &[(usize, usize)], times: &[f64]) -> CliResult<CostFit> {
    if sizes.len() != times.len() {
        return Err(CliError::Data("one time per grid point required".into()));
    }
    if !is_determined(sizes) {
        return Err(CliError::Data(format!(
            "grid of {} point(s) cannot determine the four cost coefficients; use at least two \
             distinct n and two distinct d",
            sizes.len()
        )));
    }
    let (a, scales) = scaled(&design(sizes));
    let b = DVector::from_column_slice(times);
    let mut best: Option<([f64; 4], f64)> = None;
    for support in 1u32..16 {
        let cols: Vec<usize> = (0..4).filter(|j| support & (1 << j) != 0).collect();
        let sub = a.select_columns(&cols);
        let Ok(x) = sub.clone().svd(true, true).solve(&b, 1e-12) else { continue };
        if x.iter().any(|c| *c < 0.0) {
            continue;
        }
        let sse = (&sub * &x - &b).norm_squared();
        let mut coef = [0.0; 4];
        for (i, &j) in cols.iter().enumerate() {
            coef[j] = x[i] / scales[j];
        }
        if best.is_none_or(|(_, s)| sse < s) {
            best = Some((coef, sse));
        }
    }
    let (coefficients, sse) = best.ok_or_else(|| CliError::Data("no non-negative fit exists".into()))?;
    let residuals: Vec<f64> = sizes
        .iter()
        .zip(times)
        .map(|(&(n, d), &t)| {
            let (n, d) = (n as f64, d as f64);
            t - (coefficients[0] * n * d + coefficients[1] * n + coefficients[2] * d + coefficients[3])
        })
        .collect();
    let (mean, _) = mean_std(times);
    let sst: f64 = times.iter().map(|t| (t - mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    Ok(CostFit { coefficients, r_squared, residuals })
}

/// Parses `NxD[,NxD...]`.
pub fn parse_grid(text: &str) -> CliResult<Vec<(usize, usize)>> {
    text.split(',')
        .map(|item| {
            let item = item.trim();
            let parsed = item
                .split_once(['x', 'X'])
                .and_then(|(n, d)| Some((n.trim().parse().ok()?, d.trim().parse().ok()?)));
            match parsed {
                Some((n, d)) if n > 0 && d > 0 => Ok((n, d)),
                _ => Err(CliError::Config(format!("grid entry {item:?} is not NxD with positive sizes"))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<(usize, usize)> {
        let mut g = Vec::new();
        for n in [50, 100, 200, 400] {
            for d in [10, 20, 40] {
                g.push((n, d));
            }
        }
        g
    }

    #[test]
    fn planted_coefficients_are_recovered() {
        let planted = [3.2e-9, 4.0e-9, 7.0e-9, 2.0e-6];
        let g = grid();
        let times: Vec<f64> = g
            .iter()
            .map(|&(n, d)| {
                let (n, d) = (n as f64, d as f64);
                planted[0] * n * d + planted[1] * n + planted[2] * d + planted[3]
            })
            .collect();
        let fit = fit_cost_model(&g, &times).unwrap();
        for (got, want) in fit.coefficients.iter().zip(planted) {
            assert!((got - want).abs() <= 0.01 * want, "{got} vs {want}");
        }
        assert!(fit.r_squared > 0.999_999);
    }

    #[test]
    fn negative_components_are_clamped() {
        let g = grid();
        let times: Vec<f64> = g.iter().map(|&(n, d)| 1e-9 * (n * d) as f64 - 1e-12 * n as f64 + 1e-6).collect();
        let fit = fit_cost_model(&g, &times).unwrap();
        assert!(fit.coefficients.iter().all(|c| *c >= 0.0));
        assert_eq!(fit.coefficients[1], 0.0);
    }

    #[test]
    fn degenerate_grids_are_rejected() {
        assert!(fit_cost_model(&[(100, 10)], &[1.0]).is_err());
        let line = [(100, 10), (200, 10), (300, 10), (400, 10)];
        assert!(fit_cost_model(&line, &[1.0, 2.0, 3.0, 4.0]).is_err());
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("10x2, 20X3").unwrap(), vec![(10, 2), (20, 3)]);
        assert!(parse_grid("10").is_err());
        assert!(parse_grid("0x3").is_err());
    }
}
