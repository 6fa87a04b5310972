//! `calibrate-delays`: fits the compute-delay model to measured sweep times.

use std::path::Path;

use serde::{Deserialize, Serialize};

use mtsvm::Problem;

use crate::error::{CliError, CliResult};
use crate::timing::{fit_cost_model, is_determined, mean_std, time_sweeps};

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    pub grid: Vec<(usize, usize)>,
    pub repetitions: usize,
    pub problem: Problem,
    /// Minimum wall time of one repetition.
    pub min_seconds: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        let mut grid = Vec::new();
        for n in [50, 100, 200, 400] {
            for d in [25, 50, 100, 200] {
                grid.push((n, d));
            }
        }
        Self { grid, repetitions: 10, problem: Problem::Classification, min_seconds: 2e-3 }
    }
}

/// A `[delay]` table that can be pasted into an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayCoefficients {
    pub c_nd: f64,
    pub c_n: f64,
    pub c_d: f64,
    pub c_0: f64,
    pub sigma_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub n: usize,
    pub d: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub fitted_seconds: f64,
    pub residual_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub problem: Problem,
    pub r_squared: f64,
    pub points: Vec<CalibrationPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub delay: DelayCoefficients,
    pub fit: FitReport,
}

/// Fits the model to per-point timing samples. `sigma_ratio` is the mean
/// coefficient of variation over the grid.
pub fn fit_calibration(problem: Problem, samples: &[((usize, usize), Vec<f64>)]) -> CliResult<Calibration> {
    if samples.iter().any(|(_, s)| s.is_empty()) {
        return Err(CliError::Data("every grid point needs at least one timing".into()));
    }
    let sizes: Vec<(usize, usize)> = samples.iter().map(|(s, _)| *s).collect();
    let stats: Vec<(f64, f64)> = samples.iter().map(|(_, s)| mean_std(s)).collect();
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let fit = fit_cost_model(&sizes, &means)?;
    let sigma_ratio = stats.iter().map(|(m, s)| if *m > 0.0 { s / m } else { 0.0 }).sum::<f64>() / stats.len() as f64;
    let [c_nd, c_n, c_d, c_0] = fit.coefficients;
    let points = sizes
        .iter()
        .zip(&stats)
        .zip(&fit.residuals)
        .map(|((&(n, d), &(mean, std)), &residual)| CalibrationPoint {
            n,
            d,
            mean_seconds: mean,
            std_seconds: std,
            fitted_seconds: mean - residual,
            residual_seconds: residual,
        })
        .collect();
    Ok(Calibration {
        delay: DelayCoefficients { c_nd, c_n, c_d, c_0, sigma_ratio },
        fit: FitReport { problem, r_squared: fit.r_squared, points },
    })
}

pub fn calibrate(options: &CalibrationOptions) -> CliResult<Calibration> {
    if options.repetitions == 0 {
        return Err(CliError::Config("repetitions must be positive".into()));
    }
    if !is_determined(&options.grid) {
        return Err(CliError::Config(format!(
            "grid of {} point(s) is underdetermined; use at least two distinct n and two distinct d",
            options.grid.len()
        )));
    }
    let mut samples = Vec::with_capacity(options.grid.len());
    for (i, &(n, d)) in options.grid.iter().enumerate() {
        let times = time_sweeps(options.problem, n, d, options.repetitions, options.min_seconds, i as u64)?;
        samples.push(((n, d), times));
    }
    fit_calibration(options.problem, &samples)
}

pub fn write_calibration(path: &Path, calibration: &Calibration) -> CliResult<()> {
    let text = toml::to_string(calibration).map_err(|e| CliError::Data(format!("serialize: {e}")))?;
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}
