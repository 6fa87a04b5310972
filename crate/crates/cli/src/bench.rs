//! `bench`: per-epoch sweep times and the linear cost-model checks.

use std::path::Path;

use serde::Serialize;

use mtsvm::Problem;

use crate::error::{CliError, CliResult};
use crate::timing::{fit_cost_model, is_determined, median, time_sweeps};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    /// `(L, d)` pairs: samples per participant and dimension.
    pub sizes: Vec<(usize, usize)>,
    pub repetitions: usize,
    pub min_seconds: f64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        let mut sizes = Vec::new();
        for l in [500, 1000, 2000] {
            for d in [100, 200, 400] {
                sizes.push((l, d));
            }
        }
        Self { sizes, repetitions: 9, min_seconds: 1e-2 }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BenchRow {
    pub l: usize,
    pub d: usize,
    pub classification_seconds: f64,
    pub regression_seconds: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ModelFit {
    pub problem: Problem,
    /// `[c_Ld, c_L, c_d, c_0]`.
    pub coefficients: [f64; 4],
    pub r_squared: f64,
}

/// Time ratio between two sizes that differ by a factor two in one axis.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Doubling {
    pub problem: Problem,
    pub axis: String,
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: String, value: f64, lower: f64, upper: f64) -> Self {
        Self { name, value, lower, upper, passed: value >= lower && value <= upper }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub fits: Vec<ModelFit>,
    pub doublings: Vec<Doubling>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub const MIN_FIT_R2: f64 = 0.95;
pub const DOUBLING_RANGE: (f64, f64) = (1.7, 2.3);
pub const PROBLEM_RATIO_RANGE: (f64, f64) = (1.5, 2.5);

/// Builds fits and checks from measured rows.
pub fn evaluate(rows: Vec<BenchRow>) -> CliResult<BenchReport> {
    let sizes: Vec<(usize, usize)> = rows.iter().map(|r| (r.l, r.d)).collect();
    let mut fits = Vec::new();
    let mut checks = Vec::new();
    let mut doublings = Vec::new();
    for problem in [Problem::Classification, Problem::Regression] {
        let time = |r: &BenchRow| match problem {
            Problem::Classification => r.classification_seconds,
            Problem::Regression => r.regression_seconds,
        };
        let name = match problem {
            Problem::Classification => "classification",
            Problem::Regression => "regression",
        };
        if is_determined(&sizes) {
            let times: Vec<f64> = rows.iter().map(time).collect();
            let fit = fit_cost_model(&sizes, &times)?;
            checks.push(Check::new(format!("{name}_fit_r2"), fit.r_squared, MIN_FIT_R2, 1.0));
            fits.push(ModelFit { problem, coefficients: fit.coefficients, r_squared: fit.r_squared });
        }
        for (axis, doubled) in [("l", true), ("d", false)] {
            let mut values = Vec::new();
            for a in &rows {
                for b in &rows {
                    let pair = if doubled { b.d == a.d && b.l == 2 * a.l } else { b.l == a.l && b.d == 2 * a.d };
                    if pair {
                        let ratio = time(b) / time(a);
                        values.push(ratio);
                        doublings.push(Doubling { problem, axis: axis.into(), from: (a.l, a.d), to: (b.l, b.d), ratio });
                    }
                }
            }
            if !values.is_empty() {
                let label = format!("{name}_double_{axis}_median");
                checks.push(Check::new(label, median(&values), DOUBLING_RANGE.0, DOUBLING_RANGE.1));
            }
        }
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    if !ratios.is_empty() {
        checks.push(Check::new(
            "regression_over_classification_median".into(),
            median(&ratios),
            PROBLEM_RATIO_RANGE.0,
            PROBLEM_RATIO_RANGE.1,
        ));
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(BenchReport { rows, fits, doublings, checks, passed })
}

fn fastest(times: &[f64]) -> f64 {
    times.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Each size is timed as the fastest of `repetitions` runs. Repetitions
/// cycle over all sizes so that transient load is spread across the grid.
pub fn bench(options: &BenchOptions) -> CliResult<BenchReport> {
    if options.sizes.is_empty() || options.repetitions == 0 {
        return Err(CliError::Config("bench needs at least one size and one repetition".into()));
    }
    let mut best = vec![[f64::INFINITY; 2]; options.sizes.len()];
    for rep in 0..options.repetitions {
        for (i, &(l, d)) in options.sizes.iter().enumerate() {
            for (j, problem) in [Problem::Classification, Problem::Regression].into_iter().enumerate() {
                let seed = (rep * options.sizes.len() + i) as u64;
                let t = fastest(&time_sweeps(problem, l, d, 1, options.min_seconds, seed)?);
                best[i][j] = best[i][j].min(t);
            }
        }
    }
    let rows = options
        .sizes
        .iter()
        .zip(best)
        .map(|(&(l, d), [c, r])| BenchRow { l, d, classification_seconds: c, regression_seconds: r, ratio: r / c })
        .collect();
    evaluate(rows)
}

pub fn render(report: &BenchReport) -> String {
    let mut out = format!("{:>7} {:>6} {:>14} {:>14} {:>7}\n", "L", "d", "class_s", "regr_s", "ratio");
    for r in &report.rows {
        out += &format!(
            "{:>7} {:>6} {:>14.6e} {:>14.6e} {:>7.3}\n",
            r.l, r.d, r.classification_seconds, r.regression_seconds, r.ratio
        );
    }
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        out += &format!("{status} {} = {:.4} (expected [{}, {}])\n", c.name, c.value, c.lower, c.upper);
    }
    out
}

pub fn write_report(path: &Path, report: &BenchReport) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(report).map_err(|e| CliError::Data(e.to_string()))?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(l: usize, d: usize, c: f64, r: f64) -> BenchRow {
        BenchRow { l, d, classification_seconds: c, regression_seconds: r, ratio: r / c }
    }

    #[test]
    fn linear_timings_pass_every_check() {
        let mut rows = Vec::new();
        for l in [100, 200, 400] {
            for d in [10, 20, 40] {
                let c = 1e-9 * (l * d) as f64;
                rows.push(row(l, d, c, 2.0 * c));
            }
        }
        let report = evaluate(rows).unwrap();
        assert!(report.passed, "{}", render(&report));
        assert_eq!(report.fits.len(), 2);
        assert_eq!(report.checks.len(), 2 * 3 + 1);
        assert_eq!(report.doublings.len(), 2 * 12);
    }

    #[test]
    fn equal_problem_cost_fails_ratio_check() {
        let rows = vec![row(10, 10, 1.0, 1.0)];
        let report = evaluate(rows).unwrap();
        assert!(!report.passed);
        assert_eq!(report.checks.len(), 1);
    }
}
