use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};
use crate::model::{Problem, TaskData};

/// Controls the synthetic multi-task generator.
///
/// Task `k` draws a feature mean vector with entries uniform in
/// `feature_mean_range` and one standard deviation from `feature_std_range`,
/// so narrow ranges give statistically similar participants and wide ranges
/// give dissimilar ones. The true model of task `k` is `w* + v_k*`, with
/// `v_k*` scaled by `task_component_scale` relative to `w*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub problem: Problem,
    pub num_tasks: usize,
    pub n_per_task: usize,
    pub d: usize,
    #[serde(default = "default_mean_range")]
    pub feature_mean_range: (f64, f64),
    #[serde(default = "default_std_range")]
    pub feature_std_range: (f64, f64),
    #[serde(default)]
    pub task_component_scale: f64,
    /// Regression only: signal-to-noise ratio of the labels.
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    /// Classification only: distance between the two class centres.
    #[serde(default = "default_separation")]
    pub class_separation: f64,
}

fn default_mean_range() -> (f64, f64) {
    (0.0, 0.0)
}
fn default_std_range() -> (f64, f64) {
    (1.0, 1.0)
}
fn default_snr() -> f64 {
    20.0
}
fn default_separation() -> f64 {
    2.0
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_tasks == 0 || self.n_per_task == 0 || self.d == 0 {
            return Err(Error::InvalidInput("synthetic dimensions must be positive".into()));
        }
        let (lo, hi) = self.feature_mean_range;
        let (slo, shi) = self.feature_std_range;
        if !(lo <= hi && slo <= shi && slo >= 0.0) || !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidInput("invalid feature mean/std ranges".into()));
        }
        if !self.snr_db.is_finite() || !(self.task_component_scale >= 0.0) {
            return Err(Error::InvalidInput("snr_db and task_component_scale must be finite".into()));
        }
        if self.problem == Problem::Classification && self.n_per_task < 2 {
            return Err(Error::InvalidInput("classification tasks need at least two samples".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub tasks: Vec<TaskData>,
    pub w_true: Vec<f64>,
    pub v_true: Vec<Vec<f64>>,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn ground_truth<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> (Vec<f64>, Vec<Vec<f64>>) {
    let w = gaussian_vec(rng, spec.d, 1.0);
    let v = (0..spec.num_tasks).map(|_| gaussian_vec(rng, spec.d, spec.task_component_scale)).collect();
    (w, v)
}

struct TaskFeatures {
    mean: Vec<f64>,
    std: f64,
}

fn task_features<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> TaskFeatures {
    let mean = (0..spec.d).map(|_| uniform(rng, spec.feature_mean_range)).collect();
    TaskFeatures { mean, std: uniform(rng, spec.feature_std_range) }
}

/// Linear-Gaussian regression tasks `y = (w* + v_k*)^T x + noise` at the
/// requested SNR (noise variance = empirical signal variance / 10^(snr/10)).
pub fn generate_synthetic_regression<R: Rng + ?Sized>(
    spec: &SyntheticSpec,
    rng: &mut R,
) -> Result<SyntheticDataset> {
    spec.validate()?;
    let (w_true, v_true) = ground_truth(spec, rng);
    let mut tasks = Vec::with_capacity(spec.num_tasks);
    for (k, v) in v_true.iter().enumerate() {
        let tf = task_features(spec, rng);
        let model: Vec<f64> = w_true.iter().zip(v).map(|(a, b)| a + b).collect();
        let mut features = Vec::with_capacity(spec.n_per_task * spec.d);
        let mut signal = Vec::with_capacity(spec.n_per_task);
        for _ in 0..spec.n_per_task {
            let x: Vec<f64> = tf
                .mean
                .iter()
                .map(|m| m + tf.std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            signal.push(dot(&model, &x));
            features.extend(x);
        }
        let n = signal.len() as f64;
        let mean = signal.iter().sum::<f64>() / n;
        let var = signal.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        let noise_std = (var / 10f64.powf(spec.snr_db / 10.0)).sqrt();
        let labels = if noise_std > 0.0 {
            let noise = Normal::new(0.0, noise_std)
                .map_err(|e| Error::InvalidInput(format!("noise distribution: {e}")))?;
            signal.iter().map(|s| s + noise.sample(rng)).collect()
        } else {
            signal
        };
        tasks.push(TaskData::new(k, spec.d, features, labels)?);
    }
    Ok(SyntheticDataset { tasks, w_true, v_true })
}

/// Two Gaussian clouds per task at `c_k +/- (separation/2) u_k`, with
/// `u_k` the unit direction of `w* + v_k*` and `c_k` the task's feature
/// mean projected orthogonally to `u_k`, so the ideal separator of every
/// task passes through the origin. Labels alternate `+1, -1, ...`.
pub fn generate_synthetic_classification<R: Rng + ?Sized>(
    spec: &SyntheticSpec,
    rng: &mut R,
) -> Result<SyntheticDataset> {
    spec.validate()?;
    let (w_true, v_true) = ground_truth(spec, rng);
    let mut tasks = Vec::with_capacity(spec.num_tasks);
    for (k, v) in v_true.iter().enumerate() {
        let tf = task_features(spec, rng);
        let mut u: Vec<f64> = w_true.iter().zip(v).map(|(a, b)| a + b).collect();
        let len = norm2(&u);
        if len == 0.0 {
            return Err(Error::InvalidInput("degenerate true model".into()));
        }
        u.iter_mut().for_each(|x| *x /= len);
        let along = dot(&tf.mean, &u);
        let centre: Vec<f64> = tf.mean.iter().zip(&u).map(|(m, ui)| m - along * ui).collect();
        let mut features = Vec::with_capacity(spec.n_per_task * spec.d);
        let mut labels = Vec::with_capacity(spec.n_per_task);
        for i in 0..spec.n_per_task {
            let y = if i % 2 == 0 { 1.0 } else { -1.0 };
            let offset = 0.5 * spec.class_separation * y;
            features.extend(
                centre
                    .iter()
                    .zip(&u)
                    .map(|(c, ui)| c + offset * ui + tf.std * rng.sample::<f64, _>(StandardNormal)),
            );
            labels.push(y);
        }
        tasks.push(TaskData::new(k, spec.d, features, labels)?);
    }
    Ok(SyntheticDataset { tasks, w_true, v_true })
}

pub fn generate_synthetic<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<SyntheticDataset> {
    match spec.problem {
        Problem::Classification => generate_synthetic_classification(spec, rng),
        Problem::Regression => generate_synthetic_regression(spec, rng),
    }
}
