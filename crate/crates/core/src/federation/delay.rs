use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian compute-delay model of one participant.
///
/// The mean is `c_nd*n*d + c_n*n + c_d*d + c_0` (virtual seconds for one
/// sweep over `n` samples of dimension `d`), the standard deviation is
/// `sigma_ratio` times the mean, and the draw is divided by `hw_factor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelayModel {
    pub c_nd: f64,
    pub c_n: f64,
    pub c_d: f64,
    pub c_0: f64,
    pub sigma_ratio: f64,
    pub hw_factor: f64,
}

impl Default for DelayModel {
    /// Coefficients fitted by `mtsvm calibrate-delays` on the reference
    /// machine (release build, classification sweeps).
    fn default() -> Self {
        Self {
            c_nd: DEFAULT_C_ND,
            c_n: DEFAULT_C_N,
            c_d: DEFAULT_C_D,
            c_0: DEFAULT_C_0,
            sigma_ratio: 0.1,
            hw_factor: 1.0,
        }
    }
}

pub const DEFAULT_C_ND: f64 = 1.77e-9;
pub const DEFAULT_C_N: f64 = 9.62e-9;
pub const DEFAULT_C_D: f64 = 1.44e-9;
pub const DEFAULT_C_0: f64 = 0.0;

impl DelayModel {
    /// Deterministic zero-cost model, useful for protocol tests.
    pub fn instant() -> Self {
        Self { c_nd: 0.0, c_n: 0.0, c_d: 0.0, c_0: 0.0, sigma_ratio: 0.0, hw_factor: 1.0 }
    }

    pub fn with_hw_factor(mut self, hw_factor: f64) -> Self {
        self.hw_factor = hw_factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let coefs = [self.c_nd, self.c_n, self.c_d, self.c_0, self.sigma_ratio];
        if coefs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::Config("delay coefficients must be finite and non-negative".into()));
        }
        if !(self.hw_factor.is_finite() && self.hw_factor > 0.0) {
            return Err(Error::Config(format!("hw_factor must be positive, got {}", self.hw_factor)));
        }
        Ok(())
    }

    pub fn mean(&self, n: usize, d: usize) -> f64 {
        let (n, d) = (n as f64, d as f64);
        self.c_nd * n * d + self.c_n * n + self.c_d * d + self.c_0
    }
}

/// One compute delay. Exactly one standard normal is consumed per call.
pub fn sample_compute_delay<R: Rng + ?Sized>(model: &DelayModel, n: usize, d: usize, rng: &mut R) -> f64 {
    let mu = model.mean(n, d);
    let z: f64 = rng.sample(StandardNormal);
    let g = mu + model.sigma_ratio * mu * z;
    g.max(mu * 1e-3) / model.hw_factor
}

/// The `rho`-quantile of `samples` delays drawn round-robin over the
/// participants, used as a waiting window that lets roughly a fraction
/// `rho` of the participants respond.
pub fn calibrate_t_wait<R: Rng + ?Sized>(
    models: &[DelayModel],
    sizes: &[usize],
    d: usize,
    rho: f64,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if models.is_empty() || models.len() != sizes.len() {
        return Err(Error::Config("need one delay model per participant".into()));
    }
    if !(rho > 0.0 && rho <= 1.0) || samples == 0 {
        return Err(Error::Config(format!("responder fraction {rho} not in (0, 1]")));
    }
    for m in models {
        m.validate()?;
    }
    let mut draws: Vec<f64> = (0..samples)
        .map(|s| {
            let k = s % models.len();
            sample_compute_delay(&models[k], sizes[k], d, rng)
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    let idx = ((rho * samples as f64).ceil() as usize).clamp(1, samples) - 1;
    Ok(draws[idx])
}
