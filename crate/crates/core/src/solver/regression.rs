//! Exact coordinate minimisation of the multi-task epsilon-insensitive
//! regression dual.
//!
//! The state per sample is `da = alpha^- - alpha^+` with `|da| <= C1`; the
//! pair is recovered by [`decompose`]. Along one coordinate the dual is
//!
//! ```text
//! z(da) = a/2 (da - da_prev)^2 + g (da - da_prev) + eps |da|
//! a     = ||x||^2 (1 + 1/C2)
//! g     = (w + v)^T x - y
//! ```
//!
//! a convex quadratic with a kink at zero. Each side of the kink has a
//! closed-form minimiser; the lower of the two is taken.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sweep, zero_norm_error, ParticipantState, SweepResult};
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm_sq};
use crate::model::{DualVars, Hyperparams, TaskData};

/// `(alpha^+, alpha^-)` for one task, with their difference kept alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDualState {
    alpha_plus: Vec<f64>,
    alpha_minus: Vec<f64>,
    delta_alpha: Vec<f64>,
}

impl RegressionDualState {
    pub fn zeros(n: usize) -> Self {
        Self { alpha_plus: vec![0.0; n], alpha_minus: vec![0.0; n], delta_alpha: vec![0.0; n] }
    }

    pub fn from_delta(delta_alpha: Vec<f64>) -> Self {
        let (alpha_plus, alpha_minus) = delta_alpha.iter().map(|&da| decompose(da)).unzip();
        Self { alpha_plus, alpha_minus, delta_alpha }
    }

    pub fn len(&self) -> usize {
        self.delta_alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta_alpha.is_empty()
    }

    pub fn alpha_plus(&self) -> &[f64] {
        &self.alpha_plus
    }

    pub fn alpha_minus(&self) -> &[f64] {
        &self.alpha_minus
    }

    pub fn delta_alpha(&self) -> &[f64] {
        &self.delta_alpha
    }

    pub fn set(&mut self, i: usize, delta_alpha: f64) {
        let (plus, minus) = decompose(delta_alpha);
        self.alpha_plus[i] = plus;
        self.alpha_minus[i] = minus;
        self.delta_alpha[i] = delta_alpha;
    }
}

/// Splits `da` into `(alpha^+, alpha^-)` with at most one of them non-zero.
#[inline]
pub fn decompose(dalpha: f64) -> (f64, f64) {
    ((-dalpha).max(0.0), dalpha.max(0.0))
}

/// New `da` for one sample and its change.
pub fn delta_alpha_update(
    dalpha_prev: f64,
    x: &[f64],
    y: f64,
    w: &[f64],
    v: &[f64],
    params: &Hyperparams,
) -> Result<(f64, f64)> {
    check_len(x.len(), w.len())?;
    check_len(x.len(), v.len())?;
    coordinate_step(dalpha_prev, y, dot(x, w) + dot(x, v), norm_sq(x), params)
}

#[inline]
pub(crate) fn coordinate_step(
    dalpha_prev: f64,
    y: f64,
    decision: f64,
    sq_norm: f64,
    params: &Hyperparams,
) -> Result<(f64, f64)> {
    zero_norm_error(sq_norm)?;
    let curvature = sq_norm * (1.0 + 1.0 / params.c2);
    let g = decision - y;
    let eps = params.epsilon;
    let c1 = params.c1;
    // alpha^- side (da >= 0) and alpha^+ side (da <= 0).
    let minus = (dalpha_prev - (g + eps) / curvature).clamp(0.0, c1);
    let plus = (dalpha_prev - (g - eps) / curvature).clamp(-c1, 0.0);
    let z = |da: f64| {
        let t = da - dalpha_prev;
        0.5 * curvature * t * t + g * t + eps * da.abs()
    };
    let new = if z(minus) <= z(plus) { minus } else { plus };
    Ok((new, new - dalpha_prev))
}

/// One regression sweep over `task`. Increments carry no label factor:
/// `w += d x`, `v += d x / C2`.
pub fn local_sweep_regression<R: Rng + ?Sized>(
    state: &mut ParticipantState,
    task: &TaskData,
    params: &Hyperparams,
    order_rng: &mut R,
) -> Result<SweepResult> {
    if !matches!(state.dual, DualVars::Regression(_)) {
        return Err(Error::InvalidInput("regression sweep on classification state".into()));
    }
    sweep(state, task, params, order_rng)
}
