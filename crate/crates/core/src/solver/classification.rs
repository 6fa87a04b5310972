//! Exact coordinate minimisation of the multi-task classification dual.
//!
//! With `w` and `v_k` kept equal to their dual expansions, the derivative
//! of the dual in `alpha_ik` is `y (w + v_k)^T x - 1` and the curvature is
//! `||x||^2 (1 + 1/C2)`, so one Newton step followed by clipping to
//! `[0, C1]` minimises the objective along that coordinate.

use rand::Rng;

use super::{sweep, zero_norm_error, ParticipantState, SweepResult};
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm_sq};
use crate::model::{Hyperparams, TaskData};

/// New value of `alpha` for one sample and the change applied to it.
pub fn alpha_update(
    alpha_prev: f64,
    x: &[f64],
    y: f64,
    w: &[f64],
    v: &[f64],
    params: &Hyperparams,
) -> Result<(f64, f64)> {
    check_len(x.len(), w.len())?;
    check_len(x.len(), v.len())?;
    coordinate_step(alpha_prev, y, dot(x, w) + dot(x, v), norm_sq(x), params)
}

/// `decision` is `(w + v)^T x` at the current iterate.
#[inline]
pub(crate) fn coordinate_step(
    alpha_prev: f64,
    y: f64,
    decision: f64,
    sq_norm: f64,
    params: &Hyperparams,
) -> Result<(f64, f64)> {
    zero_norm_error(sq_norm)?;
    let raw = alpha_prev + (1.0 - y * decision) / (sq_norm * (1.0 + 1.0 / params.c2));
    let alpha_new = raw.clamp(0.0, params.c1);
    Ok((alpha_new, alpha_new - alpha_prev))
}

/// One classification sweep over `task`.
pub fn local_sweep<R: Rng + ?Sized>(
    state: &mut ParticipantState,
    task: &TaskData,
    params: &Hyperparams,
    order_rng: &mut R,
) -> Result<SweepResult> {
    if !matches!(state.dual, crate::model::DualVars::Classification(_)) {
        return Err(Error::InvalidInput("classification sweep on regression state".into()));
    }
    sweep(state, task, params, order_rng)
}
