//! Federated multi-task linear SVMs.
//!
//! Each participant `k` learns `a_k(x) = (w + v_k)^T x`, where `w` is shared
//! through a coordinator and `v_k` never leaves the participant. Training
//! runs exact coordinate descent on the dual problem; only the change of
//! `w` is exchanged. The [`federation`] module simulates the
//! coordinator/participant protocol in virtual time with heterogeneous
//! compute delays, stragglers and masking of the shared update.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod federation;
pub mod linalg;
pub mod masking;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    decision_value, epsilon_insensitive, predict, DualVars, Hyperparams, ModelState, Prediction,
    Problem, TaskData,
};
pub use solver::{apply_global, solve_sequential, ParticipantState, SweepResult};
