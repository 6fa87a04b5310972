//! Virtual-time simulation of the coordinator/participant protocol.
//!
//! Every epoch the coordinator broadcasts `w`, all participants start a
//! sweep at the broadcast time, and the coordinator sums the updates that
//! arrive within `t_wait`. Late participants are interrupted when the next
//! broadcast lands: the steps they committed to `v_k` and their duals are
//! kept, their update of `w` is dropped and they continue from the new `w`.

mod delay;
mod sim;
mod trace;

pub use delay::{calibrate_t_wait, sample_compute_delay, DelayModel};
pub use delay::{DEFAULT_C_0, DEFAULT_C_D, DEFAULT_C_N, DEFAULT_C_ND};
pub use sim::{
    aggregate, participant_rng, run, run_global_baseline, run_local_baseline, run_simulation,
    EpochRecord, Mode, SimConfig, SimTrace, Simulation, Stream, TaskModel,
};
pub use trace::{write_trace_csv, CSV_HEADER};
