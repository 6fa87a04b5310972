use std::io::Write;

use super::sim::SimTrace;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "epoch,virtual_time,responder_fraction,metric_name,task_id,value";

/// Writes one row per task metric, one `all` row with the mean metric and
/// one `all` row with the dual objective for every epoch.
pub fn write_trace_csv<W: Write>(trace: &SimTrace, out: &mut W) -> Result<()> {
    let io = |e: std::io::Error| Error::Io { path: "<trace>".into(), msg: e.to_string() };
    writeln!(out, "{CSV_HEADER}").map_err(io)?;
    for e in &trace.epochs {
        let prefix = format!("{},{},{}", e.epoch, e.virtual_time, e.responder_fraction);
        for (id, value) in trace.task_ids.iter().zip(&e.task_metrics) {
            writeln!(out, "{prefix},{},{id},{value}", trace.metric_name).map_err(io)?;
        }
        writeln!(out, "{prefix},{},all,{}", trace.metric_name, e.mean_metric).map_err(io)?;
        writeln!(out, "{prefix},dual_objective,all,{}", e.dual_objective).map_err(io)?;
    }
    Ok(())
}
