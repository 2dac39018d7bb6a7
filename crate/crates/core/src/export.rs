//! Plain-text tables for traces and optimizer logs.

use std::fmt::Write;

use crate::falqon::FalqonTrace;
use crate::qaoa::IterationRecord;
use crate::scalar::Real;

pub const TRACE_HEADER: &str = "layer,beta,A,E_p,r_A,phi,phi_inst";
pub const OPTIMIZER_HEADER: &str = "iter,energy,grad_norm,step";

/// One row per layer. `beta` is the applied control; `phi_inst` is empty
/// when it was not recorded.
pub fn trace_csv<T: Real>(trace: &FalqonTrace<T>) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for i in 0..trace.len() {
        let phi_inst = trace.phi_inst.as_ref().map(|p| p[i].to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            trace.layer(i),
            trace.applied[i],
            trace.a[i],
            trace.energy[i],
            trace.ratio[i],
            trace.phi[i],
            phi_inst
        );
    }
    out
}

pub fn optimizer_log_csv(log: &[IterationRecord]) -> String {
    let mut out = String::from(OPTIMIZER_HEADER);
    out.push('\n');
    for r in log {
        let _ = writeln!(out, "{},{},{},{}", r.iter, r.energy, r.grad_norm, r.step);
    }
    out
}
