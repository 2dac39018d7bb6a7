//! Feedback-based quantum optimization on a state-vector simulator.
//!
//! The numerical core is generic over [`scalar::Real`] (`f32` or `f64`).
//! Dense eigensolves, estimators and the optimizer work in `f64`. The aliases
//! below fix the scalar to `f64`, which is what the command-line tool uses.

pub mod annealing;
pub mod dense;
pub mod error;
pub mod export;
pub mod falqon;
pub mod graphs;
pub mod hamiltonian;
pub mod measurement;
pub mod metrics;
pub mod qaoa;
pub mod scalar;
pub mod simulator;

pub use annealing::{compare_with_anneal, run_linear_anneal, time_to_threshold, AnnealComparison, AnnealConfig, Threshold};
pub use error::{Error, Result};
pub use falqon::{
    delta_t_bound, run_falqon, run_falqon_iterative, run_falqon_multidriver, run_falqon_reference, scan_critical_dt,
    FalqonConfig, FeedbackLaw, StopRule, TerminationReason,
};
pub use graphs::{brute_force_maxcut, Bitstring, Graph, MaxCutSolution};
pub use hamiltonian::{build_commutator_observable, operator_norms, DriverSpec, PauliString, PauliSum};
pub use measurement::{EstimatorConfig, EstimatorMode};
pub use metrics::{approximation_ratio, check_qlc_convergence_criteria, success_probability, CriteriaReport};
pub use qaoa::{bfgs_minimize, falqon_plus, multistart_qaoa, BfgsOptions, MultistartStats, OptResult, QaoaParams};
pub use scalar::Real;
pub use simulator::InitKind;

/// Double-precision state vector.
pub type StateVector = simulator::StateVector<f64>;
/// Double-precision problem diagonal.
pub type IsingDiagonal = hamiltonian::IsingDiagonal<f64>;
/// Double-precision feedback trace.
pub type FalqonTrace = falqon::FalqonTrace<f64>;
/// Double-precision per-driver history.
pub type DriverChannel = falqon::DriverChannel<f64>;
/// Complex amplitude in double precision.
pub type Amplitude = scalar::Amplitude<f64>;

/// Step found by the critical time-step scan on the five connected cubic
/// graphs with eight vertices (1000 layers, exact feedback).
pub const CALIBRATED_DT_CUBIC_8: f64 = 0.03;
