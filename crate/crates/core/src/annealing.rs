//! Digitized linear annealing and the FALQON-vs-annealing comparison.
//!
//! A run of total time `T` uses `k = round(T / (2 dt))` steps. Step `m`
//! samples the schedule `u(t) = 1 - t/T` at the midpoint of its `2 dt` block,
//! `u_m = 1 - (m + 1/2)/k`, and applies `e^{-i (1-u_m) H_p dt}` followed by
//! `e^{-i u_m H_d dt}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::falqon::{run_falqon, FalqonConfig, FalqonTrace, Instance, TerminationReason};
use crate::graphs::Graph;
use crate::hamiltonian::{build_commutator_observable, DriverSpec};
use crate::metrics::{approximation_ratio, success_probability};
use crate::scalar::Real;
use crate::simulator::{InitKind, StateVector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Linear,
}

impl Schedule {
    /// Driver weight at time `t` of a run lasting `total`.
    pub fn u(&self, t: f64, total: f64) -> f64 {
        match self {
            Schedule::Linear => 1.0 - t / total,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub total_time: f64,
    pub dt: f64,
    #[serde(default)]
    pub schedule: Schedule,
}

impl AnnealConfig {
    pub fn linear(total_time: f64, dt: f64) -> Self {
        AnnealConfig { total_time, dt, schedule: Schedule::Linear }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite() && self.total_time.is_finite()) {
            return Err(Error::param(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.total_time >= self.dt) {
            return Err(Error::param(format!("total time {} is shorter than dt {}", self.total_time, self.dt)));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.total_time / (2.0 * self.dt)).round() as usize).max(1)
    }

    /// Midpoint schedule value of step `m` (0-based).
    pub fn u_at(&self, m: usize) -> f64 {
        let k = self.steps() as f64;
        self.schedule.u((m as f64 + 0.5) / k * self.total_time, self.total_time)
    }
}

/// Runs the anneal from the driver ground state. The returned trace stores
/// `u_m` in `beta` and `applied`, and `<i[H_d, H_p]>` in `a`.
pub fn run_linear_anneal<T: Real>(graph: &Graph, config: &AnnealConfig) -> Result<FalqonTrace<T>> {
    config.validate()?;
    let inst = Instance::<T>::new(graph)?;
    let obs = build_commutator_observable(graph, &DriverSpec::SumX)?;
    let mut state = StateVector::<T>::new(graph.n(), InitKind::DriverGround)?;
    let initial_energy = state.expectation_diagonal(&inst.diag)?;
    let steps = config.steps();
    let dt = T::of(config.dt);
    let e_min = inst.min_energy();
    let mut trace = FalqonTrace {
        dt: config.dt,
        first_layer: 1,
        beta: Vec::with_capacity(steps),
        applied: Vec::with_capacity(steps),
        a: Vec::with_capacity(steps),
        energy: Vec::with_capacity(steps),
        ratio: Vec::with_capacity(steps),
        phi: Vec::with_capacity(steps),
        phi_inst: None,
        channels: Vec::new(),
        final_state: state.clone(),
        terminated_at: steps,
        termination_reason: TerminationReason::MaxLayers,
        initial_energy,
    };
    for m in 0..steps {
        let u = T::of(config.u_at(m));
        state.apply_problem_phase(&inst.diag, (T::one() - u) * dt)?;
        state.apply_sum_x_rotation(u * dt);
        let energy = state.expectation_diagonal(&inst.diag)?;
        trace.beta.push(u);
        trace.applied.push(u);
        trace.a.push(state.expectation_pauli_sum(&obs)?);
        trace.energy.push(energy);
        trace.ratio.push(approximation_ratio(energy, e_min)?);
        trace.phi.push(success_probability(&state, &inst.solution)?);
    }
    trace.final_state = state;
    Ok(trace)
}

/// Stopping criterion for [`time_to_threshold`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", content = "value", rename_all = "snake_case")]
pub enum Threshold {
    Ratio(f64),
    Phi(f64),
}

impl FromStr for Threshold {
    type Err = Error;

    /// Parses `rA=0.932` or `phi=0.25`.
    fn from_str(s: &str) -> Result<Self> {
        let (key, val) = s
            .split_once('=')
            .ok_or_else(|| Error::param(format!("threshold `{s}` is not of the form metric=value")))?;
        let v: f64 = val.trim().parse().map_err(|_| Error::param(format!("bad threshold value `{val}`")))?;
        match key.trim() {
            "rA" | "r_A" | "ratio" => Ok(Threshold::Ratio(v)),
            "phi" => Ok(Threshold::Phi(v)),
            other => Err(Error::param(format!("unknown threshold metric `{other}`"))),
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Ratio(v) => write!(f, "rA={v}"),
            Threshold::Phi(v) => write!(f, "phi={v}"),
        }
    }
}

/// Index of the first trace entry meeting `criterion`.
pub fn first_crossing<T: Real>(trace: &FalqonTrace<T>, criterion: Threshold) -> Option<usize> {
    let (series, theta) = match criterion {
        Threshold::Ratio(t) => (&trace.ratio, t),
        Threshold::Phi(t) => (&trace.phi, t),
    };
    series.iter().position(|v| v.as_f64() >= theta)
}

/// Digitized time `2 k dt` of the first layer `k` (counted from 1) meeting
/// `criterion`, or `None` if it is never met.
pub fn time_to_threshold<T: Real>(trace: &FalqonTrace<T>, criterion: Threshold) -> Option<f64> {
    first_crossing(trace, criterion).map(|i| 2.0 * (i + 1) as f64 * trace.dt)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealComparison {
    pub threshold: Threshold,
    /// Digitized time at which FALQON first meets the threshold.
    pub total_time: f64,
    pub layers: usize,
    pub falqon_ratio: f64,
    pub falqon_phi: f64,
    pub anneal_ratio: f64,
    pub anneal_phi: f64,
    pub falqon_ratio_curve: Vec<f64>,
    pub anneal_ratio_curve: Vec<f64>,
}

/// Runs FALQON until `threshold` is met, then a linear anneal of the same
/// total time and step. Returns `None` when FALQON never meets the threshold
/// within `config.max_layers`.
pub fn compare_with_anneal(graph: &Graph, config: &FalqonConfig, threshold: Threshold) -> Result<Option<AnnealComparison>> {
    let fconf = FalqonConfig { stop: None, ..config.clone() };
    let trace = run_falqon::<f64>(graph, &fconf)?;
    let Some(i) = first_crossing(&trace, threshold) else {
        return Ok(None);
    };
    let total_time = 2.0 * (i + 1) as f64 * config.dt;
    let anneal = run_linear_anneal::<f64>(graph, &AnnealConfig::linear(total_time, config.dt))?;
    Ok(Some(AnnealComparison {
        threshold,
        total_time,
        layers: i + 1,
        falqon_ratio: trace.ratio[i],
        falqon_phi: trace.phi[i],
        anneal_ratio: anneal.final_ratio(),
        anneal_phi: anneal.final_phi(),
        falqon_ratio_curve: trace.ratio[..=i].to_vec(),
        anneal_ratio_curve: anneal.ratio,
    }))
}
