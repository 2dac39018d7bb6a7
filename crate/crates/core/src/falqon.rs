//! The feedback loop and its extensions.
//!
//! Each layer applies `U_d(beta_k) U_p = e^{-i beta_k H_d dt} e^{-i H_p dt}` to
//! the running state, measures `A_k = <i [H_d, H_p]>`, and sets the next
//! control from the feedback law `beta_{k+1} = -w A_k`. With exact
//! estimation and a small enough `dt` the problem energy never increases.
//!
//! The state is carried forward between layers rather than re-prepared from
//! `|psi_0>` each time; in exact mode the two are identical and sampling noise
//! only enters through the estimate of `A_k`.
//!
//! Indexing: the base loop labels layers `1..=L`. Reference-perturbed and
//! iterative runs label them `0..=L` so that every layer has a `nu_k`/`beta_k`
//! slot, including the first.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{brute_force_maxcut, Graph, MaxCutSolution};
use crate::hamiltonian::{build_commutator_observable, build_problem_diagonal, operator_norms, DriverSpec, IsingDiagonal};
use crate::measurement::{EstimatorConfig, ObservableEstimator};
use crate::metrics::{approximation_ratio, instantaneous_overlap_diag, success_probability, DEFAULT_GROUND_TOL};
use crate::scalar::Real;
use crate::simulator::{InitKind, StateVector};

/// Feedback law `beta = -w f(A)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeedbackLaw {
    /// `f(A) = A`.
    Linear { w: f64 },
}

impl FeedbackLaw {
    pub fn control<T: Real>(&self, a: T) -> T {
        match *self {
            FeedbackLaw::Linear { w } => -T::of(w) * a,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            FeedbackLaw::Linear { w } if w > 0.0 && w.is_finite() => Ok(()),
            FeedbackLaw::Linear { w } => Err(Error::param(format!("feedback gain must be positive, got {w}"))),
        }
    }
}

impl Default for FeedbackLaw {
    fn default() -> Self {
        FeedbackLaw::Linear { w: 1.0 }
    }
}

/// Early termination when `|E_k - E_{k-window}| < rel_tol * ||H_p||`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub rel_tol: f64,
    pub window: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { rel_tol: 1e-6, window: 10 }
    }
}

/// Serializable initial-state choice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    DriverGround,
    UniformPlus,
    BasisState(usize),
}

impl From<InitialState> for InitKind {
    fn from(s: InitialState) -> Self {
        match s {
            InitialState::DriverGround => InitKind::DriverGround,
            InitialState::UniformPlus => InitKind::UniformPlus,
            InitialState::BasisState(z) => InitKind::BasisState(z),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalqonConfig {
    pub dt: f64,
    pub max_layers: usize,
    #[serde(default)]
    pub beta_init: f64,
    #[serde(default)]
    pub law: FeedbackLaw,
    /// Reference perturbation `lambda_0..=lambda_L`, used by the reference runner.
    #[serde(default)]
    pub reference: Option<Vec<f64>>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub stop: Option<StopRule>,
    #[serde(default)]
    pub initial: InitialState,
    /// Record the instantaneous ground-space population each layer (n <= 12).
    #[serde(default)]
    pub record_phi_inst: bool,
}

impl FalqonConfig {
    /// Exact estimator, unit gain, `beta_1 = 0`, default stop rule.
    pub fn new(dt: f64, max_layers: usize) -> Self {
        FalqonConfig {
            dt,
            max_layers,
            beta_init: 0.0,
            law: FeedbackLaw::default(),
            reference: None,
            estimator: EstimatorConfig::exact(),
            stop: Some(StopRule::default()),
            initial: InitialState::DriverGround,
            record_phi_inst: false,
        }
    }

    /// Same as [`FalqonConfig::new`] but always runs `max_layers` layers.
    pub fn fixed_length(dt: f64, max_layers: usize) -> Self {
        FalqonConfig { stop: None, ..FalqonConfig::new(dt, max_layers) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param(format!("dt must be positive, got {}", self.dt)));
        }
        if self.max_layers == 0 {
            return Err(Error::param("max_layers must be at least 1"));
        }
        if !self.beta_init.is_finite() {
            return Err(Error::param("beta_init must be finite"));
        }
        if let Some(stop) = &self.stop {
            if stop.window == 0 || !(stop.rel_tol >= 0.0) {
                return Err(Error::param("stop rule needs window >= 1 and rel_tol >= 0"));
            }
        }
        self.law.validate()?;
        self.estimator.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    MaxLayers,
    Converged,
}

/// Control and signal history of one driver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriverChannel<T> {
    pub beta: Vec<T>,
    pub a: Vec<T>,
}

/// Per-layer record of a run. All per-layer vectors share one length.
#[derive(Clone, Debug, PartialEq)]
pub struct FalqonTrace<T> {
    /// Time step of every layer.
    pub dt: f64,
    /// Label of the first layer: 1 for the base loop, 0 for reference and
    /// iterative runs.
    pub first_layer: usize,
    /// Feedback control `beta_k` of the (first) driver.
    pub beta: Vec<T>,
    /// Angle multiplier actually applied, `nu_k = lambda_k + beta_k`; equals
    /// `beta` without a reference perturbation.
    pub applied: Vec<T>,
    /// Feedback signal `A_k` measured after layer `k`.
    pub a: Vec<T>,
    pub energy: Vec<T>,
    pub ratio: Vec<T>,
    pub phi: Vec<T>,
    pub phi_inst: Option<Vec<f64>>,
    /// Per-driver histories for multi-driver runs, empty otherwise.
    pub channels: Vec<DriverChannel<T>>,
    pub final_state: StateVector<T>,
    pub terminated_at: usize,
    pub termination_reason: TerminationReason,
    pub initial_energy: T,
}

impl<T: Real> FalqonTrace<T> {
    pub fn len(&self) -> usize {
        self.energy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energy.is_empty()
    }

    /// Layer label of entry `i`.
    pub fn layer(&self, i: usize) -> usize {
        self.first_layer + i
    }

    pub fn final_energy(&self) -> T {
        *self.energy.last().expect("trace has at least one layer")
    }

    pub fn final_ratio(&self) -> T {
        *self.ratio.last().expect("trace has at least one layer")
    }

    pub fn final_phi(&self) -> T {
        *self.phi.last().expect("trace has at least one layer")
    }

    /// Indices `i` with `energy[i] > energy[i-1] + tol`, counting the initial
    /// energy as entry `-1`.
    pub fn monotonicity_violations(&self, tol: T) -> Vec<usize> {
        let mut prev = self.initial_energy;
        let mut out = Vec::new();
        for (i, &e) in self.energy.iter().enumerate() {
            if e > prev + tol {
                out.push(i);
            }
            prev = e;
        }
        out
    }
}

/// Problem data shared by all runners.
pub struct Instance<T> {
    pub graph: Graph,
    pub diag: IsingDiagonal<T>,
    pub solution: MaxCutSolution,
    pub diag_f64: Vec<f64>,
    pub n_p: f64,
}

impl<T: Real> Instance<T> {
    pub fn new(graph: &Graph) -> Result<Self> {
        let diag_f64 = build_problem_diagonal::<f64>(graph)?;
        let solution = brute_force_maxcut(graph)?;
        Ok(Instance {
            graph: graph.clone(),
            diag: IsingDiagonal::from_values(graph.n(), diag_f64.values().iter().map(|&v| T::of(v)).collect())?,
            solution,
            n_p: diag_f64.max_abs(),
            diag_f64: diag_f64.values().to_vec(),
        })
    }

    pub fn min_energy(&self) -> T {
        T::of(self.solution.min_energy)
    }
}

struct Channel {
    driver: DriverSpec,
    law: FeedbackLaw,
    estimator: ObservableEstimator,
}

/// Core loop shared by every runner.
fn run_loop<T: Real>(
    inst: &Instance<T>,
    channels: &[Channel],
    config: &FalqonConfig,
    psi0: StateVector<T>,
    reference: Option<&[f64]>,
    first_layer: usize,
    layers: usize,
    stop: Option<StopRule>,
) -> Result<FalqonTrace<T>> {
    let dt = T::of(config.dt);
    let e_min = inst.min_energy();
    let mut state = psi0;
    let initial_energy = state.expectation_diagonal(&inst.diag)?;
    let mut betas: Vec<T> = vec![T::of(config.beta_init); channels.len()];
    let n_ch = channels.len() as u64;

    let mut trace = FalqonTrace {
        dt: config.dt,
        first_layer,
        beta: Vec::with_capacity(layers),
        applied: Vec::with_capacity(layers),
        a: Vec::with_capacity(layers),
        energy: Vec::with_capacity(layers),
        ratio: Vec::with_capacity(layers),
        phi: Vec::with_capacity(layers),
        phi_inst: config.record_phi_inst.then(Vec::new),
        channels: if channels.len() > 1 {
            vec![DriverChannel { beta: Vec::new(), a: Vec::new() }; channels.len()]
        } else {
            Vec::new()
        },
        final_state: state.clone(),
        terminated_at: first_layer,
        termination_reason: TerminationReason::MaxLayers,
        initial_energy,
    };

    for i in 0..layers {
        let label = first_layer + i;
        let lambda = reference.map_or(T::zero(), |r| T::of(r[i]));
        state.apply_problem_phase(&inst.diag, dt)?;
        for (ch, beta) in channels.iter().zip(&betas) {
            let nu = if std::ptr::eq(ch, &channels[0]) { lambda + *beta } else { *beta };
            state.apply_driver(&ch.driver, nu * dt)?;
        }
        let mut signals = Vec::with_capacity(channels.len());
        for (j, ch) in channels.iter().enumerate() {
            let a = ch.estimator.estimate(&state, label as u64 * n_ch + j as u64)?;
            if !a.is_finite() {
                return Err(Error::Numerical(format!("non-finite feedback signal at layer {label}")));
            }
            signals.push(a);
        }
        let energy = state.expectation_diagonal(&inst.diag)?;
        trace.beta.push(betas[0]);
        trace.applied.push(lambda + betas[0]);
        trace.a.push(signals[0]);
        trace.energy.push(energy);
        trace.ratio.push(approximation_ratio(energy, e_min)?);
        trace.phi.push(success_probability(&state, &inst.solution)?);
        if let Some(p) = trace.phi_inst.as_mut() {
            p.push(instantaneous_overlap_diag(&state, &inst.diag_f64, (lambda + betas[0]).as_f64(), DEFAULT_GROUND_TOL)?);
        }
        for (k, ch) in trace.channels.iter_mut().enumerate() {
            ch.beta.push(betas[k]);
            ch.a.push(signals[k]);
        }
        for (k, ch) in channels.iter().enumerate() {
            betas[k] = ch.law.control(signals[k]);
        }
        trace.terminated_at = label;

        if let Some(rule) = stop {
            let len = trace.energy.len();
            if len > rule.window {
                let delta = (trace.energy[len - 1] - trace.energy[len - 1 - rule.window]).abs();
                if delta.as_f64() < rule.rel_tol * inst.n_p {
                    trace.termination_reason = TerminationReason::Converged;
                    break;
                }
            }
        }
    }
    trace.final_state = state;
    Ok(trace)
}

fn single_channel(graph: &Graph, driver: DriverSpec, law: FeedbackLaw, estimator: EstimatorConfig) -> Result<Vec<Channel>> {
    let obs = build_commutator_observable(graph, &driver)?;
    Ok(vec![Channel { driver, law, estimator: ObservableEstimator::new(&obs, estimator)? }])
}

/// The base feedback loop with the `sum_j X_j` driver.
pub fn run_falqon<T: Real>(graph: &Graph, config: &FalqonConfig) -> Result<FalqonTrace<T>> {
    let psi0 = StateVector::new(graph.n(), config.initial.into())?;
    run_falqon_from(graph, config, psi0)
}

/// The base loop from an explicit initial state.
pub fn run_falqon_from<T: Real>(graph: &Graph, config: &FalqonConfig, psi0: StateVector<T>) -> Result<FalqonTrace<T>> {
    config.validate()?;
    let inst = Instance::new(graph)?;
    let channels = single_channel(graph, DriverSpec::SumX, config.law, config.estimator)?;
    run_loop(&inst, &channels, config, psi0, None, 1, config.max_layers, config.stop)
}

/// Feedback with a reference perturbation: layer `k` in `0..=L` applies
/// `nu_k = lambda_k + beta_k` while the law still sets `beta_{k+1} = -w A_k`.
/// The schedule comes from `config.reference` and must have `L + 1` entries.
pub fn run_falqon_reference<T: Real>(graph: &Graph, config: &FalqonConfig) -> Result<FalqonTrace<T>> {
    config.validate()?;
    let reference = config
        .reference
        .as_deref()
        .ok_or_else(|| Error::param("reference run requires a reference schedule"))?;
    if reference.len() != config.max_layers + 1 {
        return Err(Error::param(format!(
            "reference schedule has {} entries, expected max_layers + 1 = {}",
            reference.len(),
            config.max_layers + 1
        )));
    }
    if reference.iter().any(|l| !l.is_finite()) {
        return Err(Error::param("reference schedule must be finite"));
    }
    if let Some(&last) = reference.last() {
        let peak = reference.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        if last.abs() > 0.01 * peak.max(f64::MIN_POSITIVE) {
            warn!("reference perturbation ends at {last}, not near zero");
        }
    }
    let inst = Instance::new(graph)?;
    let channels = single_channel(graph, DriverSpec::SumX, config.law, config.estimator)?;
    let psi0 = StateVector::new(graph.n(), config.initial.into())?;
    run_loop(&inst, &channels, config, psi0, Some(reference), 0, reference.len(), config.stop)
}

/// Iterative refinement: iteration 0 is the base loop over layers `0..=L`;
/// iteration `j` uses the previous applied schedule as its reference, so its
/// applied schedule is `beta^(j) = beta^(j-1) + beta~^(j)`. Early stopping is
/// disabled so every iteration has the same depth.
pub fn run_falqon_iterative<T: Real>(graph: &Graph, config: &FalqonConfig, iterations: usize) -> Result<Vec<FalqonTrace<T>>> {
    if iterations == 0 {
        return Err(Error::param("iterations must be at least 1"));
    }
    config.validate()?;
    let inst = Instance::new(graph)?;
    let channels = single_channel(graph, DriverSpec::SumX, config.law, config.estimator)?;
    let layers = config.max_layers + 1;
    let psi0 = StateVector::new(graph.n(), config.initial.into())?;
    let mut traces: Vec<FalqonTrace<T>> = Vec::with_capacity(iterations);
    traces.push(run_loop(&inst, &channels, config, psi0.clone(), None, 0, layers, None)?);
    let corrections = FalqonConfig { beta_init: 0.0, ..config.clone() };
    for j in 1..iterations {
        let reference: Vec<f64> = traces[j - 1].applied.iter().map(|b| b.as_f64()).collect();
        let trace = run_loop(&inst, &channels, &corrections, psi0.clone(), Some(&reference), 0, layers, None)?;
        let peak = trace.applied.iter().fold(0.0f64, |m, b| m.max(b.as_f64().abs()));
        let tail = trace.applied.last().map_or(0.0, |b| b.as_f64().abs());
        if tail > 0.01 * peak {
            warn!("iteration {j}: final control {tail:.3e} is not small relative to peak {peak:.3e}; terminal-energy monotonicity is not guaranteed");
        }
        traces.push(trace);
    }
    Ok(traces)
}

/// Multiple drivers with unit-gain laws from `config.law`.
pub fn run_falqon_multidriver<T: Real>(graph: &Graph, drivers: &[DriverSpec], config: &FalqonConfig) -> Result<FalqonTrace<T>> {
    let channels: Vec<(DriverSpec, FeedbackLaw)> = drivers.iter().map(|d| (d.clone(), config.law)).collect();
    run_falqon_multidriver_laws(graph, &channels, config)
}

/// Multiple drivers, each with its own feedback law. Each layer applies
/// `U_p` followed by every driver in order; driver `j` gets
/// `beta(j, k+1) = -w_j A(j, k)`.
pub fn run_falqon_multidriver_laws<T: Real>(
    graph: &Graph,
    drivers: &[(DriverSpec, FeedbackLaw)],
    config: &FalqonConfig,
) -> Result<FalqonTrace<T>> {
    if drivers.is_empty() {
        return Err(Error::param("at least one driver is required"));
    }
    config.validate()?;
    let inst = Instance::new(graph)?;
    let mut channels = Vec::with_capacity(drivers.len());
    for (j, (driver, law)) in drivers.iter().enumerate() {
        law.validate()?;
        driver.to_pauli_sum(graph.n())?;
        let obs = build_commutator_observable(graph, driver)?;
        let est = EstimatorConfig { seed: config.estimator.seed.wrapping_add(j as u64), ..config.estimator };
        channels.push(Channel { driver: driver.clone(), law: *law, estimator: ObservableEstimator::new(&obs, est)? });
    }
    let psi0 = StateVector::new(graph.n(), config.initial.into())?;
    run_loop(&inst, &channels, config, psi0, None, 1, config.max_layers, config.stop)
}

/// Largest `dt` for which a single layer is guaranteed to lower the energy:
/// `|A| / (2 (2 n_d n_p + |A|) (n_p + n_d |beta|))`.
pub fn delta_t_bound(a: f64, beta: f64, n_p: f64, n_d: f64) -> Result<f64> {
    if !(n_p > 0.0 && n_d > 0.0) {
        return Err(Error::param(format!("operator norms must be positive, got n_p = {n_p}, n_d = {n_d}")));
    }
    if !(a.is_finite() && beta.is_finite()) {
        return Err(Error::param("non-finite signal or control"));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    Ok(a.abs() / (2.0 * (2.0 * n_d * n_p + a.abs()) * (n_p + n_d * beta.abs())))
}

/// Norms for the standard driver on `graph`.
pub fn standard_norms(graph: &Graph) -> Result<(f64, f64)> {
    operator_norms(graph, &DriverSpec::SumX)
}

/// Options for the critical time-step scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtScanOptions {
    pub start: f64,
    pub layers: usize,
    /// Bisection steps after the doubling/halving bracket is found.
    pub refine_steps: usize,
    /// Energy increases at or below `tol * ||H_p||` are treated as round-off.
    pub tol: f64,
}

impl Default for DtScanOptions {
    fn default() -> Self {
        DtScanOptions { start: 0.01, layers: 1000, refine_steps: 8, tol: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtScanResult {
    /// Largest tested `dt` keeping every instance monotone.
    pub dt_critical: f64,
    /// Smallest tested `dt` producing a violation.
    pub dt_failing: f64,
    /// `(dt, all_monotone)` for every probe, in evaluation order.
    pub probes: Vec<(f64, bool)>,
}

/// True when every instance keeps `E_p` non-increasing for `layers` layers.
pub fn is_monotone_for_all(graphs: &[Graph], dt: f64, layers: usize, tol: f64) -> Result<bool> {
    use rayon::prelude::*;
    let results: Result<Vec<bool>> = graphs
        .par_iter()
        .map(|g| {
            let trace = run_falqon::<f64>(g, &FalqonConfig::fixed_length(dt, layers))?;
            let (n_p, _) = standard_norms(g)?;
            Ok(trace.monotonicity_violations(tol * n_p).is_empty())
        })
        .collect();
    Ok(results?.into_iter().all(|ok| ok))
}

/// Finds the critical time step: doubles or halves from `start` until the
/// monotone/non-monotone boundary is bracketed, then bisects.
pub fn scan_critical_dt(graphs: &[Graph], opts: &DtScanOptions) -> Result<DtScanResult> {
    if graphs.is_empty() {
        return Err(Error::param("dt scan needs at least one instance"));
    }
    if !(opts.start > 0.0) || opts.layers == 0 {
        return Err(Error::param("dt scan needs a positive start and at least one layer"));
    }
    let mut probes = Vec::new();
    let mut probe = |dt: f64| -> Result<bool> {
        let ok = is_monotone_for_all(graphs, dt, opts.layers, opts.tol)?;
        probes.push((dt, ok));
        Ok(ok)
    };
    let (mut good, mut bad);
    let mut dt = opts.start;
    if probe(dt)? {
        good = dt;
        loop {
            dt *= 2.0;
            if !probe(dt)? {
                bad = dt;
                break;
            }
            good = dt;
            if dt > 1e3 {
                return Err(Error::Numerical("dt scan found no violation below dt = 1e3".into()));
            }
        }
    } else {
        bad = dt;
        loop {
            dt /= 2.0;
            if probe(dt)? {
                good = dt;
                break;
            }
            bad = dt;
            if dt < 1e-8 {
                return Err(Error::Numerical("dt scan found no monotone dt above 1e-8".into()));
            }
        }
    }
    for _ in 0..opts.refine_steps {
        let mid = 0.5 * (good + bad);
        if probe(mid)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(DtScanResult { dt_critical: good, dt_failing: bad, probes })
}
