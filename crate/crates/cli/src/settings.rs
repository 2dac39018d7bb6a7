//! Flag/config-file merging and the per-command settings structs.
//!
//! Every settings struct is both a clap argument group and a serde type with
//! identical field names. A JSON config file supplies values for any field;
//! flags given on the command line (or through their env var) win.

use std::path::PathBuf;

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, ValueEnum};
use falqon_core::annealing::Threshold;
use falqon_core::falqon::{DtScanOptions, FalqonConfig, StopRule};
use falqon_core::measurement::{EstimatorConfig, EstimatorMode};
use falqon_core::qaoa::BfgsOptions;
use falqon_core::{Error, FeedbackLaw};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Overlays `file` onto the parsed `flags`, keeping every value that came
/// from the command line or the environment.
pub fn merge<S: Serialize + DeserializeOwned>(flags: &S, matches: &ArgMatches, file: Option<&Value>) -> anyhow::Result<S> {
    let Some(file) = file else {
        return Ok(serde_json::from_value(serde_json::to_value(flags)?)?);
    };
    let Value::Object(file) = file else {
        return Err(Error::Parameter("config file must hold a JSON object".into()).into());
    };
    let Value::Object(mut merged) = serde_json::to_value(flags)? else {
        unreachable!("settings serialize to objects");
    };
    for (key, value) in file {
        if !merged.contains_key(key) {
            return Err(Error::Parameter(format!("unknown config key `{key}`")).into());
        }
        let explicit = matches!(
            matches.value_source(key),
            Some(ValueSource::CommandLine) | Some(ValueSource::EnvVariable)
        );
        if !explicit {
            merged.insert(key.clone(), value.clone());
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| Error::Parameter(format!("config file: {e}")).into())
}

/// Settings as JSON, leaving out unset optional fields.
pub fn echo<S: Serialize>(settings: &S) -> Value {
    let mut v = serde_json::to_value(settings).unwrap_or(Value::Null);
    if let Value::Object(m) = &mut v {
        m.retain(|_, x| !x.is_null());
    }
    v
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct GraphSource {
    /// Edge-list file; repeat for an ensemble.
    #[arg(long)]
    #[serde(default)]
    pub graph: Vec<PathBuf>,
    /// Directory whose `*.edges` files form the ensemble (sorted by name).
    #[arg(long)]
    #[serde(default)]
    pub graph_dir: Option<PathBuf>,
    /// All nonisomorphic connected regular graphs, given as `N,D`.
    #[arg(long)]
    #[serde(default)]
    pub regular: Option<String>,
    /// Replace every weight with a uniform draw from (0, 1] using this seed.
    #[arg(long)]
    #[serde(default)]
    pub weights_seed: Option<u64>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct GenGraphs {
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    /// `all` enumerates every labeled graph; a number draws random graphs.
    #[arg(long, default_value = "all")]
    pub count: String,
    /// Keep one graph per isomorphism class.
    #[arg(long)]
    pub dedupe: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub weights_seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Exact,
    Multinomial,
    Pauli,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct Falqon {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value_t = falqon_core::CALIBRATED_DT_CUBIC_8)]
    pub dt: f64,
    #[arg(long, default_value_t = 1000)]
    pub layers: usize,
    /// Feedback gain `w` in `beta = -w A`.
    #[arg(long, default_value_t = 1.0)]
    pub gain: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta_init: f64,
    #[arg(long, value_enum, default_value_t = Estimator::Exact)]
    pub estimator: Estimator,
    /// Samples per estimate (per Pauli term for `pauli`).
    #[arg(long, default_value_t = 50)]
    pub shots: u64,
    /// Base estimator seed; realization `r` uses `seed + r`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub realizations: u64,
    /// Stop early once the energy plateaus.
    #[arg(long)]
    pub stop: bool,
    #[arg(long, default_value_t = StopRule::default().rel_tol)]
    pub stop_tol: f64,
    #[arg(long, default_value_t = StopRule::default().window)]
    pub stop_window: usize,
    /// Record the instantaneous ground-space population (n <= 12).
    #[arg(long)]
    pub phi_inst: bool,
}

impl Falqon {
    pub fn config(&self, realization: u64) -> FalqonConfig {
        let mode = match self.estimator {
            Estimator::Exact => EstimatorMode::Exact,
            Estimator::Multinomial => EstimatorMode::FullMultinomial { m: self.shots },
            Estimator::Pauli => EstimatorMode::PauliShots { m_per_term: self.shots },
        };
        FalqonConfig {
            beta_init: self.beta_init,
            law: FeedbackLaw::Linear { w: self.gain },
            estimator: EstimatorConfig { mode, seed: self.seed + realization },
            stop: self.stop.then_some(StopRule { rel_tol: self.stop_tol, window: self.stop_window }),
            record_phi_inst: self.phi_inst,
            ..FalqonConfig::fixed_length(self.dt, self.layers)
        }
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct FalqonIter {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value_t = falqon_core::CALIBRATED_DT_CUBIC_8)]
    pub dt: f64,
    /// Layers per pass, excluding layer 0.
    #[arg(long, default_value_t = 8000)]
    pub layers: usize,
    #[arg(long, default_value_t = 4)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1.0)]
    pub gain: f64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct Bfgs {
    #[arg(long, default_value_t = BfgsOptions::default().max_iters)]
    pub max_iters: usize,
    #[arg(long, default_value_t = BfgsOptions::default().grad_tol)]
    pub grad_tol: f64,
}

impl Bfgs {
    pub fn options(&self) -> BfgsOptions {
        BfgsOptions { max_iters: self.max_iters, grad_tol: self.grad_tol, ..BfgsOptions::default() }
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct FalqonPlus {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value_t = 10)]
    pub layers: usize,
    #[arg(long, default_value_t = falqon_core::CALIBRATED_DT_CUBIC_8)]
    pub dt: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub bfgs: Bfgs,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct Multistart {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value_t = 10)]
    pub layers: usize,
    #[arg(long, default_value_t = 20)]
    pub starts: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub bfgs: Bfgs,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct Anneal {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value_t = 10.0)]
    pub total_time: f64,
    #[arg(long, default_value_t = falqon_core::CALIBRATED_DT_CUBIC_8)]
    pub dt: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    Anneal,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct Compare {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: GraphSource,
    #[arg(long, value_enum, default_value_t = Baseline::Anneal)]
    pub against: Baseline,
    /// `rA=<value>` or `phi=<value>`.
    #[arg(long, default_value = "rA=0.932")]
    pub threshold: String,
    #[arg(long, default_value_t = falqon_core::CALIBRATED_DT_CUBIC_8)]
    pub dt: f64,
    #[arg(long, default_value_t = 1000)]
    pub layers: usize,
}

impl Compare {
    pub fn threshold(&self) -> falqon_core::Result<Threshold> {
        self.threshold.parse()
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct DtScan {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: GraphSource,
    #[arg(long, default_value_t = DtScanOptions::default().start)]
    pub start: f64,
    #[arg(long, default_value_t = DtScanOptions::default().layers)]
    pub layers: usize,
    #[arg(long, default_value_t = DtScanOptions::default().refine_steps)]
    pub refine_steps: usize,
    #[arg(long, default_value_t = DtScanOptions::default().tol)]
    pub tol: f64,
}

impl DtScan {
    pub fn options(&self) -> DtScanOptions {
        DtScanOptions { start: self.start, layers: self.layers, refine_steps: self.refine_steps, tol: self.tol }
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct Diagnose {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: GraphSource,
}

/// Parses a JSON config file.
pub fn load_config(path: &std::path::Path) -> anyhow::Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parameter(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parameter(format!("config {}: {e}", path.display())).into())
}
