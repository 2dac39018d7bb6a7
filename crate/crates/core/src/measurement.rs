//! Estimators for observable expectations under finite sampling.
//!
//! Three modes are available:
//!
//! * `Exact`: the noiseless expectation value.
//! * `PauliShots`: each Pauli term is measured separately with a fixed number
//!   of shots; a `+-1` outcome distribution makes each term a scaled binomial.
//! * `FullMultinomial`: the whole observable is measured in its eigenbasis and
//!   `m` eigenvalue outcomes are drawn from the Born distribution. This needs a
//!   dense eigendecomposition and is limited to 14 qubits.
//!
//! Every sampling call draws from its own ChaCha stream selected by the
//! caller-supplied ordinal, so ensemble runs are reproducible regardless of
//! scheduling.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{check_capacity, Error, Result};
use crate::hamiltonian::PauliSum;
use crate::scalar::Real;
use crate::simulator::StateVector;

/// Largest qubit count for the full-observable multinomial model.
pub const MULTINOMIAL_LIMIT: usize = 14;

/// Eigenvalues closer than this are merged into one measurement outcome.
const LEVEL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EstimatorMode {
    Exact,
    PauliShots { m_per_term: u64 },
    FullMultinomial { m: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub mode: EstimatorMode,
    pub seed: u64,
}

impl EstimatorConfig {
    pub fn exact() -> Self {
        EstimatorConfig { mode: EstimatorMode::Exact, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            EstimatorMode::PauliShots { m_per_term: 0 } | EstimatorMode::FullMultinomial { m: 0 } => {
                Err(Error::param("sample count must be at least 1"))
            }
            _ => Ok(()),
        }
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig::exact()
    }
}

/// Eigenbasis of an observable grouped into distinct outcome levels.
#[derive(Clone, Debug)]
struct Eigenbasis {
    levels: Vec<f64>,
    /// Level index of each eigenvector.
    level_of: Vec<usize>,
    /// Rows are conjugated eigenvectors, so `adjoint * psi` gives overlaps.
    adjoint: DMatrix<Complex64>,
}

/// An estimator bound to one observable. Reuse it across layers so the
/// eigendecomposition for `FullMultinomial` is computed once.
#[derive(Clone, Debug)]
pub struct ObservableEstimator {
    obs: PauliSum,
    config: EstimatorConfig,
    basis: Option<Eigenbasis>,
}

impl ObservableEstimator {
    pub fn new(obs: &PauliSum, config: EstimatorConfig) -> Result<Self> {
        config.validate()?;
        let basis = match config.mode {
            EstimatorMode::FullMultinomial { .. } => {
                check_capacity("full multinomial estimator", obs.n(), MULTINOMIAL_LIMIT)?;
                Some(eigenbasis(obs)?)
            }
            _ => None,
        };
        Ok(ObservableEstimator { obs: obs.clone(), config, basis })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn observable(&self) -> &PauliSum {
        &self.obs
    }

    /// Estimates `<psi|obs|psi>` using RNG stream `ordinal`.
    pub fn estimate<T: Real>(&self, state: &StateVector<T>, ordinal: u64) -> Result<T> {
        if state.n() != self.obs.n() {
            return Err(Error::param(format!(
                "dimension mismatch: state has {} qubits, observable {}",
                state.n(),
                self.obs.n()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(ordinal);
        match self.config.mode {
            EstimatorMode::Exact => state.expectation_pauli_sum(&self.obs),
            EstimatorMode::PauliShots { m_per_term } => {
                let mut acc = 0.0;
                for (c, p) in self.obs.terms() {
                    let exact = state.expectation_pauli_string(p)?.re.as_f64();
                    if p.is_identity() {
                        acc += c * exact;
                        continue;
                    }
                    let prob = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
                    let hits = Binomial::new(m_per_term, prob)
                        .map_err(|e| Error::Numerical(format!("binomial({m_per_term}, {prob}): {e}")))?
                        .sample(&mut rng);
                    acc += c * (2.0 * hits as f64 / m_per_term as f64 - 1.0);
                }
                Ok(T::of(acc))
            }
            EstimatorMode::FullMultinomial { m } => {
                let basis = self.basis.as_ref().expect("eigenbasis prepared for multinomial mode");
                let probs = level_probabilities(basis, state);
                Ok(T::of(sample_mean(&basis.levels, &probs, m, &mut rng)))
            }
        }
    }
}

fn eigenbasis(obs: &PauliSum) -> Result<Eigenbasis> {
    let m = dense::pauli_sum(obs)?;
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut levels: Vec<f64> = Vec::new();
    let mut level_of = vec![0; order.len()];
    for &i in &order {
        let val = eig.eigenvalues[i];
        if !val.is_finite() {
            return Err(Error::Numerical("non-finite eigenvalue of observable".into()));
        }
        match levels.last() {
            Some(&last) if (val - last).abs() <= LEVEL_TOL => {}
            _ => levels.push(val),
        }
        level_of[i] = levels.len() - 1;
    }
    Ok(Eigenbasis { levels, level_of, adjoint: eig.eigenvectors.adjoint() })
}

fn level_probabilities<T: Real>(basis: &Eigenbasis, state: &StateVector<T>) -> Vec<f64> {
    let psi = DVector::from_iterator(
        state.dim(),
        state.amplitudes().iter().map(|a| Complex64::new(a.re.as_f64(), a.im.as_f64())),
    );
    let overlaps = &basis.adjoint * psi;
    let mut probs = vec![0.0; basis.levels.len()];
    for (i, o) in overlaps.iter().enumerate() {
        probs[basis.level_of[i]] += o.norm_sqr();
    }
    probs
}

/// Mean of `m` categorical draws over `values` with weights `probs`.
fn sample_mean(values: &[f64], probs: &[f64], m: u64, rng: &mut ChaCha8Rng) -> f64 {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let mut sum = 0.0;
    for _ in 0..m {
        let u = rng.random::<f64>() * total;
        let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        sum += values[k];
    }
    sum / m as f64
}

/// One-shot convenience wrapper around [`ObservableEstimator`].
pub fn estimate_observable<T: Real>(
    state: &StateVector<T>,
    obs: &PauliSum,
    config: &EstimatorConfig,
    ordinal: u64,
) -> Result<T> {
    ObservableEstimator::new(obs, *config)?.estimate(state, ordinal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::Graph;
    use crate::hamiltonian::{build_commutator_observable, build_problem_diagonal, DriverSpec};
    use crate::simulator::InitKind;

    fn evolved_triangle() -> (StateVector<f64>, PauliSum) {
        let g = Graph::complete(3).unwrap();
        let d = build_problem_diagonal(&g).unwrap();
        let mut s = StateVector::new(3, InitKind::DriverGround).unwrap();
        s.apply_layer(&d, 0.0, 0.4, &DriverSpec::SumX).unwrap();
        s.apply_layer(&d, 0.7, 0.4, &DriverSpec::SumX).unwrap();
        (s, build_commutator_observable(&g, &DriverSpec::SumX).unwrap())
    }

    fn std_dev(xs: &[f64]) -> f64 {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
    }

    #[test]
    fn exact_mode_matches_expectation() {
        let (s, obs) = evolved_triangle();
        let e = estimate_observable(&s, &obs, &EstimatorConfig::exact(), 0).unwrap();
        assert_eq!(e, s.expectation_pauli_sum(&obs).unwrap());
    }

    #[test]
    fn eigenstate_has_zero_variance() {
        let p = "ZZ".parse().unwrap();
        let obs = PauliSum::new(2, [(1.5, p)]).unwrap();
        let s = StateVector::<f64>::new(2, InitKind::BasisState(0b01)).unwrap();
        let est = ObservableEstimator::new(&obs, EstimatorConfig { mode: EstimatorMode::FullMultinomial { m: 3 }, seed: 1 }).unwrap();
        for k in 0..20 {
            assert!((est.estimate(&s, k).unwrap() + 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_zero_samples_and_capacity() {
        let (_, obs) = evolved_triangle();
        let cfg = EstimatorConfig { mode: EstimatorMode::FullMultinomial { m: 0 }, seed: 0 };
        assert!(ObservableEstimator::new(&obs, cfg).is_err());
        let big = build_commutator_observable(&Graph::cycle(15).unwrap(), &DriverSpec::SumX).unwrap();
        let cfg = EstimatorConfig { mode: EstimatorMode::FullMultinomial { m: 5 }, seed: 0 };
        assert!(matches!(ObservableEstimator::new(&big, cfg), Err(Error::Capacity { .. })));
    }

    #[test]
    fn deterministic_under_seed() {
        let (s, obs) = evolved_triangle();
        for mode in [EstimatorMode::PauliShots { m_per_term: 7 }, EstimatorMode::FullMultinomial { m: 7 }] {
            let est = ObservableEstimator::new(&obs, EstimatorConfig { mode, seed: 5 }).unwrap();
            let a: Vec<f64> = (0..10).map(|k| est.estimate(&s, k).unwrap()).collect();
            let b: Vec<f64> = (0..10).map(|k| est.estimate(&s, k).unwrap()).collect();
            assert_eq!(a, b);
            assert!(a.windows(2).any(|w| w[0] != w[1]));
        }
    }

    #[test]
    fn multinomial_variance_scales_with_samples() {
        // Frozen from 10^3 repetitions: sd(m=20)/sd(m=5) should be near 0.5.
        let (s, obs) = evolved_triangle();
        let sd = |m: u64| {
            let est = ObservableEstimator::new(&obs, EstimatorConfig { mode: EstimatorMode::FullMultinomial { m }, seed: 17 }).unwrap();
            let xs: Vec<f64> = (0..1000).map(|k| est.estimate(&s, k).unwrap()).collect();
            std_dev(&xs)
        };
        let ratio = sd(20) / sd(5);
        assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn large_sample_limit_approaches_exact() {
        let (s, obs) = evolved_triangle();
        let exact = s.expectation_pauli_sum(&obs).unwrap();
        for mode in [EstimatorMode::PauliShots { m_per_term: 100_000 }, EstimatorMode::FullMultinomial { m: 100_000 }] {
            let e = estimate_observable(&s, &obs, &EstimatorConfig { mode, seed: 2 }, 0).unwrap();
            assert!((e - exact).abs() < 1e-2, "{mode:?}: {e} vs {exact}");
        }
    }
}
