#![allow(dead_code)]

use falqon_core::graphs::Graph;
use falqon_core::StateVector;
use falqon_core::InitKind;
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random graph on 2..=max_n vertices with at least one edge; weighted half
/// the time.
pub fn random_graph(rng: &mut ChaCha8Rng, max_n: usize) -> Graph {
    let n = rng.random_range(2..=max_n);
    let weighted = rng.random_bool(0.5);
    loop {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random_bool(0.5) {
                    let w = if weighted { 1.0 - rng.random::<f64>() } else { 1.0 };
                    edges.push((u, v, w));
                }
            }
        }
        if !edges.is_empty() {
            return Graph::new(n, edges).unwrap();
        }
    }
}

/// Haar-ish random state: normalized complex Gaussian-like amplitudes.
pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> StateVector {
    let amps: Vec<Complex64> = (0..1usize << n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::new(n, InitKind::Custom(amps.iter().map(|a| a / norm).collect())).unwrap()
}

pub fn to_dvector(s: &StateVector) -> DVector<Complex64> {
    DVector::from_column_slice(s.amplitudes())
}
