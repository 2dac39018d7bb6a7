//! Figures of merit and the Lyapunov convergence-criteria report.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{check_capacity, Error, Result};
use crate::graphs::{Graph, MaxCutSolution};
use crate::hamiltonian::{build_problem_diagonal, DriverSpec};
use crate::scalar::Real;
use crate::simulator::StateVector;

/// Qubit limit for per-layer instantaneous eigensolves.
pub const INSTANTANEOUS_LIMIT: usize = 12;

/// Qubit limit for the convergence-criteria report.
pub const CRITERIA_LIMIT: usize = 10;

/// Default degeneracy window for the instantaneous ground space.
pub const DEFAULT_GROUND_TOL: f64 = 0.01;

/// Spectrum and gap equality tolerance for the criteria report.
pub const SPECTRUM_TOL: f64 = 1e-9;

/// Matrix elements below this magnitude count as missing couplings.
pub const COUPLING_TOL: f64 = 1e-12;

/// Violations listed per criterion before truncation.
const MAX_DETAILS: usize = 64;

/// `E / E_min`. Both are non-positive for MaxCut, so the ratio is in
/// `[0, 1]` whenever `E <= 0`.
pub fn approximation_ratio<T: Real>(energy: T, min_energy: T) -> Result<T> {
    if min_energy == T::zero() {
        return Err(Error::param("approximation ratio undefined for zero ground energy (edgeless instance)"));
    }
    Ok(energy / min_energy)
}

/// Total probability on the optimal bitstrings.
pub fn success_probability<T: Real>(state: &StateVector<T>, solution: &MaxCutSolution) -> Result<T> {
    if state.n() != solution.n {
        return Err(Error::param(format!(
            "dimension mismatch: state has {} qubits, solution {}",
            state.n(),
            solution.n
        )));
    }
    let amps = state.amplitudes();
    Ok(solution.optimal_bitstrings.iter().map(|&z| amps[z].norm_sqr()).sum())
}

/// Dense `H_p + beta * sum_j X_j` as a real symmetric matrix.
fn instantaneous_hamiltonian(values: &[f64], n: usize, beta: f64) -> DMatrix<f64> {
    let dim = 1 << n;
    let mut h = DMatrix::zeros(dim, dim);
    for z in 0..dim {
        h[(z, z)] = values[z];
        for q in 0..n {
            h[(z ^ (1 << q), z)] = beta;
        }
    }
    h
}

/// Population of the instantaneous ground space of `H_p + beta * sum_j X_j`:
/// eigenvectors whose eigenvalue lies within `tol` of the minimum.
pub fn instantaneous_overlap<T: Real>(state: &StateVector<T>, graph: &Graph, beta: f64, tol: f64) -> Result<f64> {
    let n = graph.n();
    check_capacity("instantaneous ground-state overlap", n, INSTANTANEOUS_LIMIT)?;
    if state.n() != n {
        return Err(Error::param("dimension mismatch between state and graph"));
    }
    let diag = build_problem_diagonal::<f64>(graph)?;
    instantaneous_overlap_diag(state, diag.values(), beta, tol)
}

/// As [`instantaneous_overlap`] for a precomputed problem diagonal.
pub fn instantaneous_overlap_diag<T: Real>(state: &StateVector<T>, values: &[f64], beta: f64, tol: f64) -> Result<f64> {
    let n = state.n();
    check_capacity("instantaneous ground-state overlap", n, INSTANTANEOUS_LIMIT)?;
    if values.len() != state.dim() {
        return Err(Error::param("dimension mismatch between state and diagonal"));
    }
    let eig = instantaneous_hamiltonian(values, n, beta).symmetric_eigen();
    let lowest = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let psi = state.to_f64();
    let mut total = 0.0;
    for (i, &val) in eig.eigenvalues.iter().enumerate() {
        if val - lowest > tol {
            continue;
        }
        let v = eig.eigenvectors.column(i);
        let overlap: Complex64 = v.iter().zip(psi.amplitudes()).map(|(&c, a)| a * c).sum();
        total += overlap.norm_sqr();
    }
    Ok(total.min(1.0))
}

/// Pairs violating a criterion, truncated to a fixed length.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Violations<P> {
    pub count: usize,
    pub examples: Vec<P>,
}

impl<P> Violations<P> {
    fn push(&mut self, p: P) {
        self.count += 1;
        if self.examples.len() < MAX_DETAILS {
            self.examples.push(p);
        }
    }
}

/// Index pairs behind each failed criterion. Indices are computational
/// basis states, which are the eigenvectors of the diagonal `H_p`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CriteriaDetails {
    pub equal_eigenvalues: Violations<(usize, usize)>,
    pub equal_gaps: Violations<((usize, usize), (usize, usize))>,
    pub uncoupled_pairs: Violations<(usize, usize)>,
    pub initial_energy: f64,
    pub first_excited_energy: f64,
}

/// Sufficient conditions for asymptotic convergence of the continuous
/// feedback dynamics. `degenerate_*` flags are violations; the other two are
/// satisfied when true.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub degenerate_eigenvalues: bool,
    pub degenerate_gaps: bool,
    pub driver_connects_all_pairs: bool,
    pub initial_energy_below_first_excited: bool,
    pub details: CriteriaDetails,
}

impl CriteriaReport {
    pub fn all_satisfied(&self) -> bool {
        !self.degenerate_eigenvalues
            && !self.degenerate_gaps
            && self.driver_connects_all_pairs
            && self.initial_energy_below_first_excited
    }
}

/// Criteria report for a MaxCut instance.
pub fn check_qlc_convergence_criteria<T: Real>(
    graph: &Graph,
    driver: &DriverSpec,
    psi0: &StateVector<T>,
) -> Result<CriteriaReport> {
    check_capacity("convergence criteria", graph.n(), CRITERIA_LIMIT)?;
    let diag = build_problem_diagonal::<f64>(graph)?;
    check_convergence_criteria(diag.values(), driver, psi0)
}

/// Criteria report for an arbitrary diagonal problem Hamiltonian.
pub fn check_convergence_criteria<T: Real>(
    values: &[f64],
    driver: &DriverSpec,
    psi0: &StateVector<T>,
) -> Result<CriteriaReport> {
    let n = psi0.n();
    check_capacity("convergence criteria", n, CRITERIA_LIMIT)?;
    let dim = 1usize << n;
    if values.len() != dim {
        return Err(Error::param("dimension mismatch between state and diagonal"));
    }
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut details = CriteriaDetails::default();

    // (1) distinct eigenvalues: only neighbours in sorted order can collide
    // within tolerance, but report every pair inside each near-equal run.
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && values[order[end]] - values[order[end - 1]] <= SPECTRUM_TOL {
            end += 1;
        }
        for a in start..end {
            for b in a + 1..end {
                details.equal_eigenvalues.push((order[a], order[b]));
            }
        }
        start = end;
    }

    // (2) distinct gaps over all ordered pairs i < j in the sorted spectrum.
    let mut gaps: Vec<(f64, usize, usize)> = Vec::with_capacity(dim * (dim - 1) / 2);
    for a in 0..dim {
        for b in a + 1..dim {
            gaps.push((values[order[b]] - values[order[a]], order[a], order[b]));
        }
    }
    gaps.sort_by(|x, y| x.0.total_cmp(&y.0));
    for w in gaps.windows(2) {
        if w[1].0 - w[0].0 <= SPECTRUM_TOL {
            details.equal_gaps.push(((w[0].1, w[0].2), (w[1].1, w[1].2)));
        }
    }

    // (3) every pair of eigenvectors coupled by the driver.
    match driver {
        DriverSpec::SumX => {
            for i in 0..dim {
                for j in i + 1..dim {
                    if (i ^ j).count_ones() != 1 {
                        details.uncoupled_pairs.push((i, j));
                    }
                }
            }
        }
        DriverSpec::Custom(_) => {
            let m = dense::pauli_sum(&driver.to_pauli_sum(n)?)?;
            for i in 0..dim {
                for j in i + 1..dim {
                    if m[(j, i)].norm() < COUPLING_TOL {
                        details.uncoupled_pairs.push((i, j));
                    }
                }
            }
        }
    }

    // (4) initial energy strictly below the first excited level.
    let probs = psi0.probabilities();
    details.initial_energy = probs.iter().zip(values).map(|(p, v)| p.as_f64() * v).sum();
    details.first_excited_energy = if dim > 1 { values[order[1]] } else { f64::INFINITY };

    Ok(CriteriaReport {
        degenerate_eigenvalues: details.equal_eigenvalues.count > 0,
        degenerate_gaps: details.equal_gaps.count > 0,
        driver_connects_all_pairs: details.uncoupled_pairs.count == 0,
        initial_energy_below_first_excited: details.initial_energy < details.first_excited_energy,
        details,
    })
}
