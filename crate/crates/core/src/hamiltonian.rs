//! Problem diagonal, driver operators, Pauli-sum observables and the operator
//! norms entering the time-step bound.
//!
//! The MaxCut problem Hamiltonian is `H_p = -sum_{(j,k)} (w_jk / 2)(1 - Z_j Z_k)`,
//! whose diagonal entry on basis state `z` is minus the cut value of `z`.
//! For unit weights this is the familiar `-sum (1 - Z_j Z_k) / 2`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{check_capacity, Error, Result};
use crate::graphs::Graph;
use crate::scalar::Real;

/// Largest qubit count for state-vector simulation.
pub const SIMULATION_LIMIT: usize = 24;

/// Largest qubit count for dense driver-norm evaluation.
const DENSE_NORM_LIMIT: usize = 10;

/// Diagonal of the problem Hamiltonian in the computational basis.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingDiagonal<T> {
    n: usize,
    values: Vec<T>,
}

impl<T: Real> IsingDiagonal<T> {
    /// Wraps an arbitrary diagonal of length `2^n`.
    pub fn from_values(n: usize, values: Vec<T>) -> Result<Self> {
        check_capacity("problem diagonal", n, SIMULATION_LIMIT)?;
        if values.len() != 1 << n {
            return Err(Error::param(format!(
                "diagonal length {} is not 2^{n}",
                values.len()
            )));
        }
        Ok(IsingDiagonal { n, values })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    /// Spectral norm of the diagonal operator.
    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// `values[z] = -cut_value(graph, z)`.
pub fn build_problem_diagonal<T: Real>(graph: &Graph) -> Result<IsingDiagonal<T>> {
    let n = graph.n();
    check_capacity("problem diagonal", n, SIMULATION_LIMIT)?;
    let mut values = vec![0.0f64; 1 << n];
    for e in graph.edges() {
        let (mu, mv) = (1usize << e.u, 1usize << e.v);
        for (z, val) in values.iter_mut().enumerate() {
            if ((z & mu) == 0) != ((z & mv) == 0) {
                *val -= e.weight;
            }
        }
    }
    Ok(IsingDiagonal { n, values: values.into_iter().map(T::of).collect() })
}

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// Tensor product of single-qubit Paulis, stored as X and Z bitmasks
/// (`Y` sets both). The operator is `i^{#Y} X^x Z^z` with `Z` acting first,
/// which realizes `Y|0> = i|1>` and `Y|1> = -i|0>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString { n, x: 0, z: 0 }
    }

    /// Sets qubit `q` to `p`.
    pub fn with(mut self, q: usize, p: Pauli) -> Self {
        let bit = 1u64 << q;
        self.x &= !bit;
        self.z &= !bit;
        match p {
            Pauli::I => {}
            Pauli::X => self.x |= bit,
            Pauli::Z => self.z |= bit,
            Pauli::Y => {
                self.x |= bit;
                self.z |= bit;
            }
        }
        self
    }

    /// Builds from `(qubit, letter)` pairs.
    pub fn from_sparse(n: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        check_capacity("Pauli string", n, 64)?;
        ops.iter().try_fold(PauliString::identity(n), |s, &(q, p)| {
            if q >= n {
                Err(Error::param(format!("qubit {q} out of range for n = {n}")))
            } else {
                Ok(s.with(q, p))
            }
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn x_mask(&self) -> u64 {
        self.x
    }

    #[inline]
    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn get(&self, q: usize) -> Pauli {
        match ((self.x >> q) & 1, (self.z >> q) & 1) {
            (0, 0) => Pauli::I,
            (1, 0) => Pauli::X,
            (0, 1) => Pauli::Z,
            _ => Pauli::Y,
        }
    }

    pub fn num_y(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// `self * other = i^k * R`; returns `(k mod 4, R)`.
    pub fn multiply(&self, other: &PauliString) -> (u32, PauliString) {
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        // Z^{z1} X^{x2} = (-1)^{|z1 & x2|} X^{x2} Z^{z1}
        let swap = 2 * (self.z & other.x).count_ones();
        let k = self.num_y() + other.num_y() + swap + 4 * 64 - (x & z).count_ones();
        (k % 4, PauliString { n: self.n, x, z })
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            let c = match self.get(q) {
                Pauli::I => 'I',
                Pauli::X => 'X',
                Pauli::Y => 'Y',
                Pauli::Z => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Letters are listed qubit 0 first, e.g. `YZI`.
    fn from_str(s: &str) -> Result<Self> {
        let n = s.chars().count();
        check_capacity("Pauli string", n, 64)?;
        s.chars().enumerate().try_fold(PauliString::identity(n), |p, (q, c)| {
            let letter = match c {
                'I' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                other => return Err(Error::param(format!("invalid Pauli letter {other:?}"))),
            };
            Ok(p.with(q, letter))
        })
    }
}

/// Real linear combination of Pauli strings; Hermitian by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    n: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    /// Merges duplicate strings (keeping first-occurrence order) and drops
    /// zero coefficients.
    pub fn new(n: usize, terms: impl IntoIterator<Item = (f64, PauliString)>) -> Result<Self> {
        check_capacity("Pauli sum", n, 64)?;
        let mut index: HashMap<PauliString, usize> = HashMap::new();
        let mut merged: Vec<(f64, PauliString)> = Vec::new();
        for (c, p) in terms {
            if p.n() != n {
                return Err(Error::param(format!("Pauli string {p} has {} qubits, expected {n}", p.n())));
            }
            if !c.is_finite() {
                return Err(Error::param("non-finite Pauli coefficient"));
            }
            match index.get(&p) {
                Some(&i) => merged[i].0 += c,
                None => {
                    index.insert(p, merged.len());
                    merged.push((c, p));
                }
            }
        }
        let scale = merged.iter().map(|t| t.0.abs()).fold(0.0, f64::max);
        merged.retain(|t| t.0.abs() > 1e-15 * scale.max(1.0) && t.0 != 0.0);
        Ok(PauliSum { n, terms: merged })
    }

    /// Accepts complex coefficients and rejects any with a non-negligible
    /// imaginary part (the resulting operator would not be Hermitian).
    pub fn from_complex_terms(n: usize, terms: impl IntoIterator<Item = (Complex64, PauliString)>) -> Result<Self> {
        let mut real = Vec::new();
        for (c, p) in terms {
            if c.im.abs() > 1e-12 * c.norm().max(1.0) {
                return Err(Error::param(format!("coefficient {c} on {p} makes the operator non-Hermitian")));
            }
            real.push((c.re, p));
        }
        PauliSum::new(n, real)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient_l1(&self) -> f64 {
        self.terms.iter().map(|t| t.0.abs()).sum()
    }

    pub fn is_traceless(&self) -> bool {
        self.terms.iter().all(|t| !t.1.is_identity())
    }

    /// `i [self, other]`, computed term by term. Anticommuting pairs give
    /// `i (PQ - QP) = 2 i PQ`, which is always a real multiple of a string.
    pub fn i_commutator(&self, other: &PauliSum) -> Result<PauliSum> {
        if self.n != other.n {
            return Err(Error::param("commutator of Pauli sums on different qubit counts"));
        }
        let mut out = Vec::new();
        for (a, p) in &self.terms {
            for (b, q) in &other.terms {
                if p.commutes_with(q) {
                    continue;
                }
                let (k, r) = p.multiply(q);
                // 2 i * i^k with k odd
                let sign = if k == 1 { -2.0 } else { 2.0 };
                out.push((sign * a * b, r));
            }
        }
        PauliSum::new(self.n, out)
    }

    /// One term per line: `coeff letters`.
    pub fn to_text(&self) -> String {
        self.terms.iter().map(|(c, p)| format!("{c:?} {p}\n")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n = None;
        let mut terms = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: idx + 1, message };
            let mut fields = line.split_whitespace();
            let (Some(c), Some(s), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(parse_err(format!("expected `coeff letters`, got `{line}`")));
            };
            let c: f64 = c.parse().map_err(|e| parse_err(format!("bad coefficient: {e}")))?;
            let p: PauliString = s.parse().map_err(|e: Error| parse_err(e.to_string()))?;
            match n {
                None => n = Some(p.n()),
                Some(m) if m != p.n() => return Err(parse_err("inconsistent string lengths".into())),
                _ => {}
            }
            terms.push((c, p));
        }
        let n = n.ok_or(Error::Parse { line: 0, message: "empty Pauli sum".into() })?;
        PauliSum::new(n, terms)
    }
}

/// Driver (mixing) Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DriverSpec {
    /// `sum_j X_j`.
    SumX,
    /// Arbitrary real Pauli sum.
    Custom(PauliSum),
}

impl DriverSpec {
    /// `sum_j Y_j` on `n` qubits.
    pub fn sum_y(n: usize) -> Self {
        let terms = (0..n).map(|q| (1.0, PauliString::identity(n).with(q, Pauli::Y)));
        DriverSpec::Custom(PauliSum::new(n, terms).expect("valid single-qubit terms"))
    }

    /// Pauli expansion on `n` qubits.
    pub fn to_pauli_sum(&self, n: usize) -> Result<PauliSum> {
        match self {
            DriverSpec::SumX => PauliSum::new(
                n,
                (0..n).map(|q| (1.0, PauliString::identity(n).with(q, Pauli::X))),
            ),
            DriverSpec::Custom(p) if p.n() == n => Ok(p.clone()),
            DriverSpec::Custom(p) => Err(Error::param(format!(
                "driver acts on {} qubits, instance has {n}",
                p.n()
            ))),
        }
    }

    /// Spectral norm: `n` for `SumX`; dense eigensolve for custom drivers up
    /// to 10 qubits, else the coefficient l1 bound.
    pub fn norm(&self, n: usize) -> Result<f64> {
        match self {
            DriverSpec::SumX => Ok(n as f64),
            DriverSpec::Custom(p) => {
                let p = self.to_pauli_sum(n).map(|_| p)?;
                if n <= DENSE_NORM_LIMIT {
                    let m = dense::pauli_sum(p)?;
                    Ok(m.symmetric_eigenvalues().iter().fold(0.0f64, |a, l| a.max(l.abs())))
                } else {
                    Ok(p.coefficient_l1())
                }
            }
        }
    }
}

/// Pauli expansion of the problem Hamiltonian, including the identity offset.
pub fn problem_pauli_sum(graph: &Graph) -> Result<PauliSum> {
    let n = graph.n();
    let mut terms = vec![(-graph.total_weight() / 2.0, PauliString::identity(n))];
    for e in graph.edges() {
        let zz = PauliString::identity(n).with(e.u, Pauli::Z).with(e.v, Pauli::Z);
        terms.push((e.weight / 2.0, zz));
    }
    PauliSum::new(n, terms)
}

/// The observable `i [H_d, H_p]` whose expectation is the feedback signal.
///
/// For `SumX` the closed form is `sum_{(j,k)} w_jk (Y_j Z_k + Z_j Y_k)`; other
/// drivers go through symbolic Pauli commutation.
pub fn build_commutator_observable(graph: &Graph, driver: &DriverSpec) -> Result<PauliSum> {
    let n = graph.n();
    match driver {
        DriverSpec::SumX => {
            let mut terms = Vec::with_capacity(2 * graph.edges().len());
            for e in graph.edges() {
                let base = PauliString::identity(n);
                terms.push((e.weight, base.with(e.u, Pauli::Y).with(e.v, Pauli::Z)));
                terms.push((e.weight, base.with(e.u, Pauli::Z).with(e.v, Pauli::Y)));
            }
            PauliSum::new(n, terms)
        }
        DriverSpec::Custom(_) => driver.to_pauli_sum(n)?.i_commutator(&problem_pauli_sum(graph)?),
    }
}

/// `(||H_p||, ||H_d||)`.
pub fn operator_norms(graph: &Graph, driver: &DriverSpec) -> Result<(f64, f64)> {
    let diag = build_problem_diagonal::<f64>(graph)?;
    Ok((diag.max_abs(), driver.norm(graph.n())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::brute_force_maxcut;

    fn edge(w: f64) -> Graph {
        Graph::new(2, [(0, 1, w)]).unwrap()
    }

    #[test]
    fn diagonal_examples() {
        let d = build_problem_diagonal::<f64>(&edge(1.0)).unwrap();
        assert_eq!(d.values(), &[0.0, -1.0, -1.0, 0.0]);
        let t = build_problem_diagonal::<f64>(&Graph::complete(3).unwrap()).unwrap();
        assert_eq!(t.values(), &[0.0, -2.0, -2.0, -2.0, -2.0, -2.0, -2.0, 0.0]);
        let g = crate::graphs::generate_connected_regular_graph(8, 3, 5).unwrap();
        let d = build_problem_diagonal::<f64>(&g).unwrap();
        assert_eq!(d.min(), brute_force_maxcut(&g).unwrap().min_energy);
    }

    #[test]
    fn diagonal_capacity() {
        let g = Graph::cycle(25).unwrap();
        assert!(matches!(build_problem_diagonal::<f64>(&g), Err(Error::Capacity { .. })));
    }

    #[test]
    fn commutator_single_edge() {
        let c = build_commutator_observable(&edge(1.0), &DriverSpec::SumX).unwrap();
        let expected = vec![(1.0, "YZ".parse().unwrap()), (1.0, "ZY".parse().unwrap())];
        assert_eq!(c.terms(), expected.as_slice());
        let c = build_commutator_observable(&edge(0.7), &DriverSpec::SumX).unwrap();
        assert!(c.terms().iter().all(|t| t.0 == 0.7));
    }

    #[test]
    fn commutator_triangle_term_count() {
        let c = build_commutator_observable(&Graph::complete(3).unwrap(), &DriverSpec::SumX).unwrap();
        assert_eq!(c.len(), 6);
        assert!(c.terms().iter().all(|t| t.0 == 1.0));
        assert!(c.is_traceless());
    }

    #[test]
    fn symbolic_route_matches_closed_form() {
        let g = crate::graphs::assign_uniform_weights(&Graph::complete(4).unwrap(), 3);
        let closed = build_commutator_observable(&g, &DriverSpec::SumX).unwrap();
        let x = DriverSpec::Custom(DriverSpec::SumX.to_pauli_sum(4).unwrap());
        let symbolic = build_commutator_observable(&g, &x).unwrap();
        let a = dense::pauli_sum(&closed).unwrap();
        let b = dense::pauli_sum(&symbolic).unwrap();
        assert!(dense::max_abs_diff(&a, &b) < 1e-14);
    }

    #[test]
    fn multiply_phases() {
        let x: PauliString = "X".parse().unwrap();
        let y: PauliString = "Y".parse().unwrap();
        let z: PauliString = "Z".parse().unwrap();
        // XY = iZ, YZ = iX, ZX = iY, YX = -iZ
        assert_eq!(x.multiply(&y), (1, z));
        assert_eq!(y.multiply(&z), (1, x));
        assert_eq!(z.multiply(&x), (1, y));
        assert_eq!(y.multiply(&x), (3, z));
        assert_eq!(y.multiply(&y), (0, PauliString::identity(1)));
    }

    #[test]
    fn norms() {
        assert_eq!(operator_norms(&Graph::complete(3).unwrap(), &DriverSpec::SumX).unwrap(), (2.0, 3.0));
        assert_eq!(operator_norms(&edge(1.0), &DriverSpec::SumX).unwrap(), (1.0, 2.0));
        assert_eq!(operator_norms(&edge(0.7), &DriverSpec::SumX).unwrap(), (0.7, 2.0));
        let y = DriverSpec::sum_y(3);
        assert!((y.norm(3).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn non_hermitian_custom_rejected() {
        let p: PauliString = "XI".parse().unwrap();
        let r = PauliSum::from_complex_terms(2, [(Complex64::new(1.0, 0.5), p)]);
        assert!(matches!(r, Err(Error::Parameter(_))));
    }

    #[test]
    fn text_round_trip() {
        let c = build_commutator_observable(&Graph::complete(3).unwrap(), &DriverSpec::SumX).unwrap();
        let text = c.to_text();
        assert!(text.starts_with("1.0 YZI\n"));
        assert_eq!(PauliSum::from_text(&text).unwrap(), c);
        assert!(PauliSum::from_text("1.0 YQ\n").is_err());
    }

    #[test]
    fn duplicates_merge_and_cancel() {
        let p: PauliString = "XZ".parse().unwrap();
        let s = PauliSum::new(2, [(1.0, p), (-1.0, p)]).unwrap();
        assert!(s.is_empty());
    }
}
