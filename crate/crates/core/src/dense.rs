//! Dense `f64` operators built from Kronecker products.
//!
//! These are the small-`n` reference route: they never use the bit-indexed
//! kernels of the simulator, so tests can compare the two independently.
//! Kronecker order matches the bit convention: qubit 0 is the rightmost
//! factor (least significant index bit).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{check_capacity, Result};
use crate::hamiltonian::{Pauli, PauliString, PauliSum};

/// Largest qubit count for dense operator construction.
pub const DENSE_LIMIT: usize = 14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn single_qubit(p: Pauli) -> DMatrix<Complex64> {
    match p {
        Pauli::I => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ONE]),
        Pauli::X => DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        Pauli::Y => DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        Pauli::Z => DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    }
}

/// `P_{n-1} (x) ... (x) P_0`.
pub fn pauli_string(p: &PauliString) -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(1, 1, ONE);
    for q in (0..p.n()).rev() {
        m = m.kronecker(&single_qubit(p.get(q)));
    }
    m
}

pub fn pauli_sum(obs: &PauliSum) -> Result<DMatrix<Complex64>> {
    let n = obs.n();
    check_capacity("dense Pauli sum", n, DENSE_LIMIT)?;
    let dim = 1 << n;
    let mut m = DMatrix::zeros(dim, dim);
    for (c, p) in obs.terms() {
        m += pauli_string(p) * Complex64::new(*c, 0.0);
    }
    Ok(m)
}

pub fn diagonal(values: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| Complex64::new(v, 0.0)),
    ))
}

/// `e^{-i t H}` for Hermitian `H` via eigendecomposition.
pub fn hermitian_expm(h: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let eig = h.clone().symmetric_eigen();
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| Complex64::from_polar(1.0, -l * t)),
    );
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&phases) * v.adjoint()
}

/// `i (A B - B A)`.
pub fn i_commutator(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (a * b - b * a) * I
}

pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn y_phase_convention() {
        // Y|0> = i|1>, Y|1> = -i|0>; column index is the input state.
        let y = single_qubit(Pauli::Y);
        assert_eq!(y[(1, 0)], I);
        assert_eq!(y[(0, 1)], -I);
    }

    #[test]
    fn qubit_zero_is_rightmost_factor() {
        let z0: PauliString = "ZI".parse().unwrap();
        let m = pauli_string(&z0);
        // Index 1 has qubit 0 set.
        assert_eq!(m[(1, 1)], -ONE);
        assert_eq!(m[(2, 2)], ONE);
    }

    #[test]
    fn expm_of_x_rotation() {
        let x = single_qubit(Pauli::X);
        let u = hermitian_expm(&x, std::f64::consts::FRAC_PI_2);
        // e^{-i pi/2 X} = -i X
        assert!((u[(1, 0)] - (-I)).norm() < 1e-12);
        assert!(u[(0, 0)].norm() < 1e-12);
    }
}
