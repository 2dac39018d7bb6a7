//! State-vector engine: preparation, Trotter layers, expectation values and
//! sampling. All kernels work on basis-state indices directly; no dense
//! matrices are formed.

use num_complex::{Complex, Complex64};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_capacity, Error, Result};
use crate::hamiltonian::{DriverSpec, IsingDiagonal, PauliString, PauliSum, SIMULATION_LIMIT};
use crate::scalar::{phase, Real};

/// Normalization tolerance for user-supplied amplitudes.
const NORM_TOL: f64 = 1e-10;

/// Initial-state recipes.
#[derive(Clone, Debug, PartialEq)]
pub enum InitKind {
    /// `|->^n`, the ground state of `sum_j X_j` (energy `-n`).
    DriverGround,
    /// `|+>^n`.
    UniformPlus,
    /// Computational basis state with the given index.
    BasisState(usize),
    /// Explicit normalized amplitudes.
    Custom(Vec<Complex64>),
}

/// Pure state of `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T> {
    n: usize,
    amps: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn new(n: usize, kind: InitKind) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("state needs at least one qubit"));
        }
        check_capacity("state vector", n, SIMULATION_LIMIT)?;
        let dim = 1usize << n;
        let amps = match kind {
            InitKind::DriverGround => {
                let mag = T::of((dim as f64).sqrt().recip());
                (0..dim)
                    .map(|z| {
                        let sign = if z.count_ones() % 2 == 0 { mag } else { -mag };
                        Complex::new(sign, T::zero())
                    })
                    .collect()
            }
            InitKind::UniformPlus => {
                let mag = T::of((dim as f64).sqrt().recip());
                vec![Complex::new(mag, T::zero()); dim]
            }
            InitKind::BasisState(z) => {
                if z >= dim {
                    return Err(Error::param(format!("basis index {z} out of range for n = {n}")));
                }
                let mut v = vec![Complex::zero(); dim];
                v[z] = Complex::one();
                v
            }
            InitKind::Custom(a) => {
                if a.len() != dim {
                    return Err(Error::param(format!("expected {dim} amplitudes, got {}", a.len())));
                }
                let norm: f64 = a.iter().map(|c| c.norm_sqr()).sum();
                if (norm - 1.0).abs() > NORM_TOL || !norm.is_finite() {
                    return Err(Error::param(format!("amplitudes have squared norm {norm}, expected 1")));
                }
                a.iter().map(|c| Complex::new(T::of(c.re), T::of(c.im))).collect()
            }
        };
        Ok(StateVector { n, amps })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    #[inline]
    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector<T>) -> Result<Complex<T>> {
        self.check_same(other.n)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .fold(Complex::zero(), |acc, (a, b)| acc + a.conj() * b))
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &StateVector<T>) -> Result<T> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn to_f64(&self) -> StateVector<f64> {
        StateVector {
            n: self.n,
            amps: self.amps.iter().map(|a| Complex64::new(a.re.as_f64(), a.im.as_f64())).collect(),
        }
    }

    fn check_same(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::param(format!("dimension mismatch: state has {} qubits, operand has {n}", self.n)));
        }
        Ok(())
    }

    /// Multiplies amplitude `z` by `e^{-i t values[z]}`.
    pub fn apply_problem_phase(&mut self, diag: &IsingDiagonal<T>, t: T) -> Result<()> {
        self.check_same(diag.n())?;
        for (a, &v) in self.amps.iter_mut().zip(diag.values()) {
            *a = *a * phase(v * t);
        }
        Ok(())
    }

    /// `e^{-i theta X}` on every qubit.
    pub fn apply_sum_x_rotation(&mut self, theta: T) {
        let (s, c) = theta.sin_cos();
        let dim = self.amps.len();
        for q in 0..self.n {
            let bit = 1usize << q;
            for base in (0..dim).step_by(2 * bit) {
                for i in base..base + bit {
                    let a = self.amps[i];
                    let b = self.amps[i | bit];
                    // (c a - i s b, c b - i s a)
                    self.amps[i] = Complex::new(c * a.re + s * b.im, c * a.im - s * b.re);
                    self.amps[i | bit] = Complex::new(c * b.re + s * a.im, c * b.im - s * a.re);
                }
            }
        }
    }

    /// `P|psi>` for a Pauli string.
    pub fn apply_pauli_string(&mut self, p: &PauliString) -> Result<()> {
        self.check_same(p.n())?;
        let out = self.pauli_applied(p);
        self.amps = out;
        Ok(())
    }

    fn pauli_applied(&self, p: &PauliString) -> Vec<Complex<T>> {
        let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
        let base = i_pow::<T>(p.num_y());
        let mut out = vec![Complex::zero(); self.amps.len()];
        for (b, &a) in self.amps.iter().enumerate() {
            let v = if (b & z).count_ones() % 2 == 0 { base } else { -base };
            out[b ^ x] = v * a;
        }
        out
    }

    /// `e^{-i phi P}` for a Pauli string (`P^2 = 1`).
    pub fn apply_pauli_rotation(&mut self, p: &PauliString, phi: T) -> Result<()> {
        self.check_same(p.n())?;
        let (s, c) = phi.sin_cos();
        let pa = self.pauli_applied(p);
        let mis = Complex::new(T::zero(), -s);
        for (a, b) in self.amps.iter_mut().zip(pa) {
            *a = *a * c + b * mis;
        }
        Ok(())
    }

    /// `e^{-i theta H_d}`. Exact for `SumX`; custom drivers use a symmetric
    /// second-order product over their terms (exact when terms commute).
    pub fn apply_driver(&mut self, driver: &DriverSpec, theta: T) -> Result<()> {
        match driver {
            DriverSpec::SumX => {
                self.apply_sum_x_rotation(theta);
                Ok(())
            }
            DriverSpec::Custom(sum) => {
                self.check_same(sum.n())?;
                let half = theta / T::of(2.0);
                for (c, p) in sum.terms() {
                    self.apply_pauli_rotation(p, T::of(*c) * half)?;
                }
                for (c, p) in sum.terms().iter().rev() {
                    self.apply_pauli_rotation(p, T::of(*c) * half)?;
                }
                Ok(())
            }
        }
    }

    /// One alternating layer `U_d(beta) U_p`: the problem phase for time `dt`
    /// followed by the driver for time `beta * dt`.
    pub fn apply_layer(&mut self, diag: &IsingDiagonal<T>, beta: T, dt: T, driver: &DriverSpec) -> Result<()> {
        if !(dt > T::zero()) {
            return Err(Error::param(format!("time step must be positive, got {dt}")));
        }
        self.apply_problem_phase(diag, dt)?;
        self.apply_driver(driver, beta * dt)
    }

    /// `<psi|H_p|psi>` for a diagonal operator.
    pub fn expectation_diagonal(&self, diag: &IsingDiagonal<T>) -> Result<T> {
        self.check_same(diag.n())?;
        Ok(self.amps.iter().zip(diag.values()).map(|(a, &v)| a.norm_sqr() * v).sum())
    }

    /// `<psi|P|psi>`, complex in general.
    pub fn expectation_pauli_string(&self, p: &PauliString) -> Result<Complex<T>> {
        self.check_same(p.n())?;
        let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
        let mut acc = Complex::<T>::zero();
        for (b, &a) in self.amps.iter().enumerate() {
            let term = self.amps[b ^ x].conj() * a;
            if (b & z).count_ones() % 2 == 0 {
                acc = acc + term;
            } else {
                acc = acc - term;
            }
        }
        Ok(acc * i_pow::<T>(p.num_y()))
    }

    /// `sum_j alpha_j <psi|P_j|psi>`; the imaginary residue is discarded.
    pub fn expectation_pauli_sum(&self, obs: &PauliSum) -> Result<T> {
        self.check_same(obs.n())?;
        let mut acc = T::zero();
        for (c, p) in obs.terms() {
            acc = acc + T::of(*c) * self.expectation_pauli_string(p)?.re;
        }
        Ok(acc)
    }

    /// Independent draws of basis-state indices from `|amplitude|^2`.
    pub fn sample_bitstrings(&self, shots: usize, seed: u64) -> Result<Vec<usize>> {
        if shots == 0 {
            return Err(Error::param("shots must be at least 1"));
        }
        let mut cdf = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0f64;
        for a in &self.amps {
            acc += a.norm_sqr().as_f64();
            cdf.push(acc);
        }
        let total = acc;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..shots)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
            })
            .collect())
    }

    /// Little-endian `(re, im)` f64 pairs in basis-index order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 * self.amps.len());
        for a in &self.amps {
            out.extend_from_slice(&a.re.as_f64().to_le_bytes());
            out.extend_from_slice(&a.im.as_f64().to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(n: usize, bytes: &[u8]) -> Result<Self> {
        check_capacity("state vector", n, SIMULATION_LIMIT)?;
        if bytes.len() != 16 << n {
            return Err(Error::param(format!("state dump has {} bytes, expected {}", bytes.len(), 16 << n)));
        }
        let read = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
        let amps = bytes
            .chunks_exact(16)
            .map(|c| Complex::new(T::of(read(&c[..8])), T::of(read(&c[8..]))))
            .collect();
        Ok(StateVector { n, amps })
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.amps
    }
}

/// `i^k`.
fn i_pow<T: Real>(k: u32) -> Complex<T> {
    match k % 4 {
        0 => Complex::new(T::one(), T::zero()),
        1 => Complex::new(T::zero(), T::one()),
        2 => Complex::new(-T::one(), T::zero()),
        _ => Complex::new(T::zero(), -T::one()),
    }
}
