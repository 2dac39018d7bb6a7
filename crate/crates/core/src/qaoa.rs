//! QAOA circuits with adjoint gradients, a BFGS optimizer, FALQON-seeded
//! optimization and random multistart baselines.
//!
//! Angles here are full rotation angles: layer `k` applies
//! `e^{-i gamma_k H_p}` then `e^{-i beta_k H_d}`, so a FALQON schedule maps
//! over as `gamma_k = dt`, `beta_k = beta_falqon_k * dt`.

use num_complex::Complex;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::falqon::{run_falqon, FalqonConfig};
use crate::graphs::{brute_force_maxcut, Graph, MaxCutSolution};
use crate::hamiltonian::{build_problem_diagonal, IsingDiagonal};
use crate::metrics::{approximation_ratio, success_probability};
use crate::scalar::Real;
use crate::simulator::{InitKind, StateVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        let p = QaoaParams { gammas, betas };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(layers: usize) -> Self {
        QaoaParams { gammas: vec![0.0; layers], betas: vec![0.0; layers] }
    }

    pub fn layers(&self) -> usize {
        self.gammas.len()
    }

    /// `[gamma_1..gamma_L, beta_1..beta_L]`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.gammas.iter().chain(&self.betas).copied().collect()
    }

    pub fn from_vec(x: &[f64]) -> Result<Self> {
        if x.len() % 2 != 0 {
            return Err(Error::param(format!("parameter vector has odd length {}", x.len())));
        }
        let l = x.len() / 2;
        QaoaParams::new(x[..l].to_vec(), x[l..].to_vec())
    }

    fn validate(&self) -> Result<()> {
        if self.gammas.len() != self.betas.len() {
            return Err(Error::param(format!(
                "{} gammas but {} betas",
                self.gammas.len(),
                self.betas.len()
            )));
        }
        if self.gammas.iter().chain(&self.betas).any(|a| !a.is_finite()) {
            return Err(Error::param("QAOA angles must be finite"));
        }
        Ok(())
    }
}

fn evolve_diag<T: Real>(diag: &IsingDiagonal<T>, params: &QaoaParams) -> Result<StateVector<T>> {
    params.validate()?;
    let mut state = StateVector::new(diag.n(), InitKind::DriverGround)?;
    for (&g, &b) in params.gammas.iter().zip(&params.betas) {
        state.apply_problem_phase(diag, T::of(g))?;
        state.apply_sum_x_rotation(T::of(b));
    }
    Ok(state)
}

/// Final state of the circuit applied to the driver ground state.
pub fn qaoa_evolve<T: Real>(graph: &Graph, params: &QaoaParams) -> Result<StateVector<T>> {
    evolve_diag(&build_problem_diagonal::<T>(graph)?, params)
}

/// `sum_j X_j |psi>`.
fn sum_x_applied<T: Real>(state: &StateVector<T>) -> Vec<Complex<T>> {
    let amps = state.amplitudes();
    let mut out = vec![Complex::zero(); amps.len()];
    for (b, o) in out.iter_mut().enumerate() {
        for q in 0..state.n() {
            *o = *o + amps[b ^ (1 << q)];
        }
    }
    out
}

/// `Im <l|v>` where `v` is given explicitly.
fn im_inner<T: Real>(l: &StateVector<T>, v: &[Complex<T>]) -> T {
    l.amplitudes().iter().zip(v).fold(T::zero(), |acc, (a, b)| acc + (a.conj() * b).im)
}

fn energy_and_gradient_diag<T: Real>(diag: &IsingDiagonal<T>, params: &QaoaParams) -> Result<(T, Vec<T>)> {
    let l = params.layers();
    let mut psi = evolve_diag(diag, params)?;
    let energy = psi.expectation_diagonal(diag)?;
    // lam = H_p psi
    let mut lam = psi.clone();
    for (a, &v) in lam.amps_mut().iter_mut().zip(diag.values()) {
        *a = *a * v;
    }
    let two = T::of(2.0);
    let mut grad = vec![T::zero(); 2 * l];
    for k in (0..l).rev() {
        grad[l + k] = two * im_inner(&lam, &sum_x_applied(&psi));
        psi.apply_sum_x_rotation(-T::of(params.betas[k]));
        lam.apply_sum_x_rotation(-T::of(params.betas[k]));
        let hp: Vec<Complex<T>> = psi.amplitudes().iter().zip(diag.values()).map(|(a, &v)| *a * v).collect();
        grad[k] = two * im_inner(&lam, &hp);
        psi.apply_problem_phase(diag, -T::of(params.gammas[k]))?;
        lam.apply_problem_phase(diag, -T::of(params.gammas[k]))?;
    }
    Ok((energy, grad))
}

/// Energy `<psi|H_p|psi>` and its gradient ordered as
/// `[dE/dgamma_1.., dE/dbeta_1..]`, from one forward and one backward sweep.
pub fn qaoa_energy_and_gradient<T: Real>(graph: &Graph, params: &QaoaParams) -> Result<(T, Vec<T>)> {
    energy_and_gradient_diag(&build_problem_diagonal::<T>(graph)?, params)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BfgsOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo_c: f64,
    /// Step shrink factor during backtracking.
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions { max_iters: 1000, grad_tol: 1e-6, armijo_c: 1e-4, shrink: 0.5, max_backtracks: 60 }
    }
}

/// One accepted optimizer step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    /// Entry 0 is the starting point with `step = 0`.
    pub log: Vec<IterationRecord>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn checked<F>(f: &mut F, x: &[f64]) -> Result<(f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (v, g) = f(x)?;
    if g.len() != x.len() {
        return Err(Error::param(format!("gradient has length {}, expected {}", g.len(), x.len())));
    }
    if !v.is_finite() || g.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical(format!("non-finite objective or gradient at x = {x:?}")));
    }
    Ok((v, g))
}

/// BFGS with an inverse-Hessian update and Armijo backtracking. Accepted
/// steps never increase the objective.
pub fn bfgs_minimize<F>(mut objective: F, x0: &[f64], opts: &BfgsOptions) -> Result<BfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if x0.is_empty() {
        return Err(Error::param("empty starting point"));
    }
    if !(opts.shrink > 0.0 && opts.shrink < 1.0 && opts.armijo_c > 0.0 && opts.armijo_c < 1.0) {
        return Err(Error::param("line-search constants must lie in (0, 1)"));
    }
    let n = x0.len();
    let identity = |h: &mut Vec<f64>| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
    };
    let mut h = vec![0.0; n * n];
    identity(&mut h);
    let mut x = x0.to_vec();
    let (mut f, mut g) = checked(&mut objective, &x)?;
    let initial_value = f;
    let mut log = vec![IterationRecord { iter: 0, energy: f, grad_norm: norm(&g), step: 0.0 }];
    let mut iterations = 0;
    let mut converged = norm(&g) < opts.grad_tol;

    while !converged && iterations < opts.max_iters {
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&g, &p);
        if !(slope < 0.0) {
            identity(&mut h);
            p = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
            let (fn_, gn) = checked(&mut objective, &xn)?;
            if fn_ <= f + opts.armijo_c * alpha * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            alpha *= opts.shrink;
        }
        let Some((xn, fn_, gn)) = accepted else {
            // No acceptable step along a descent direction: numerically stationary.
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        iterations += 1;
        let step = norm(&s);
        x = xn;
        f = fn_;
        g = gn;
        log.push(IterationRecord { iter: iterations, energy: f, grad_norm: norm(&g), step });
        converged = norm(&g) < opts.grad_tol;
    }
    Ok(BfgsResult { gradient_norm: norm(&g), x, value: f, initial_value, iterations, converged, log })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub params: QaoaParams,
    pub energy: f64,
    pub initial_energy: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub ratio: f64,
    pub phi: f64,
    pub log: Vec<IterationRecord>,
}

struct Problem {
    diag: IsingDiagonal<f64>,
    solution: MaxCutSolution,
}

impl Problem {
    fn new(graph: &Graph) -> Result<Self> {
        Ok(Problem { diag: build_problem_diagonal(graph)?, solution: brute_force_maxcut(graph)? })
    }

    fn optimize(&self, start: &QaoaParams, opts: &BfgsOptions) -> Result<OptResult> {
        let res = bfgs_minimize(
            |x| energy_and_gradient_diag(&self.diag, &QaoaParams::from_vec(x)?),
            &start.to_vec(),
            opts,
        )?;
        let params = QaoaParams::from_vec(&res.x)?;
        let state = evolve_diag(&self.diag, &params)?;
        Ok(OptResult {
            ratio: approximation_ratio(res.value, self.solution.min_energy)?,
            phi: success_probability(&state, &self.solution)?,
            params,
            energy: res.value,
            initial_energy: res.initial_value,
            iterations: res.iterations,
            gradient_norm: res.gradient_norm,
            converged: res.converged,
            log: res.log,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalqonPlusResult {
    pub seed_params: QaoaParams,
    pub seed_ratio: f64,
    pub seed_phi: f64,
    pub optimized: OptResult,
}

/// Runs `layers` exact FALQON layers, maps the schedule to QAOA angles and
/// refines them with BFGS.
pub fn falqon_plus(graph: &Graph, layers: usize, dt: f64, opts: &BfgsOptions) -> Result<FalqonPlusResult> {
    let trace = run_falqon::<f64>(graph, &FalqonConfig::fixed_length(dt, layers))?;
    let seed_params = QaoaParams::new(vec![dt; layers], trace.beta.iter().map(|b| b * dt).collect())?;
    let problem = Problem::new(graph)?;
    let optimized = problem.optimize(&seed_params, opts)?;
    Ok(FalqonPlusResult { seed_params, seed_ratio: trace.final_ratio(), seed_phi: trace.final_phi(), optimized })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultistartStats {
    pub runs: Vec<OptResult>,
    pub max_ratio: f64,
    pub median_ratio: f64,
    pub min_ratio: f64,
    pub max_phi: f64,
    pub median_phi: f64,
    pub min_phi: f64,
}

/// `(max, median, min)`; the median of an even count averages the middle pair.
fn order_stats(mut v: Vec<f64>) -> (f64, f64, f64) {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    let median = if m % 2 == 1 { v[m / 2] } else { 0.5 * (v[m / 2 - 1] + v[m / 2]) };
    (v[m - 1], median, v[0])
}

/// Random starting angles, independently uniform on `(0, pi)`, from stream
/// `index` of `seed`.
pub fn random_params(layers: usize, seed: u64, index: u64) -> QaoaParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut draw = || loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u * std::f64::consts::PI;
        }
    };
    let gammas = (0..layers).map(|_| draw()).collect();
    let betas = (0..layers).map(|_| draw()).collect();
    QaoaParams { gammas, betas }
}

/// BFGS from `starts` random initializations, run in parallel.
pub fn multistart_qaoa(graph: &Graph, layers: usize, starts: usize, seed: u64, opts: &BfgsOptions) -> Result<MultistartStats> {
    if starts == 0 || layers == 0 {
        return Err(Error::param("multistart needs at least one start and one layer"));
    }
    let problem = Problem::new(graph)?;
    let runs: Vec<OptResult> = (0..starts as u64)
        .into_par_iter()
        .map(|i| problem.optimize(&random_params(layers, seed, i), opts))
        .collect::<Result<_>>()?;
    let (max_ratio, median_ratio, min_ratio) = order_stats(runs.iter().map(|r| r.ratio).collect());
    let (max_phi, median_phi, min_phi) = order_stats(runs.iter().map(|r| r.phi).collect());
    Ok(MultistartStats { runs, max_ratio, median_ratio, min_ratio, max_phi, median_phi, min_phi })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge() -> Graph {
        Graph::unweighted(2, &[(0, 1)]).unwrap()
    }

    #[test]
    fn zero_angles_leave_state_unchanged() {
        let g = Graph::complete(4).unwrap();
        let s = qaoa_evolve::<f64>(&g, &QaoaParams::zeros(3)).unwrap();
        assert_eq!(s, StateVector::new(4, InitKind::DriverGround).unwrap());
        let (e, _) = qaoa_energy_and_gradient::<f64>(&g, &QaoaParams::zeros(3)).unwrap();
        assert!((e + g.total_weight() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(QaoaParams::new(vec![0.1], vec![]).is_err());
        assert!(QaoaParams::from_vec(&[0.1, 0.2, 0.3]).is_err());
        let bad = QaoaParams { gammas: vec![0.1, 0.2], betas: vec![0.1] };
        assert!(qaoa_evolve::<f64>(&edge(), &bad).is_err());
    }

    #[test]
    fn quadratic_converges_to_origin() {
        let q = [[3.0, 1.0, 0.0], [1.0, 2.0, 0.5], [0.0, 0.5, 1.0]];
        let f = |x: &[f64]| {
            let qx: Vec<f64> = q.iter().map(|r| dot(r, x)).collect();
            Ok((0.5 * dot(x, &qx), qx))
        };
        let res = bfgs_minimize(f, &[1.0, -2.0, 3.0], &BfgsOptions { grad_tol: 1e-10, ..Default::default() }).unwrap();
        assert!(res.converged);
        assert!(norm(&res.x) < 1e-8, "{:?}", res.x);
    }

    #[test]
    fn rosenbrock_converges() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((v, g))
        };
        let res = bfgs_minimize(f, &[-1.2, 1.0], &BfgsOptions { grad_tol: 1e-9, ..Default::default() }).unwrap();
        assert!((res.x[0] - 1.0).abs() < 1e-5 && (res.x[1] - 1.0).abs() < 1e-5, "{:?}", res.x);
        assert!(res.log.windows(2).all(|w| w[1].energy <= w[0].energy));
    }

    #[test]
    fn non_finite_objective_is_numerical_error() {
        let f = |_: &[f64]| Ok((f64::NAN, vec![0.0]));
        assert!(matches!(bfgs_minimize(f, &[0.0], &BfgsOptions::default()), Err(Error::Numerical(_))));
    }

    #[test]
    fn random_params_in_range_and_reproducible() {
        let a = random_params(5, 3, 1);
        assert_eq!(a, random_params(5, 3, 1));
        assert_ne!(a, random_params(5, 3, 2));
        assert!(a.to_vec().iter().all(|&v| v > 0.0 && v < std::f64::consts::PI));
    }

    #[test]
    fn single_start_order_stats_collapse() {
        let s = multistart_qaoa(&edge(), 1, 1, 0, &BfgsOptions::default()).unwrap();
        assert_eq!(s.max_ratio, s.min_ratio);
        assert_eq!(s.median_ratio, s.min_ratio);
        assert_eq!(s.max_phi, s.min_phi);
    }

    #[test]
    fn order_stats_even_count() {
        assert_eq!(order_stats(vec![4.0, 1.0, 3.0, 2.0]), (4.0, 2.5, 1.0));
    }
}
