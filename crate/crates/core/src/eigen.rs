//! Smallest eigenpairs of `A u = lambda M u` by Rayleigh quotient iteration,
//! and the two-grid update that replaces a fine eigensolve by one shifted
//! linear solve.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::mesh::prolongate;
use crate::problems::ParamVector;
use crate::sparse::{check_dim, FactorizedOperator, SparseSymMatrix, SymbolicLdl};

/// Absolute tolerance on the eigenvalue change between iterations.
pub const DEFAULT_TOL: f64 = 5e-8;
pub const DEFAULT_MAX_ITER: usize = 50;
/// Inverse power steps at zero shift before a cold Rayleigh quotient iteration.
pub const COLD_PRE_ITERATIONS: usize = 5;
pub const MAX_COLD_RESTARTS: usize = 2;
const MAX_SHIFT_PERTURBATIONS: usize = 3;
const SHIFT_PERTURBATION: f64 = 1e-10;
const RESTART_SEED: u64 = 0x005e_ed0f_1a57;

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub lambda: f64,
    /// Interior coefficients, `u^T M u = 1`, largest-magnitude entry positive.
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub rq_iterations: usize,
    pub linear_solves: usize,
    pub factorizations: usize,
    pub restarts: usize,
    /// Multiply-adds spent in factorizations, solves and assembly.
    pub work: f64,
    pub wall_seconds: f64,
    /// Crude estimate of `lambda_2 - lambda_1` from inverse-power history.
    pub gap_estimate: Option<f64>,
}

impl SolveStats {
    pub fn absorb(&mut self, other: &SolveStats) {
        self.rq_iterations += other.rq_iterations;
        self.linear_solves += other.linear_solves;
        self.factorizations += other.factorizations;
        self.restarts += other.restarts;
        self.work += other.work;
        self.wall_seconds += other.wall_seconds;
        if other.gap_estimate.is_some() {
            self.gap_estimate = other.gap_estimate;
        }
    }
}

/// A matrix pair sharing one symbolic factorization.
pub struct Pencil<'a> {
    pub a: &'a SparseSymMatrix,
    pub m: &'a SparseSymMatrix,
    symbolic: Arc<SymbolicLdl>,
}

impl<'a> Pencil<'a> {
    pub fn new(a: &'a SparseSymMatrix, m: &'a SparseSymMatrix) -> Result<Self> {
        Ok(Self {
            a,
            m,
            symbolic: Arc::new(SymbolicLdl::analyze(a, m)?),
        })
    }

    pub fn with_symbolic(
        a: &'a SparseSymMatrix,
        m: &'a SparseSymMatrix,
        symbolic: Arc<SymbolicLdl>,
    ) -> Self {
        Self { a, m, symbolic }
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Factorizes `A - sigma M`, nudging a singular shift up to three times.
    fn factorize(&self, sigma: f64, stats: &mut SolveStats) -> Result<FactorizedOperator> {
        let mut shift = sigma;
        let mut attempt = 0;
        loop {
            stats.factorizations += 1;
            stats.work += self.symbolic.factor_flops();
            match FactorizedOperator::new(self.symbolic.clone(), self.a, self.m, shift) {
                Err(Error::SingularShift { .. }) if attempt < MAX_SHIFT_PERTURBATIONS => {
                    attempt += 1;
                    shift += SHIFT_PERTURBATION * (1.0 + shift.abs());
                }
                other => return other,
            }
        }
    }

    fn solve(&self, f: &FactorizedOperator, rhs: &mut [f64], stats: &mut SolveStats) {
        f.solve_in_place(rhs);
        stats.linear_solves += 1;
        stats.work += self.symbolic.solve_flops();
    }

    /// Scales `v` to unit `M`-norm and returns its Rayleigh quotient.
    fn normalize(&self, v: &mut [f64]) -> Result<f64> {
        let norm2 = self.m.bilinear(v, v);
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(Error::ZeroVector);
        }
        let inv = 1.0 / norm2.sqrt();
        v.iter_mut().for_each(|x| *x *= inv);
        Ok(self.a.bilinear(v, v))
    }
}

/// Flips `u` so its largest-magnitude entry (lowest index on ties) is positive.
pub fn fix_sign(u: &mut [f64]) {
    let mut best = 0;
    for (i, v) in u.iter().enumerate() {
        if v.abs() > u[best].abs() {
            best = i;
        }
    }
    if u.get(best).is_some_and(|&v| v < 0.0) {
        u.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Rayleigh quotient iteration from `(v0, sigma0)`.
pub fn rq_iteration(
    pencil: &Pencil<'_>,
    v0: &[f64],
    sigma0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Eigenpair, SolveStats)> {
    let start = Instant::now();
    let mut stats = SolveStats::default();
    let pair = rq_loop(pencil, v0, sigma0, tol, max_iter, &mut stats)?;
    stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok((pair, stats))
}

fn rq_loop(
    pencil: &Pencil<'_>,
    v0: &[f64],
    sigma0: f64,
    tol: f64,
    max_iter: usize,
    stats: &mut SolveStats,
) -> Result<Eigenpair> {
    check_dim(pencil.dim(), v0.len())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let mut v = v0.to_vec();
    pencil.normalize(&mut v)?;
    let mut sigma = sigma0;
    let mut change = f64::INFINITY;
    let mut w = vec![0.0; v.len()];
    for _ in 0..max_iter {
        let f = pencil.factorize(sigma, stats)?;
        pencil.m.mul_vec_into(&v, &mut w);
        pencil.solve(&f, &mut w, stats);
        let next = pencil.normalize(&mut w)?;
        stats.rq_iterations += 1;
        change = (next - sigma).abs();
        std::mem::swap(&mut v, &mut w);
        sigma = next;
        if change <= tol {
            fix_sign(&mut v);
            return Ok(Eigenpair {
                lambda: sigma,
                u: v,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        last_change: change,
    })
}

/// Smallest eigenpair without prior information.
///
/// Starts from the all-ones vector with a few inverse power steps at zero
/// shift, runs Rayleigh quotient iteration, and then checks by inertia that no
/// eigenvalue lies below the converged one. A failed check restarts from a
/// seeded random vector.
pub fn smallest_eigenpair_cold(pencil: &Pencil<'_>, tol: f64) -> Result<(Eigenpair, SolveStats)> {
    let start = Instant::now();
    let mut stats = SolveStats::default();
    let n = pencil.dim();
    let base = pencil.factorize(0.0, &mut stats)?;
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    let mut v = vec![1.0; n];
    let mut attempt = 0;
    loop {
        let mut history = Vec::with_capacity(COLD_PRE_ITERATIONS + 1);
        history.push(pencil.normalize(&mut v)?);
        let mut w = vec![0.0; n];
        for _ in 0..COLD_PRE_ITERATIONS {
            pencil.m.mul_vec_into(&v, &mut w);
            pencil.solve(&base, &mut w, &mut stats);
            history.push(pencil.normalize(&mut w)?);
            std::mem::swap(&mut v, &mut w);
        }
        let sigma0 = *history.last().unwrap();
        let pair = rq_loop(pencil, &v, sigma0, tol, DEFAULT_MAX_ITER, &mut stats)?;

        let gap = gap_estimate(&history, pair.lambda);
        stats.gap_estimate = Some(gap);
        let margin = (gap / 2.0).min(1e-3 * pair.lambda.abs()).max(10.0 * tol);
        let check = pencil.factorize(pair.lambda - margin, &mut stats)?;
        if check.negative_pivots() == 0 {
            stats.wall_seconds = start.elapsed().as_secs_f64();
            return Ok((pair, stats));
        }
        if attempt == MAX_COLD_RESTARTS {
            return Err(Error::NotSmallest {
                lambda: pair.lambda,
                below: check.negative_pivots(),
            });
        }
        attempt += 1;
        stats.restarts += 1;
        log::debug!(
            "cold start converged to lambda = {} with {} eigenvalues below; restarting",
            pair.lambda,
            check.negative_pivots()
        );
        v = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    }
}

/// Gap from the geometric decay of inverse-power Rayleigh quotients, whose
/// errors shrink by roughly `(lambda_1 / lambda_2)^2` per step.
fn gap_estimate(history: &[f64], lambda: f64) -> f64 {
    let lo = 1e-6 * lambda.abs();
    let hi = lambda.abs();
    let k = history.len();
    if k < 3 {
        return hi;
    }
    let d1 = history[k - 2] - history[k - 1];
    let d0 = history[k - 3] - history[k - 2];
    if !(d0 > 0.0 && d1 > 0.0) {
        return hi;
    }
    let r = (d1 / d0).min(1.0);
    (lambda * (1.0 / r.sqrt() - 1.0)).clamp(lo, hi)
}

/// Start vector and shift for a new matrix from a neighbouring solution.
pub fn warm_start_from(
    previous: &Eigenpair,
    a_current: &SparseSymMatrix,
    m: &SparseSymMatrix,
) -> Result<(Vec<f64>, f64)> {
    check_dim(a_current.dim(), previous.u.len())?;
    let sigma0 = crate::sparse::rayleigh_quotient(a_current, m, &previous.u)?;
    Ok((previous.u.clone(), sigma0))
}

/// Eigenpair on `disc` for parameter `y`, warm-started from `warm` if given.
pub fn solve_eigenpair(
    disc: &Discretization,
    y: &ParamVector,
    warm: Option<&Eigenpair>,
    tol: f64,
) -> Result<(Eigenpair, SolveStats)> {
    let a = disc.stiffness(y)?;
    let pencil = Pencil::with_symbolic(&a, disc.mass(), disc.symbolic().clone());
    let (pair, mut stats) = match warm {
        Some(prev) => {
            let (v0, sigma0) = warm_start_from(prev, &a, disc.mass())?;
            rq_iteration(&pencil, &v0, sigma0, tol, DEFAULT_MAX_ITER)?
        }
        None => smallest_eigenpair_cold(&pencil, tol)?,
    };
    stats.work += disc.assembly_work();
    Ok((pair, stats))
}

/// Output of the two-grid method.
#[derive(Debug, Clone)]
pub struct TwoGrid {
    pub lambda: f64,
    /// `M`-normalized fine solution, sign-fixed.
    pub u: Vec<f64>,
    pub coarse: Eigenpair,
    pub stats: SolveStats,
}

/// One shifted solve on the fine mesh from a coarse eigenpair, followed by a
/// Rayleigh quotient. Returns the eigenvalue and the normalized vector.
pub fn two_grid_update(
    coarse_pair: &Eigenpair,
    coarse: &Discretization,
    fine: &Discretization,
    y: &ParamVector,
    stats: &mut SolveStats,
) -> Result<(f64, Vec<f64>)> {
    let start = Instant::now();
    let a = fine.stiffness(y)?;
    stats.work += fine.assembly_work();
    let pencil = Pencil::with_symbolic(&a, fine.mass(), fine.symbolic().clone());
    let interp = prolongate(&coarse_pair.u, coarse.mesh(), fine.mesh())?;
    let f = pencil.factorize(coarse_pair.lambda, stats)?;
    let mut w = fine.mass().mul_vec(&interp)?;
    pencil.solve(&f, &mut w, stats);
    let lambda = pencil.normalize(&mut w)?;
    fix_sign(&mut w);
    stats.wall_seconds += start.elapsed().as_secs_f64();
    Ok((lambda, w))
}

/// Coarse eigensolve on `(H, S)` followed by the fine update on `(h, s)`.
pub fn two_grid_eigenpair(
    coarse: &Discretization,
    fine: &Discretization,
    y: &ParamVector,
    warm: Option<&Eigenpair>,
    tol: f64,
) -> Result<TwoGrid> {
    if coarse.mesh().n_per_side() > fine.mesh().n_per_side()
        || coarse.truncation() > fine.truncation()
    {
        return Err(Error::InvalidParameter(format!(
            "two-grid needs H >= h and S <= s (got H = {}, h = {}, S = {}, s = {})",
            coarse.mesh().h(),
            fine.mesh().h(),
            coarse.truncation(),
            fine.truncation()
        )));
    }
    let (coarse_pair, mut stats) = solve_eigenpair(coarse, y, warm, tol)?;
    let (lambda, u) = two_grid_update(&coarse_pair, coarse, fine, y, &mut stats)?;
    Ok(TwoGrid {
        lambda,
        u,
        coarse: coarse_pair,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[f64]) -> SparseSymMatrix {
        SparseSymMatrix::from_diagonal(values)
    }

    #[test]
    fn exact_start_converges_in_one_step() {
        let a = diag(&[1.0, 2.0]);
        let m = SparseSymMatrix::identity(2);
        let p = Pencil::new(&a, &m).unwrap();
        let (pair, stats) = rq_iteration(&p, &[1.0, 0.0], 1.0, DEFAULT_TOL, 50).unwrap();
        assert_eq!(pair.lambda, 1.0);
        assert_eq!(pair.u, vec![1.0, 0.0]);
        assert_eq!(stats.rq_iterations, 1);
    }

    #[test]
    fn cold_start_picks_the_smallest() {
        let a = diag(&[3.0, 1.0, 2.0]);
        let m = SparseSymMatrix::identity(3);
        let p = Pencil::new(&a, &m).unwrap();
        let (pair, stats) = smallest_eigenpair_cold(&p, DEFAULT_TOL).unwrap();
        assert!((pair.lambda - 1.0).abs() < 1e-12);
        assert!(pair.u[1] > 0.999);
        assert!(stats.linear_solves >= stats.rq_iterations);
    }

    #[test]
    fn wrong_start_is_repaired_by_restart() {
        // all-ones start is orthogonal to the smallest eigenvector
        let a = SparseSymMatrix::from_triplets(
            2,
            &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)],
        )
        .unwrap();
        let m = SparseSymMatrix::identity(2);
        let p = Pencil::new(&a, &m).unwrap();
        let (pair, stats) = smallest_eigenpair_cold(&p, DEFAULT_TOL).unwrap();
        assert!((pair.lambda - 1.0).abs() < 1e-10);
        assert!(stats.restarts >= 1);
    }

    #[test]
    fn sign_convention() {
        let mut u = vec![0.1, -0.9, 0.5];
        fix_sign(&mut u);
        assert_eq!(u, vec![-0.1, 0.9, -0.5]);
        let mut tie = vec![-1.0, 1.0];
        fix_sign(&mut tie);
        assert_eq!(tie, vec![1.0, -1.0]);
    }

    #[test]
    fn gap_estimate_is_clamped() {
        assert_eq!(gap_estimate(&[1.0], 2.0), 2.0);
        let h = [3.0, 2.0, 1.999999999];
        let g = gap_estimate(&h, 2.0);
        assert!((2e-6..=2.0).contains(&g));
    }
}
