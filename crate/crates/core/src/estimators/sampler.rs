//! One sample of a telescoping difference `lambda^l(y) - lambda^{l-1}(y)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::Discretization;
use crate::eigen::{solve_eigenpair, two_grid_update, Eigenpair, SolveStats, DEFAULT_TOL};
use crate::error::Result;
use crate::problems::ParamVector;

use super::hierarchy::LevelDiscs;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingOptions {
    pub two_grid: bool,
    pub warm_start: bool,
    pub shared_shifts: bool,
    /// Also estimate the mean value of the eigenfunction.
    pub functional: bool,
    pub rq_tol: f64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            two_grid: true,
            warm_start: true,
            shared_shifts: false,
            functional: false,
            rq_tol: DEFAULT_TOL,
        }
    }
}

impl SamplingOptions {
    /// Direct cold solves, as used by the plain Monte Carlo baselines.
    pub fn plain() -> Self {
        Self {
            two_grid: false,
            warm_start: false,
            ..Self::default()
        }
    }
}

/// Eigenpairs carried from one point of a stream to the next.
#[derive(Debug, Clone, Default)]
pub struct WarmState {
    pub coarse: Option<Eigenpair>,
    pub fine: Option<Eigenpair>,
    pub previous: Option<Eigenpair>,
}

/// Values already computed for the same parameter on the level below.
#[derive(Debug, Clone)]
pub struct Reuse {
    pub previous_lambda: f64,
    pub previous_functional: f64,
    /// Coarse pair, valid only if it lives on `coarse_disc`.
    pub coarse: Option<(Arc<Discretization>, Eigenpair)>,
}

#[derive(Debug, Clone, Default)]
pub struct LevelSample {
    pub delta: f64,
    pub fine: f64,
    pub functional_delta: f64,
    pub fine_functional: f64,
    /// Coarse two-grid pair used for this sample.
    pub coarse: Option<Eigenpair>,
    /// Eigensolves (direct or coarse).
    pub eigen: SolveStats,
    /// Fine two-grid updates.
    pub update: SolveStats,
    pub eigen_iterations: Vec<usize>,
}

/// Mean value `int u dx` of a nodal function given on the interior degrees
/// of freedom of `disc`.
pub fn functional_of_eigenfunction(u: &[f64], disc: &Discretization) -> f64 {
    u.iter()
        .zip(disc.basis_integrals())
        .map(|(a, b)| a * b)
        .sum()
}

fn direct(
    disc: &Discretization,
    y: &ParamVector,
    warm: &mut Option<Eigenpair>,
    opts: &SamplingOptions,
    out: &mut LevelSample,
) -> Result<(f64, f64)> {
    let start = if opts.warm_start { warm.as_ref() } else { None };
    let (pair, stats) = solve_eigenpair(disc, y, start, opts.rq_tol)?;
    out.eigen.absorb(&stats);
    out.eigen_iterations.push(stats.rq_iterations);
    let g = if opts.functional {
        functional_of_eigenfunction(&pair.u, disc)
    } else {
        0.0
    };
    let lambda = pair.lambda;
    if opts.warm_start {
        *warm = Some(pair);
    }
    Ok((lambda, g))
}

/// `lambda^l(y) - lambda^{l-1}(y)` with `lambda^{-1} = 0`.
///
/// On level 0 the eigenvalue is solved directly. On finer levels the
/// two-grid method runs one coarse eigensolve and reuses that pair for both
/// fine updates; without two-grid both fine eigenvalues are solved directly.
pub fn sample_level_difference(
    discs: &LevelDiscs,
    y: &ParamVector,
    warm: &mut WarmState,
    opts: &SamplingOptions,
    reuse: Option<&Reuse>,
) -> Result<LevelSample> {
    let mut out = LevelSample::default();
    let (fine, fine_g, prev, prev_g) = match (&discs.previous, &discs.coarse) {
        (None, _) => {
            let (l, g) = direct(&discs.fine, y, &mut warm.fine, opts, &mut out)?;
            (l, g, 0.0, 0.0)
        }
        (Some(previous), Some(coarse)) if opts.two_grid => {
            let reused_pair = reuse
                .and_then(|r| r.coarse.as_ref())
                .filter(|(d, _)| Arc::ptr_eq(d, coarse))
                .map(|(_, p)| p.clone());
            let pair = match reused_pair {
                Some(p) => p,
                None => {
                    let start = if opts.warm_start {
                        warm.coarse.as_ref()
                    } else {
                        None
                    };
                    let (p, stats) = solve_eigenpair(coarse, y, start, opts.rq_tol)?;
                    out.eigen.absorb(&stats);
                    out.eigen_iterations.push(stats.rq_iterations);
                    p
                }
            };
            let (l, u) = two_grid_update(&pair, coarse, &discs.fine, y, &mut out.update)?;
            let g = if opts.functional {
                functional_of_eigenfunction(&u, &discs.fine)
            } else {
                0.0
            };
            let (pl, pg) = match reuse {
                Some(r) => (r.previous_lambda, r.previous_functional),
                None => {
                    let (pl, pu) = two_grid_update(&pair, coarse, previous, y, &mut out.update)?;
                    let pg = if opts.functional {
                        functional_of_eigenfunction(&pu, previous)
                    } else {
                        0.0
                    };
                    (pl, pg)
                }
            };
            if opts.warm_start {
                warm.coarse = Some(pair.clone());
            }
            out.coarse = Some(pair);
            (l, g, pl, pg)
        }
        (Some(previous), _) => {
            let (l, g) = direct(&discs.fine, y, &mut warm.fine, opts, &mut out)?;
            let (pl, pg) = match reuse {
                Some(r) => (r.previous_lambda, r.previous_functional),
                None => direct(previous, y, &mut warm.previous, opts, &mut out)?,
            };
            (l, g, pl, pg)
        }
    };
    out.fine = fine;
    out.fine_functional = fine_g;
    out.delta = fine - prev;
    out.functional_delta = fine_g - prev_g;
    Ok(out)
}
