//! Randomly shifted (multilevel) lattice-rule estimators.
//!
//! Every (level, shift) pair is a stream that visits its lattice points in
//! order so each eigensolve can start from the previous point's solution.
//! Doubling `N` visits only the odd points of the larger rule and continues
//! the same chain.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::discretization::Discretization;
use crate::eigen::SolveStats;
use crate::error::{Error, Result};
use crate::problems::CoefficientSeries;
use crate::qmc::{
    shift_and_center, shift_average_and_variance, shift_stream, stream_rng, GeneratingVector,
};

use super::hierarchy::{Hierarchy, HierarchyConfig, LevelDiscs};
use super::report::{
    histogram, median, Counters, EstimatorKind, FunctionalLevel, LevelReport, MlqmcReport,
};
use super::sampler::{sample_level_difference, Reuse, SamplingOptions, WarmState};
use super::MultilevelSampler;

/// What a level leaves behind for the level above in shared-shift mode.
#[derive(Debug, Clone)]
struct CacheEntry {
    lambda: f64,
    functional: f64,
    coarse: Option<(Arc<Discretization>, crate::eigen::Eigenpair)>,
}

#[derive(Debug)]
struct Stream {
    level: usize,
    r: usize,
    shift: Vec<f64>,
    n: u64,
    sum: f64,
    sum_functional: f64,
    warm: WarmState,
    eigen: SolveStats,
    update: SolveStats,
    eigen_solves: usize,
    iterations: Vec<usize>,
    wall: f64,
}

impl Stream {
    fn new(level: usize, r: usize, shift: Vec<f64>) -> Self {
        Self {
            level,
            r,
            shift,
            n: 0,
            sum: 0.0,
            sum_functional: 0.0,
            warm: WarmState::default(),
            eigen: SolveStats::default(),
            update: SolveStats::default(),
            eigen_solves: 0,
            iterations: Vec::new(),
            wall: 0.0,
        }
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Points `(rule size, index)` still to visit to reach `target`.
    fn schedule(&self, target: u64) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        if self.n == 0 {
            out.extend((0..target).map(|k| (target, k)));
        } else {
            let mut n = self.n;
            while n < target {
                let m = 2 * n;
                out.extend((1..m).step_by(2).map(|k| (m, k)));
                n = m;
            }
        }
        out
    }

    fn advance(
        &mut self,
        target: u64,
        discs: &LevelDiscs,
        z: &GeneratingVector,
        opts: &SamplingOptions,
        below: Option<&HashMap<u64, CacheEntry>>,
        mut keep: Option<&mut HashMap<u64, CacheEntry>>,
    ) -> Result<()> {
        if target <= self.n {
            return Ok(());
        }
        let start = Instant::now();
        let s = discs.params.s;
        let mut t = vec![0.0; s];
        let max_n = z.max_n();
        for (n, k) in self.schedule(target) {
            z.point_into(n, k, &mut t)?;
            let y = shift_and_center(&t, &self.shift[..s])?;
            let global = k * (max_n / n);
            let reuse = below.and_then(|c| c.get(&global)).map(|e| Reuse {
                previous_lambda: e.lambda,
                previous_functional: e.functional,
                coarse: e.coarse.clone(),
            });
            let sample = sample_level_difference(discs, &y, &mut self.warm, opts, reuse.as_ref())
                .map_err(|e| Error::SampleFailed {
                level: self.level,
                shift: self.r,
                point: k,
                y: y.as_slice().to_vec(),
                source: Box::new(e),
            })?;
            self.sum += sample.delta;
            self.sum_functional += sample.functional_delta;
            self.eigen.absorb(&sample.eigen);
            self.update.absorb(&sample.update);
            self.eigen_solves += sample.eigen_iterations.len();
            self.iterations.extend_from_slice(&sample.eigen_iterations);
            if let Some(cache) = keep.as_deref_mut() {
                let coarse = match (&discs.coarse, sample.coarse) {
                    (Some(d), Some(p)) => Some((d.clone(), p)),
                    _ => None,
                };
                cache.insert(
                    global,
                    CacheEntry {
                        lambda: sample.fine,
                        functional: sample.fine_functional,
                        coarse,
                    },
                );
            }
        }
        self.n = target;
        self.wall += start.elapsed().as_secs_f64();
        Ok(())
    }
}

/// One shift across all levels.
#[derive(Debug)]
struct Group {
    streams: Vec<Stream>,
    caches: Vec<HashMap<u64, CacheEntry>>,
}

/// Multilevel lattice-rule sampler with independent or shared shifts.
pub struct MlqmcSampler {
    hierarchy: Hierarchy,
    z: GeneratingVector,
    seed: u64,
    shifts: usize,
    opts: SamplingOptions,
    kind: EstimatorKind,
    discs: Vec<LevelDiscs>,
    groups: Vec<Group>,
}

impl MlqmcSampler {
    pub fn new(
        problem: CoefficientSeries,
        config: HierarchyConfig,
        shifts: usize,
        z: &GeneratingVector,
        seed: u64,
        opts: SamplingOptions,
    ) -> Result<Self> {
        if shifts < 2 {
            return Err(Error::InvalidParameter(format!(
                "at least 2 random shifts are needed (got {shifts})"
            )));
        }
        Ok(Self {
            hierarchy: Hierarchy::new(problem, config)?,
            z: z.clone(),
            seed,
            shifts,
            opts,
            kind: EstimatorKind::Mlqmc,
            discs: Vec::new(),
            groups: (0..shifts)
                .map(|_| Group {
                    streams: Vec::new(),
                    caches: Vec::new(),
                })
                .collect(),
        })
    }

    fn add_level(&mut self) -> Result<()> {
        let level = self.discs.len();
        let discs = self.hierarchy.prepare(level, self.opts.two_grid)?;
        let s = discs.params.s;
        if s > self.z.dim() {
            return Err(Error::GeneratingVector(format!(
                "dimension {s} requested but {} has only {}",
                self.z.label(),
                self.z.dim()
            )));
        }
        let shift_level = if self.opts.shared_shifts { 0 } else { level };
        for (r, g) in self.groups.iter_mut().enumerate() {
            let mut rng = stream_rng(self.seed, shift_stream(shift_level, r));
            let shift = (0..s).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            g.streams.push(Stream::new(level, r, shift));
            g.caches.push(HashMap::new());
        }
        self.discs.push(discs);
        Ok(())
    }

    fn check_target(&self, n: u64) -> Result<()> {
        if !n.is_power_of_two() || n > self.z.max_n() {
            return Err(Error::InvalidParameter(format!(
                "points per shift {n} must be a power of 2 not above {}",
                self.z.max_n()
            )));
        }
        Ok(())
    }

    fn level_report(&self, level: usize) -> Result<LevelReport> {
        let d = &self.discs[level];
        let streams: Vec<&Stream> = self.groups.iter().map(|g| &g.streams[level]).collect();
        let per_shift: Vec<f64> = streams.iter().map(|s| s.mean()).collect();
        let (q_hat, variance) = shift_average_and_variance(&per_shift)?;
        let functional = if self.opts.functional {
            let per: Vec<f64> = streams
                .iter()
                .map(|s| s.sum_functional / s.n as f64)
                .collect();
            let (q, v) = shift_average_and_variance(&per)?;
            Some(FunctionalLevel {
                per_shift: per,
                q_hat: q,
                variance: v,
            })
        } else {
            None
        };
        let mut counters = Counters::default();
        let mut iterations = Vec::new();
        let mut cost = 0.0;
        for s in &streams {
            counters.add(&s.eigen, &s.update, s.eigen_solves);
            iterations.extend_from_slice(&s.iterations);
            cost += s.wall;
        }
        let two_grid = d.coarse.is_some();
        Ok(LevelReport {
            level,
            h: d.params.h(),
            s: d.params.s,
            coarse_h: two_grid.then(|| d.params.coarse_h()),
            coarse_s: two_grid.then_some(d.params.coarse_s),
            n: streams[0].n,
            shifts: self.shifts,
            per_shift,
            q_hat,
            variance,
            functional,
            cost_seconds: cost,
            counters,
            rq_iters_median: median(&iterations),
            rq_histogram: histogram(&iterations),
        })
    }
}

impl MultilevelSampler for MlqmcSampler {
    fn num_levels(&self) -> usize {
        self.discs.len()
    }

    fn samples(&self, level: usize) -> u64 {
        self.groups[0].streams[level].n
    }

    fn sample_to(&mut self, targets: &[u64]) -> Result<()> {
        for &n in targets {
            self.check_target(n)?;
        }
        while self.discs.len() < targets.len() {
            self.add_level()?;
        }
        let discs = &self.discs;
        let z = &self.z;
        let opts = &self.opts;
        if opts.shared_shifts {
            self.groups.par_iter_mut().try_for_each(|g| -> Result<()> {
                for (level, &target) in targets.iter().enumerate() {
                    let (lower, upper) = g.caches.split_at_mut(level);
                    let below = lower.last();
                    g.streams[level].advance(
                        target,
                        &discs[level],
                        z,
                        opts,
                        below,
                        Some(&mut upper[0]),
                    )?;
                }
                Ok(())
            })
        } else {
            let mut work: Vec<&mut Stream> = self
                .groups
                .iter_mut()
                .flat_map(|g| g.streams.iter_mut())
                .filter(|s| s.n < targets[s.level])
                .collect();
            work.par_iter_mut()
                .try_for_each(|s| s.advance(targets[s.level], &discs[s.level], z, opts, None, None))
        }
    }

    fn level_mean_variance(&self, level: usize) -> Result<(f64, f64)> {
        let per: Vec<f64> = self
            .groups
            .iter()
            .map(|g| g.streams[level].mean())
            .collect();
        shift_average_and_variance(&per)
    }

    fn unit_cost(&self, level: usize) -> f64 {
        let mut work = 0.0;
        let mut n = 0.0;
        for g in &self.groups {
            let s = &g.streams[level];
            work += s.eigen.work + s.update.work;
            n += s.n as f64;
        }
        if n > 0.0 {
            work / n
        } else {
            0.0
        }
    }

    fn total_variance(&self) -> Result<f64> {
        if self.opts.shared_shifts {
            // levels share shifts, so the variance comes from per-shift totals
            let totals: Vec<f64> = self
                .groups
                .iter()
                .map(|g| g.streams.iter().map(Stream::mean).sum())
                .collect();
            Ok(shift_average_and_variance(&totals)?.1)
        } else {
            let mut total = 0.0;
            for l in 0..self.num_levels() {
                total += self.level_mean_variance(l)?.1;
            }
            Ok(total)
        }
    }

    fn report(&self) -> Result<MlqmcReport> {
        let levels = (0..self.num_levels())
            .map(|l| self.level_report(l))
            .collect::<Result<Vec<_>>>()?;
        let estimate = levels.iter().map(|l| l.q_hat).sum();
        let total_variance = self.total_variance()?;
        let (functional_estimate, functional_variance) = if self.opts.functional {
            let per: Vec<f64> = self
                .groups
                .iter()
                .map(|g| {
                    g.streams
                        .iter()
                        .map(|s| s.sum_functional / s.n as f64)
                        .sum()
                })
                .collect();
            let (q, v) = shift_average_and_variance(&per)?;
            let v = if self.opts.shared_shifts {
                v
            } else {
                levels
                    .iter()
                    .filter_map(|l| l.functional.as_ref().map(|f| f.variance))
                    .sum()
            };
            (Some(q), Some(v))
        } else {
            (None, None)
        };
        Ok(MlqmcReport {
            estimator: self.kind,
            problem: self.hierarchy.problem.name().to_string(),
            seed: self.seed,
            options: self.opts,
            generating_vector: Some(self.z.label().to_string()),
            total_cost_seconds: levels.iter().map(|l| l.cost_seconds).sum(),
            total_work: levels.iter().map(|l| l.counters.work).sum(),
            total_solves: levels.iter().map(|l| l.counters.linear_solves()).sum(),
            levels,
            estimate,
            total_variance,
            functional_estimate,
            functional_variance,
            tolerance: None,
            tolerance_achieved: false,
            trajectory: Vec::new(),
        })
    }
}

/// Multilevel QMC with `n[l]` points per shift on level `l`.
pub fn mlqmc_estimate(
    problem: &CoefficientSeries,
    config: &HierarchyConfig,
    n: &[u64],
    shifts: usize,
    z: &GeneratingVector,
    seed: u64,
    opts: SamplingOptions,
) -> Result<MlqmcReport> {
    if n.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one level is needed".into(),
        ));
    }
    let mut sampler = MlqmcSampler::new(problem.clone(), config.clone(), shifts, z, seed, opts)?;
    sampler.sample_to(n)?;
    sampler.report()
}

/// Single-level randomly shifted lattice rule on the mesh `2^-mesh_exponent`
/// with direct solves.
#[allow(clippy::too_many_arguments)]
pub fn qmc_single_level(
    problem: &CoefficientSeries,
    mesh_exponent: u32,
    s: usize,
    n: u64,
    shifts: usize,
    z: &GeneratingVector,
    seed: u64,
    warm_start: bool,
) -> Result<MlqmcReport> {
    let mut sampler = qmc_sampler(problem, mesh_exponent, s, shifts, z, seed, warm_start)?;
    sampler.sample_to(&[n])?;
    sampler.report()
}

pub(crate) fn qmc_sampler(
    problem: &CoefficientSeries,
    mesh_exponent: u32,
    s: usize,
    shifts: usize,
    z: &GeneratingVector,
    seed: u64,
    warm_start: bool,
) -> Result<MlqmcSampler> {
    let config = HierarchyConfig {
        base_exponent: mesh_exponent,
        truncation: super::hierarchy::TruncationPolicy::Fixed(s),
        coarse_truncation: None,
    };
    let opts = SamplingOptions {
        warm_start,
        ..SamplingOptions::plain()
    };
    let mut sampler = MlqmcSampler::new(problem.clone(), config, shifts, z, seed, opts)?;
    sampler.kind = EstimatorKind::Qmc;
    Ok(sampler)
}
