//! Plain Monte Carlo and multilevel Monte Carlo with i.i.d. uniform
//! parameters and direct cold eigensolves.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::eigen::SolveStats;
use crate::error::{Error, Result};
use crate::problems::{CoefficientSeries, ParamVector};
use crate::qmc::{stream_rng, MC_STREAM_TAG};

use super::hierarchy::{Hierarchy, HierarchyConfig, LevelDiscs, TruncationPolicy};
use super::report::{histogram, median, Counters, EstimatorKind, LevelReport, MlqmcReport};
use super::sampler::{sample_level_difference, SamplingOptions, WarmState};
use super::MultilevelSampler;

struct McLevel {
    discs: LevelDiscs,
    rng: ChaCha8Rng,
    values: Vec<f64>,
    counters: Counters,
    iterations: Vec<usize>,
    wall: f64,
}

impl McLevel {
    fn mean_variance(&self) -> (f64, f64) {
        mean_and_variance_of_mean(&self.values)
    }
}

/// Sample mean and the estimated variance of the mean, `s^2 / N`.
pub fn mean_and_variance_of_mean(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, ss / (n - 1.0) / n)
}

pub struct MlmcSampler {
    hierarchy: Hierarchy,
    seed: u64,
    opts: SamplingOptions,
    kind: EstimatorKind,
    levels: Vec<McLevel>,
}

impl MlmcSampler {
    pub fn new(problem: CoefficientSeries, config: HierarchyConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            hierarchy: Hierarchy::new(problem, config)?,
            seed,
            opts: SamplingOptions::plain(),
            kind: EstimatorKind::Mlmc,
            levels: Vec::new(),
        })
    }

    fn add_level(&mut self) -> Result<()> {
        let level = self.levels.len();
        let discs = self.hierarchy.prepare(level, false)?;
        self.levels.push(McLevel {
            discs,
            rng: stream_rng(self.seed, MC_STREAM_TAG | ((level as u64) << 32)),
            values: Vec::new(),
            counters: Counters::default(),
            iterations: Vec::new(),
            wall: 0.0,
        });
        Ok(())
    }
}

impl MultilevelSampler for MlmcSampler {
    fn num_levels(&self) -> usize {
        self.levels.len()
    }

    fn samples(&self, level: usize) -> u64 {
        self.levels[level].values.len() as u64
    }

    fn sample_to(&mut self, targets: &[u64]) -> Result<()> {
        while self.levels.len() < targets.len() {
            self.add_level()?;
        }
        let opts = self.opts;
        for (level, &target) in targets.iter().enumerate() {
            let lv = &mut self.levels[level];
            let have = lv.values.len() as u64;
            if target <= have {
                continue;
            }
            let s = lv.discs.params.s;
            let ys: Vec<Vec<f64>> = (have..target)
                .map(|_| (0..s).map(|_| lv.rng.random::<f64>() - 0.5).collect())
                .collect();
            let start = Instant::now();
            let discs = &lv.discs;
            let results: Vec<Result<_>> = ys
                .par_iter()
                .enumerate()
                .map(|(i, y)| {
                    let y = ParamVector::new(y.clone())?;
                    let mut warm = WarmState::default();
                    sample_level_difference(discs, &y, &mut warm, &opts, None).map_err(|e| {
                        Error::SampleFailed {
                            level,
                            shift: 0,
                            point: have + i as u64,
                            y: y.as_slice().to_vec(),
                            source: Box::new(e),
                        }
                    })
                })
                .collect();
            for r in results {
                let sample = r?;
                lv.values.push(sample.delta);
                lv.counters.add(
                    &sample.eigen,
                    &SolveStats::default(),
                    sample.eigen_iterations.len(),
                );
                lv.iterations.extend_from_slice(&sample.eigen_iterations);
            }
            lv.wall += start.elapsed().as_secs_f64();
        }
        Ok(())
    }

    fn level_mean_variance(&self, level: usize) -> Result<(f64, f64)> {
        Ok(self.levels[level].mean_variance())
    }

    fn unit_cost(&self, level: usize) -> f64 {
        let lv = &self.levels[level];
        if lv.values.is_empty() {
            0.0
        } else {
            lv.counters.work / lv.values.len() as f64
        }
    }

    fn total_variance(&self) -> Result<f64> {
        Ok(self.levels.iter().map(|l| l.mean_variance().1).sum())
    }

    fn report(&self) -> Result<MlqmcReport> {
        let levels: Vec<LevelReport> = self
            .levels
            .iter()
            .enumerate()
            .map(|(level, lv)| {
                let (q_hat, variance) = lv.mean_variance();
                LevelReport {
                    level,
                    h: lv.discs.params.h(),
                    s: lv.discs.params.s,
                    coarse_h: None,
                    coarse_s: None,
                    n: lv.values.len() as u64,
                    shifts: 1,
                    per_shift: vec![q_hat],
                    q_hat,
                    variance,
                    functional: None,
                    cost_seconds: lv.wall,
                    counters: lv.counters.clone(),
                    rq_iters_median: median(&lv.iterations),
                    rq_histogram: histogram(&lv.iterations),
                }
            })
            .collect();
        Ok(MlqmcReport {
            estimator: self.kind,
            problem: self.hierarchy.problem.name().to_string(),
            seed: self.seed,
            options: self.opts,
            generating_vector: None,
            estimate: levels.iter().map(|l| l.q_hat).sum(),
            total_variance: self.total_variance()?,
            functional_estimate: None,
            functional_variance: None,
            total_cost_seconds: levels.iter().map(|l| l.cost_seconds).sum(),
            total_work: levels.iter().map(|l| l.counters.work).sum(),
            total_solves: levels.iter().map(|l| l.counters.linear_solves()).sum(),
            levels,
            tolerance: None,
            tolerance_achieved: false,
            trajectory: Vec::new(),
        })
    }
}

pub(crate) fn mc_sampler(
    problem: &CoefficientSeries,
    mesh_exponent: u32,
    s: usize,
    seed: u64,
) -> Result<MlmcSampler> {
    let config = HierarchyConfig {
        base_exponent: mesh_exponent,
        truncation: TruncationPolicy::Fixed(s),
        coarse_truncation: None,
    };
    let mut sampler = MlmcSampler::new(problem.clone(), config, seed)?;
    sampler.kind = EstimatorKind::Mc;
    Ok(sampler)
}

/// Plain Monte Carlo with `n` samples on the mesh `2^-mesh_exponent`.
pub fn mc_estimate(
    problem: &CoefficientSeries,
    mesh_exponent: u32,
    s: usize,
    n: u64,
    seed: u64,
) -> Result<MlqmcReport> {
    if n == 0 {
        return Err(Error::TooFewSamples {
            required: 1,
            found: 0,
        });
    }
    let mut sampler = mc_sampler(problem, mesh_exponent, s, seed)?;
    sampler.sample_to(&[n])?;
    sampler.report()
}

/// Multilevel Monte Carlo with `n[l]` samples on level `l`.
pub fn mlmc_estimate(
    problem: &CoefficientSeries,
    config: &HierarchyConfig,
    n: &[u64],
    seed: u64,
) -> Result<MlqmcReport> {
    if n.is_empty() || n.contains(&0) {
        return Err(Error::InvalidParameter(
            "every level needs at least one sample".into(),
        ));
    }
    let mut sampler = MlmcSampler::new(problem.clone(), config.clone(), seed)?;
    sampler.sample_to(n)?;
    sampler.report()
}
