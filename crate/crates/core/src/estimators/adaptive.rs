//! Tolerance-driven choice of the number of levels and samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::CoefficientSeries;
use crate::qmc::GeneratingVector;

use super::baselines::{mc_sampler, MlmcSampler};
use super::hierarchy::HierarchyConfig;
use super::mlqmc::{qmc_sampler, MlqmcSampler};
use super::report::{MlqmcReport, TrajectoryStep};
use super::sampler::SamplingOptions;
use super::MultilevelSampler;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptiveSettings {
    pub initial_n: u64,
    /// Largest admissible finest level `L`.
    pub max_level: usize,
    /// Assumed decay rate of the level differences in `h`.
    pub bias_rate: f64,
}

impl Default for AdaptiveSettings {
    fn default() -> Self {
        Self {
            initial_n: 16,
            max_level: 6,
            bias_rate: 2.0,
        }
    }
}

fn record<S: MultilevelSampler>(sampler: &S, trajectory: &mut Vec<TrajectoryStep>) -> Result<f64> {
    let mut estimate = 0.0;
    for l in 0..sampler.num_levels() {
        estimate += sampler.level_mean_variance(l)?.0;
    }
    let total_variance = sampler.total_variance()?;
    trajectory.push(TrajectoryStep {
        samples: (0..sampler.num_levels())
            .map(|l| sampler.samples(l))
            .collect(),
        estimate,
        total_variance,
    });
    Ok(total_variance)
}

/// Doubles the samples on the level with the best variance reduction per
/// unit of work until the total variance is at most `epsilon^2 / 2`.
fn reduce_variance<S: MultilevelSampler>(
    sampler: &mut S,
    n: &mut [u64],
    epsilon: f64,
    trajectory: &mut Vec<TrajectoryStep>,
) -> Result<()> {
    let target = epsilon * epsilon / 2.0;
    let mut total = record(sampler, trajectory)?;
    while total > target {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (l, &nl) in n.iter().enumerate() {
            let v = sampler.level_mean_variance(l)?.1;
            let score = v / (sampler.unit_cost(l).max(f64::MIN_POSITIVE) * nl as f64);
            if score > best_score {
                best_score = score;
                best = l;
            }
        }
        n[best] *= 2;
        sampler.sample_to(n)?;
        total = record(sampler, trajectory)?;
    }
    Ok(())
}

/// Adaptive multilevel loop: start with levels 0 and 1, reduce the variance,
/// and add levels while the finest correction signals a bias above
/// `epsilon / sqrt(2)`.
pub fn run_adaptive<S: MultilevelSampler>(
    sampler: &mut S,
    epsilon: f64,
    settings: &AdaptiveSettings,
) -> Result<MlqmcReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {epsilon} must be positive"
        )));
    }
    let mut trajectory = Vec::new();
    let mut n = vec![settings.initial_n; 2];
    sampler.sample_to(&n)?;
    let divisor = settings.bias_rate.exp2() - 1.0;
    loop {
        reduce_variance(sampler, &mut n, epsilon, &mut trajectory)?;
        let finest = n.len() - 1;
        let correction = sampler.level_mean_variance(finest)?.0;
        if correction.abs() / divisor <= epsilon / std::f64::consts::SQRT_2 {
            break;
        }
        if finest + 1 > settings.max_level {
            return Err(Error::MaxLevelExceeded(settings.max_level));
        }
        n.push(settings.initial_n);
        sampler.sample_to(&n)?;
    }
    let mut report = sampler.report()?;
    report.tolerance = Some(epsilon);
    report.tolerance_achieved = report.total_variance <= epsilon * epsilon / 2.0;
    report.trajectory = trajectory;
    Ok(report)
}

/// Single-level loop: only the number of samples adapts.
pub fn run_single_level<S: MultilevelSampler>(
    sampler: &mut S,
    epsilon: f64,
    initial_n: u64,
) -> Result<MlqmcReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {epsilon} must be positive"
        )));
    }
    let mut trajectory = Vec::new();
    let mut n = vec![initial_n];
    sampler.sample_to(&n)?;
    reduce_variance(sampler, &mut n, epsilon, &mut trajectory)?;
    let mut report = sampler.report()?;
    report.tolerance = Some(epsilon);
    report.tolerance_achieved = report.total_variance <= epsilon * epsilon / 2.0;
    report.trajectory = trajectory;
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
pub fn adaptive_mlqmc(
    problem: &CoefficientSeries,
    epsilon: f64,
    config: &HierarchyConfig,
    shifts: usize,
    z: &GeneratingVector,
    seed: u64,
    opts: SamplingOptions,
    settings: &AdaptiveSettings,
) -> Result<MlqmcReport> {
    let mut sampler = MlqmcSampler::new(problem.clone(), config.clone(), shifts, z, seed, opts)?;
    run_adaptive(&mut sampler, epsilon, settings)
}

pub fn adaptive_mlmc(
    problem: &CoefficientSeries,
    epsilon: f64,
    config: &HierarchyConfig,
    seed: u64,
    settings: &AdaptiveSettings,
) -> Result<MlqmcReport> {
    let mut sampler = MlmcSampler::new(problem.clone(), config.clone(), seed)?;
    run_adaptive(&mut sampler, epsilon, settings)
}

/// Single-level QMC on the given mesh until the variance meets `epsilon`.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_qmc(
    problem: &CoefficientSeries,
    epsilon: f64,
    mesh_exponent: u32,
    s: usize,
    shifts: usize,
    z: &GeneratingVector,
    seed: u64,
    initial_n: u64,
) -> Result<MlqmcReport> {
    let mut sampler = qmc_sampler(problem, mesh_exponent, s, shifts, z, seed, false)?;
    run_single_level(&mut sampler, epsilon, initial_n)
}

/// Single-level MC on the given mesh until the variance meets `epsilon`.
pub fn adaptive_mc(
    problem: &CoefficientSeries,
    epsilon: f64,
    mesh_exponent: u32,
    s: usize,
    seed: u64,
    initial_n: u64,
) -> Result<MlqmcReport> {
    let mut sampler = mc_sampler(problem, mesh_exponent, s, seed)?;
    run_single_level(&mut sampler, epsilon, initial_n)
}
