//! Single- and multilevel Monte Carlo and quasi-Monte Carlo estimators of the
//! expected smallest eigenvalue.

mod adaptive;
mod baselines;
mod hierarchy;
mod mlqmc;
mod report;
mod sampler;

pub use adaptive::{
    adaptive_mc, adaptive_mlmc, adaptive_mlqmc, adaptive_qmc, run_adaptive, run_single_level,
    AdaptiveSettings,
};
pub use baselines::{mc_estimate, mean_and_variance_of_mean, mlmc_estimate, MlmcSampler};
pub use hierarchy::{Hierarchy, HierarchyConfig, LevelDiscs, LevelParams, TruncationPolicy};
pub use mlqmc::{mlqmc_estimate, qmc_single_level, MlqmcSampler};
pub use report::{
    read_csv, write_csv, CostRow, Counters, EstimatorKind, FunctionalLevel, LevelReport, LevelRow,
    MlqmcReport, TrajectoryStep,
};
pub use sampler::{
    functional_of_eigenfunction, sample_level_difference, LevelSample, Reuse, SamplingOptions,
    WarmState,
};

use crate::error::Result;

/// A telescoping estimator that can grow its levels and sample counts.
pub trait MultilevelSampler {
    fn num_levels(&self) -> usize;
    fn samples(&self, level: usize) -> u64;
    /// Brings level `l` to `targets[l]` samples, adding levels as needed.
    fn sample_to(&mut self, targets: &[u64]) -> Result<()>;
    /// Level estimate and the estimated variance of that estimate.
    fn level_mean_variance(&self, level: usize) -> Result<(f64, f64)>;
    /// Deterministic work units per sample.
    fn unit_cost(&self, level: usize) -> f64;
    fn total_variance(&self) -> Result<f64>;
    fn report(&self) -> Result<MlqmcReport>;
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
