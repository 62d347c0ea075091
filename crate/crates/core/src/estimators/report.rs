//! Estimator reports and their JSON/CSV forms.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::eigen::SolveStats;
use crate::error::Result;

use super::sampler::SamplingOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Mc,
    Qmc,
    Mlmc,
    Mlqmc,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Mc => "mc",
            EstimatorKind::Qmc => "qmc",
            EstimatorKind::Mlmc => "mlmc",
            EstimatorKind::Mlqmc => "mlqmc",
        })
    }
}

/// Discrete work counters of one level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub eigen_solves: usize,
    pub eigen_linear_solves: usize,
    pub update_linear_solves: usize,
    pub factorizations: usize,
    pub rq_iterations: usize,
    pub restarts: usize,
    pub work: f64,
}

impl Counters {
    pub fn add(&mut self, eigen: &SolveStats, update: &SolveStats, eigen_solves: usize) {
        self.eigen_solves += eigen_solves;
        self.eigen_linear_solves += eigen.linear_solves;
        self.update_linear_solves += update.linear_solves;
        self.factorizations += eigen.factorizations + update.factorizations;
        self.rq_iterations += eigen.rq_iterations;
        self.restarts += eigen.restarts;
        self.work += eigen.work + update.work;
    }

    pub fn linear_solves(&self) -> usize {
        self.eigen_linear_solves + self.update_linear_solves
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalLevel {
    pub per_shift: Vec<f64>,
    pub q_hat: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub h: f64,
    pub s: usize,
    pub coarse_h: Option<f64>,
    pub coarse_s: Option<usize>,
    /// Points per shift (or i.i.d. samples when `shifts == 1`).
    pub n: u64,
    pub shifts: usize,
    pub per_shift: Vec<f64>,
    pub q_hat: f64,
    /// Estimated variance of `q_hat`.
    pub variance: f64,
    pub functional: Option<FunctionalLevel>,
    pub cost_seconds: f64,
    pub counters: Counters,
    pub rq_iters_median: f64,
    pub rq_histogram: BTreeMap<usize, usize>,
}

impl LevelReport {
    /// Work units per sample.
    pub fn unit_cost(&self) -> f64 {
        let samples = (self.n as f64) * self.shifts as f64;
        if samples > 0.0 {
            self.counters.work / samples
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub samples: Vec<u64>,
    pub estimate: f64,
    pub total_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlqmcReport {
    pub estimator: EstimatorKind,
    pub problem: String,
    pub seed: u64,
    pub options: SamplingOptions,
    pub generating_vector: Option<String>,
    pub levels: Vec<LevelReport>,
    pub estimate: f64,
    pub total_variance: f64,
    pub functional_estimate: Option<f64>,
    pub functional_variance: Option<f64>,
    pub total_cost_seconds: f64,
    pub total_work: f64,
    pub total_solves: usize,
    pub tolerance: Option<f64>,
    pub tolerance_achieved: bool,
    pub trajectory: Vec<TrajectoryStep>,
}

impl MlqmcReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn level_rows(&self) -> Vec<LevelRow> {
        self.levels
            .iter()
            .map(|l| LevelRow {
                level: l.level,
                h: l.h,
                s: l.s,
                coarse_h: l.coarse_h,
                coarse_s: l.coarse_s,
                n: l.n,
                r: l.shifts,
                q_hat: l.q_hat,
                v: l.variance,
                cost_seconds: l.cost_seconds,
                solves: l.counters.linear_solves(),
                rq_iters_median: l.rq_iters_median,
            })
            .collect()
    }

    pub fn cost_row(&self, epsilon: f64) -> CostRow {
        CostRow {
            epsilon,
            estimator: self.estimator,
            cost_seconds: self.total_cost_seconds,
            total_solves: self.total_solves,
            estimate: self.estimate,
            total_variance: self.total_variance,
        }
    }
}

/// One row of the per-level CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: usize,
    pub h: f64,
    pub s: usize,
    #[serde(rename = "H")]
    pub coarse_h: Option<f64>,
    #[serde(rename = "S")]
    pub coarse_s: Option<usize>,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "Q_hat")]
    pub q_hat: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub cost_seconds: f64,
    pub solves: usize,
    pub rq_iters_median: f64,
}

/// One row of the cost-versus-tolerance CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub epsilon: f64,
    pub estimator: EstimatorKind,
    pub cost_seconds: f64,
    pub total_solves: usize,
    pub estimate: f64,
    pub total_variance: f64,
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub(crate) fn median(values: &[usize]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

pub(crate) fn histogram(values: &[usize]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for &v in values {
        *h.entry(v).or_insert(0) += 1;
    }
    h
}
