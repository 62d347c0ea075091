//! Configuration-driven experiments: tolerance sweeps, convergence studies
//! and estimator comparisons, written as JSON and CSV.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::discretization::Discretization;
use crate::eigen::{solve_eigenpair, two_grid_eigenpair};
use crate::error::{Error, Result};
use crate::estimators::{
    adaptive_mc, adaptive_mlmc, adaptive_mlqmc, adaptive_qmc, fit_slope, mc_estimate,
    mlmc_estimate, mlqmc_estimate, qmc_single_level, write_csv, AdaptiveSettings, EstimatorKind,
    HierarchyConfig, MlqmcReport, SamplingOptions,
};
use crate::problems::{self, CoefficientSeries, ParamVector, SeriesKind};
use crate::qmc::GeneratingVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Constant {
        a: f64,
        #[serde(default)]
        b: f64,
        #[serde(default = "one")]
        c: f64,
    },
    Problem1 {
        decay: f64,
        #[serde(default)]
        a0: Option<f64>,
    },
    Problem2 {
        decay_a: f64,
        decay_a_exterior: f64,
        decay_b: f64,
        decay_b_exterior: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ProblemConfig {
    pub fn build(&self) -> Result<CoefficientSeries> {
        match *self {
            ProblemConfig::Constant { a, b, c } => problems::constant(a, b, c),
            ProblemConfig::Problem1 { decay, a0: None } => problems::problem1(decay),
            ProblemConfig::Problem1 {
                decay,
                a0: Some(a0),
            } => problems::problem1_with_a0(decay, a0),
            ProblemConfig::Problem2 {
                decay_a,
                decay_a_exterior,
                decay_b,
                decay_b_exterior,
            } => problems::problem2(decay_a, decay_a_exterior, decay_b, decay_b_exterior),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub mesh_exponents: Vec<u32>,
    /// Parameter vector; zeros when absent.
    pub y: Option<Vec<f64>>,
    /// Coarse mesh exponent of the two-grid study; skipped when absent.
    pub two_grid_coarse_exponent: Option<u32>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            mesh_exponents: vec![3, 4, 5, 6],
            y: None,
            two_grid_coarse_exponent: Some(3),
        }
    }
}

/// A complete experiment description. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    /// Tolerance sweep for the adaptive drivers, strictly decreasing.
    #[serde(default)]
    pub tolerances: Vec<f64>,
    /// Fixed samples per level (points per shift for lattice rules); used
    /// when no tolerances are given.
    #[serde(default)]
    pub samples: Vec<u64>,
    #[serde(default = "default_shifts")]
    pub shifts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub options: SamplingOptions,
    #[serde(default)]
    pub hierarchy: HierarchyConfig,
    #[serde(default)]
    pub adaptive: AdaptiveSettings,
    /// Mesh exponent for single-level estimators in `run`.
    #[serde(default)]
    pub mesh_exponent: Option<u32>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub generating_vector: Option<PathBuf>,
    #[serde(default)]
    pub study: StudyConfig,
    /// Estimators run by `compare`.
    #[serde(default = "default_compare")]
    pub compare: Vec<EstimatorKind>,
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::Mlqmc
}

fn default_shifts() -> usize {
    8
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_compare() -> Vec<EstimatorKind> {
    vec![
        EstimatorKind::Mc,
        EstimatorKind::Qmc,
        EstimatorKind::Mlmc,
        EstimatorKind::Mlqmc,
    ]
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tolerances.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.tolerances.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(
                "tolerances must be strictly decreasing".into(),
            ));
        }
        let lattice = matches!(self.estimator, EstimatorKind::Qmc | EstimatorKind::Mlqmc);
        if lattice && self.shifts < 2 {
            return Err(Error::Config(
                "lattice estimators need at least 2 shifts".into(),
            ));
        }
        if self.tolerances.is_empty() && self.samples.is_empty() {
            return Err(Error::Config("give either tolerances or samples".into()));
        }
        if lattice && self.samples.iter().any(|n| !n.is_power_of_two()) {
            return Err(Error::Config(
                "lattice sample counts must be powers of 2".into(),
            ));
        }
        self.hierarchy
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.problem
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn generating_vector(&self) -> Result<GeneratingVector> {
        match &self.generating_vector {
            Some(p) => GeneratingVector::load(p),
            None => Ok(GeneratingVector::embedded()),
        }
    }

    fn single_level_exponent(&self) -> Result<u32> {
        self.mesh_exponent.ok_or_else(|| {
            Error::Config("single-level estimators need `mesh_exponent` in `run`".into())
        })
    }
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(buf)
}

/// Writes `report.json` and `levels.csv` into `dir`.
pub fn write_report(dir: &Path, report: &MlqmcReport) -> Result<()> {
    atomic_write(&dir.join("report.json"), report.to_json()?.as_bytes())?;
    atomic_write(&dir.join("levels.csv"), &csv_bytes(&report.level_rows())?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub reports: Vec<MlqmcReport>,
    /// Tolerances that could not be met, with the reason.
    pub failures: Vec<(f64, String)>,
}

impl RunOutcome {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
            && self
                .reports
                .iter()
                .all(|r| r.tolerance.is_none() || r.tolerance_achieved)
    }
}

fn run_adaptive_kind(
    cfg: &ExperimentConfig,
    kind: EstimatorKind,
    problem: &CoefficientSeries,
    z: &GeneratingVector,
    epsilon: f64,
    mesh_exponent: Option<u32>,
) -> Result<MlqmcReport> {
    let s0 = cfg.hierarchy.truncation_at(0);
    match kind {
        EstimatorKind::Mlqmc => adaptive_mlqmc(
            problem,
            epsilon,
            &cfg.hierarchy,
            cfg.shifts,
            z,
            cfg.seed,
            cfg.options,
            &cfg.adaptive,
        ),
        EstimatorKind::Mlmc => {
            adaptive_mlmc(problem, epsilon, &cfg.hierarchy, cfg.seed, &cfg.adaptive)
        }
        EstimatorKind::Qmc => {
            let m = mesh_exponent.map_or_else(|| cfg.single_level_exponent(), Ok)?;
            adaptive_qmc(
                problem,
                epsilon,
                m,
                s0,
                cfg.shifts,
                z,
                cfg.seed,
                cfg.adaptive.initial_n,
            )
        }
        EstimatorKind::Mc => {
            let m = mesh_exponent.map_or_else(|| cfg.single_level_exponent(), Ok)?;
            adaptive_mc(problem, epsilon, m, s0, cfg.seed, cfg.adaptive.initial_n)
        }
    }
}

fn run_fixed(
    cfg: &ExperimentConfig,
    problem: &CoefficientSeries,
    z: &GeneratingVector,
) -> Result<MlqmcReport> {
    let s0 = cfg.hierarchy.truncation_at(0);
    match cfg.estimator {
        EstimatorKind::Mlqmc => mlqmc_estimate(
            problem,
            &cfg.hierarchy,
            &cfg.samples,
            cfg.shifts,
            z,
            cfg.seed,
            cfg.options,
        ),
        EstimatorKind::Mlmc => mlmc_estimate(problem, &cfg.hierarchy, &cfg.samples, cfg.seed),
        EstimatorKind::Qmc => qmc_single_level(
            problem,
            cfg.single_level_exponent()?,
            s0,
            cfg.samples[0],
            cfg.shifts,
            z,
            cfg.seed,
            cfg.options.warm_start,
        ),
        EstimatorKind::Mc => mc_estimate(
            problem,
            cfg.single_level_exponent()?,
            s0,
            cfg.samples[0],
            cfg.seed,
        ),
    }
}

/// Runs the configured estimator for every tolerance (or once with fixed
/// samples) and writes `eps_<k>/report.json`, `eps_<k>/levels.csv` and
/// `cost_vs_tolerance.csv` under the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let problem = cfg.problem.build()?;
    let z = cfg.generating_vector()?;
    let out = &cfg.output_dir;
    let mut outcome = RunOutcome {
        reports: Vec::new(),
        failures: Vec::new(),
    };
    if cfg.tolerances.is_empty() {
        let report = run_fixed(cfg, &problem, &z)?;
        write_report(out, &report)?;
        outcome.reports.push(report);
        return Ok(outcome);
    }
    let mut cost_rows = Vec::new();
    for (k, &eps) in cfg.tolerances.iter().enumerate() {
        log::info!("{} at tolerance {eps}", cfg.estimator);
        match run_adaptive_kind(cfg, cfg.estimator, &problem, &z, eps, None) {
            Ok(report) => {
                write_report(&out.join(format!("eps_{k}")), &report)?;
                cost_rows.push(report.cost_row(eps));
                outcome.reports.push(report);
            }
            Err(e @ (Error::MaxLevelExceeded(_) | Error::SampleFailed { .. })) => {
                outcome.failures.push((eps, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    atomic_write(&out.join("cost_vs_tolerance.csv"), &csv_bytes(&cost_rows)?)?;
    Ok(outcome)
}

/// For every tolerance, runs adaptive MLQMC first; single-level estimators
/// then use its finest mesh.
pub fn compare(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    if cfg.tolerances.is_empty() {
        return Err(Error::Config("compare needs tolerances".into()));
    }
    let problem = cfg.problem.build()?;
    let z = cfg.generating_vector()?;
    let out = &cfg.output_dir;
    let mut outcome = RunOutcome {
        reports: Vec::new(),
        failures: Vec::new(),
    };
    let mut cost_rows = Vec::new();
    for (k, &eps) in cfg.tolerances.iter().enumerate() {
        let reference = match run_adaptive_kind(cfg, EstimatorKind::Mlqmc, &problem, &z, eps, None)
        {
            Ok(r) => r,
            Err(e) => {
                outcome.failures.push((eps, e.to_string()));
                continue;
            }
        };
        let finest = cfg.hierarchy.base_exponent + reference.levels.len() as u32 - 1;
        for &kind in &cfg.compare {
            let result = if kind == EstimatorKind::Mlqmc {
                Ok(reference.clone())
            } else {
                run_adaptive_kind(cfg, kind, &problem, &z, eps, Some(finest))
            };
            match result {
                Ok(report) => {
                    write_report(
                        &out.join(format!("eps_{k}")).join(kind.to_string()),
                        &report,
                    )?;
                    cost_rows.push(report.cost_row(eps));
                    outcome.reports.push(report);
                }
                Err(e) => outcome.failures.push((eps, format!("{kind}: {e}"))),
            }
        }
    }
    atomic_write(&out.join("cost_vs_tolerance.csv"), &csv_bytes(&cost_rows)?)?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub h: f64,
    pub lambda_h: f64,
    pub error_estimate: f64,
    pub two_grid_lambda: Option<f64>,
    pub two_grid_error: Option<f64>,
    pub solve_seconds: f64,
    pub solve_work: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRates {
    pub reference: f64,
    pub reference_kind: String,
    pub eigenvalue_rate: f64,
    pub two_grid_rate: Option<f64>,
    /// Cost exponent of one direct eigensolve in wall time and in work units.
    pub gamma_seconds: f64,
    pub gamma_work: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOutcome {
    pub rows: Vec<StudyRow>,
    pub rates: StudyRates,
}

/// Eigenvalue convergence under mesh refinement at a fixed parameter, with
/// an optional two-grid column; writes `convergence.csv` and `rates.json`.
pub fn convergence_study(cfg: &ExperimentConfig) -> Result<StudyOutcome> {
    let study = &cfg.study;
    if study.mesh_exponents.len() < 2 {
        return Err(Error::Config("study needs at least two meshes".into()));
    }
    let problem = cfg.problem.build()?;
    let s = cfg.hierarchy.truncation_at(0);
    let y = match &study.y {
        Some(v) => {
            let mut v = v.clone();
            v.resize(s.max(v.len()), 0.0);
            ParamVector::new(v)?
        }
        None => ParamVector::zeros(s),
    };
    let analytic = match (&problem.kind, y.as_slice().iter().all(|&v| v == 0.0)) {
        (SeriesKind::Constant { a, b, c }, _) => {
            Some((2.0 * std::f64::consts::PI.powi(2) * a + b) / c)
        }
        (SeriesKind::Problem1 { a0, .. }, true) => Some(2.0 * std::f64::consts::PI.powi(2) * a0),
        _ => None,
    };
    let tol = cfg.options.rq_tol;
    let coarse = match study.two_grid_coarse_exponent {
        Some(m) => {
            let s_coarse = cfg
                .hierarchy
                .coarse_truncation
                .unwrap_or_else(|| (s as f64).sqrt().ceil() as usize);
            Some(Discretization::new(m, &problem, s_coarse.min(s))?)
        }
        None => None,
    };
    let mut lambdas = Vec::new();
    let mut two_grid = Vec::new();
    let mut seconds = Vec::new();
    let mut work = Vec::new();
    let mut hs = Vec::new();
    for &m in &study.mesh_exponents {
        let disc = Discretization::new(m, &problem, s)?;
        let start = Instant::now();
        let (pair, stats) = solve_eigenpair(&disc, &y, None, tol)?;
        seconds.push(start.elapsed().as_secs_f64());
        work.push(stats.work);
        lambdas.push(pair.lambda);
        hs.push(disc.mesh().h());
        two_grid.push(match &coarse {
            Some(c) if c.mesh().n_per_side() <= disc.mesh().n_per_side() => {
                Some(two_grid_eigenpair(c, &disc, &y, None, tol)?.lambda)
            }
            _ => None,
        });
    }
    let (reference, reference_kind) = match analytic {
        Some(v) => (v, "analytic"),
        None => {
            let k = lambdas.len();
            ((4.0 * lambdas[k - 1] - lambdas[k - 2]) / 3.0, "richardson")
        }
    };
    let rows: Vec<StudyRow> = (0..hs.len())
        .map(|i| StudyRow {
            h: hs[i],
            lambda_h: lambdas[i],
            error_estimate: lambdas[i] - reference,
            two_grid_lambda: two_grid[i],
            two_grid_error: two_grid[i].map(|l| l - reference),
            solve_seconds: seconds[i],
            solve_work: work[i],
        })
        .collect();
    let log_h: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let rate_of = |errs: &[(f64, f64)]| -> Option<f64> {
        let pts: Vec<(f64, f64)> = errs
            .iter()
            .filter(|(_, e)| e.abs() > 0.0)
            .map(|&(lh, e)| (lh, e.abs().ln()))
            .collect();
        (pts.len() >= 2).then(|| {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            fit_slope(&x, &y)
        })
    };
    let direct_errs: Vec<(f64, f64)> = log_h
        .iter()
        .zip(&rows)
        .map(|(&lh, r)| (lh, r.error_estimate))
        .collect();
    let tg_errs: Vec<(f64, f64)> = log_h
        .iter()
        .zip(&rows)
        .filter_map(|(&lh, r)| r.two_grid_error.map(|e| (lh, e)))
        .collect();
    let inv_h: Vec<f64> = log_h.iter().map(|v| -v).collect();
    let log_secs: Vec<f64> = seconds.iter().map(|t| t.max(1e-9).ln()).collect();
    let log_work: Vec<f64> = work.iter().map(|w| w.ln()).collect();
    let rates = StudyRates {
        reference,
        reference_kind: reference_kind.to_string(),
        eigenvalue_rate: rate_of(&direct_errs).unwrap_or(f64::NAN),
        two_grid_rate: rate_of(&tg_errs),
        gamma_seconds: fit_slope(&inv_h, &log_secs),
        gamma_work: fit_slope(&inv_h, &log_work),
    };
    let out = &cfg.output_dir;
    atomic_write(&out.join("convergence.csv"), &csv_bytes(&rows)?)?;
    atomic_write(
        &out.join("rates.json"),
        serde_json::to_string_pretty(&rates)?.as_bytes(),
    )?;
    Ok(StudyOutcome { rows, rates })
}
