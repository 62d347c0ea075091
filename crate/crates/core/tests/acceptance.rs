//! Exit criteria of the crate. Each criterion prints one PASS/FAIL line;
//! the process fails if any criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- 3 7`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mlqmc_evp::discretization::Discretization;
use mlqmc_evp::eigen::{solve_eigenpair, two_grid_eigenpair, DEFAULT_TOL};
use mlqmc_evp::estimators::{
    adaptive_mlqmc, fit_slope, mc_estimate, mlqmc_estimate, qmc_single_level, AdaptiveSettings,
    HierarchyConfig, SamplingOptions,
};
use mlqmc_evp::problems::{constant, problem1, problem2, ParamVector};
use mlqmc_evp::qmc::{
    lattice_point, lattice_points, max_nn_distance, shift_and_center, star_discrepancy_bruteforce,
    GeneratingVector, ShiftSet,
};
use mlqmc_evp::Result;

const SEED: u64 = 0;
const S: usize = 64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn list(values: &[f64], digits: usize, sci: bool) -> String {
    let items: Vec<String> = values
        .iter()
        .map(|v| {
            if sci {
                format!("{v:.digits$e}")
            } else {
                format!("{v:.digits$}")
            }
        })
        .collect();
    format!("[{}]", items.join(", "))
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

/// a = 1, b = 0, c = 1: eigenvalues approach 2 pi^2 from above at rate h^2.
fn fe_rate() -> Result<Outcome> {
    let laplace = constant(1.0, 0.0, 1.0)?;
    let exact = 2.0 * std::f64::consts::PI.powi(2);
    let mut errors = Vec::new();
    for m in 3..=6 {
        let disc = Discretization::new(m, &laplace, 1)?;
        let (pair, _) = solve_eigenpair(&disc, &ParamVector::zeros(1), None, DEFAULT_TOL)?;
        errors.push(pair.lambda - exact);
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = errors.iter().all(|&e| e > 0.0) && ratios.iter().all(|r| (3.5..=4.5).contains(r));
    outcome(
        pass,
        format!(
            "errors {}, ratios {}",
            list(&errors, 3, true),
            list(&ratios, 3, false)
        ),
    )
}

/// H = 1/8, S = 8 two-grid against the direct solve at h = 1/32, s = 64.
fn two_grid_fidelity() -> Result<Outcome> {
    let p = problem1(2.0)?;
    let coarse = Discretization::new(3, &p, 8)?;
    let fine = Discretization::new(5, &p, S)?;
    let z = GeneratingVector::embedded();
    let shifts = ShiftSet::generate(SEED, 0, 1, S);
    let mut worst: f64 = 0.0;
    for k in 0..16 {
        let t = lattice_point(&z.truncated(S)?, 16, k)?;
        let y = shift_and_center(&t, shifts.shift(0))?;
        let (direct, _) = solve_eigenpair(&fine, &y, None, DEFAULT_TOL)?;
        let tg = two_grid_eigenpair(&coarse, &fine, &y, None, DEFAULT_TOL)?;
        worst = worst.max((tg.lambda - direct.lambda).abs());
    }
    outcome(
        worst <= 1e-6,
        format!("max |lambda_tg - lambda_direct| = {worst:.3e} (limit 1e-6)"),
    )
}

/// Eigensolve linear solves with and without warm starts, L = 1 (h_1 = 1/16).
fn warm_start_economy() -> Result<Outcome> {
    let p = problem1(2.0)?;
    let z = GeneratingVector::embedded();
    let run = |warm: bool| {
        let opts = SamplingOptions {
            warm_start: warm,
            ..SamplingOptions::default()
        };
        mlqmc_estimate(
            &p,
            &HierarchyConfig::default(),
            &[256, 256],
            2,
            &z,
            SEED,
            opts,
        )
    };
    let warm = run(true)?;
    let cold = run(false)?;
    let solves = |r: &mlqmc_evp::estimators::MlqmcReport| -> usize {
        r.levels
            .iter()
            .map(|l| l.counters.eigen_linear_solves)
            .sum()
    };
    let (w, c) = (solves(&warm), solves(&cold));
    let diff = (warm.estimate - cold.estimate).abs();
    let pass = (w as f64) <= 0.8 * c as f64 && diff <= 1e-6;
    outcome(
        pass,
        format!(
            "eigensolve linear solves warm {w} vs cold {c} ({:.2}x), |estimate diff| = {diff:.2e}",
            w as f64 / c as f64
        ),
    )
}

/// Variance of the level-0 estimators against N = 2^4 .. 2^10.
fn qmc_variance_rate() -> Result<Outcome> {
    let p = problem1(2.0)?;
    let z = GeneratingVector::embedded();
    let mut log_n = Vec::new();
    let mut log_v_qmc = Vec::new();
    let mut log_v_mc = Vec::new();
    for e in 4..=10u32 {
        let n = 1u64 << e;
        let qmc = qmc_single_level(&p, 3, S, n, 8, &z, SEED, true)?;
        let mc = mc_estimate(&p, 3, S, n, SEED)?;
        log_n.push(e as f64);
        log_v_qmc.push(qmc.total_variance.log2());
        log_v_mc.push(mc.total_variance.log2());
    }
    let qmc_slope = fit_slope(&log_n, &log_v_qmc);
    let mc_slope = fit_slope(&log_n, &log_v_mc);
    let pass = qmc_slope <= -1.2 && (-1.3..=-0.7).contains(&mc_slope);
    outcome(
        pass,
        format!("QMC slope {qmc_slope:.3} (<= -1.2), MC slope {mc_slope:.3} (in [-1.3, -0.7])"),
    )
}

/// Level variances of MLQMC with N_l = 64, R = 8, l = 0..3.
fn level_variance_decay() -> Result<Outcome> {
    let p = problem1(2.0)?;
    let z = GeneratingVector::embedded();
    let r = mlqmc_estimate(
        &p,
        &HierarchyConfig::default(),
        &[64; 4],
        8,
        &z,
        SEED,
        SamplingOptions::default(),
    )?;
    let v: Vec<f64> = r.levels.iter().map(|l| l.variance).collect();
    let ratio = v[3] / v[0];
    let pass = v.windows(2).all(|w| w[1] < w[0]) && ratio <= 0.1;
    outcome(
        pass,
        format!("V = {}, V_3/V_0 = {ratio:.2e}", list(&v, 3, true)),
    )
}

/// MLQMC with L = 2 against single-level QMC on the finest mesh.
fn telescoping_consistency() -> Result<Outcome> {
    let p = problem1(2.0)?;
    let z = GeneratingVector::embedded();
    let ml = mlqmc_estimate(
        &p,
        &HierarchyConfig::default(),
        &[64; 3],
        8,
        &z,
        SEED,
        SamplingOptions::default(),
    )?;
    let sl = qmc_single_level(&p, 5, S, 64, 8, &z, SEED + 1, true)?;
    let diff = (ml.estimate - sl.estimate).abs();
    let bound = 3.0 * (ml.total_variance + sl.total_variance).sqrt();
    outcome(
        diff <= bound,
        format!(
            "MLQMC {:.8} vs QMC {:.8}: |diff| = {diff:.3e}, 3 sd = {bound:.3e}",
            ml.estimate, sl.estimate
        ),
    )
}

/// Total linear solves of adaptive MLQMC against 1/eps.
fn adaptive_cost_slope() -> Result<Outcome> {
    let p = problem1(2.0)?;
    let z = GeneratingVector::embedded();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut costs = Vec::new();
    for eps in [0.04, 0.02, 0.01, 0.005] {
        let r = adaptive_mlqmc(
            &p,
            eps,
            &HierarchyConfig::default(),
            8,
            &z,
            SEED,
            SamplingOptions::default(),
            &AdaptiveSettings::default(),
        )?;
        x.push((1.0 / eps).ln());
        y.push((r.total_solves as f64).ln());
        costs.push((r.levels.len() - 1, r.total_solves));
    }
    let slope = fit_slope(&x, &y);
    outcome(
        (0.7..=1.8).contains(&slope),
        format!("(L, solves) = {costs:?}, slope {slope:.3} (in [0.7, 1.8])"),
    )
}

/// Exact integer lattice points against floating recomputation, and nesting.
fn lattice_oracle() -> Result<Outcome> {
    let z = GeneratingVector::embedded().truncated(8)?;
    let n = 1u64 << 10;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(0..n);
        let p = lattice_point(&z, n, k)?;
        for (x, &zj) in p.iter().zip(z.components()) {
            let f = (k as f64 * zj as f64 / n as f64).fract();
            worst = worst.max((x - f).abs());
        }
    }
    let nested =
        (0..n).all(|k| lattice_point(&z, n, k).ok() == lattice_point(&z, 2 * n, 2 * k).ok());
    outcome(
        worst <= 1e-12 && nested,
        format!("max deviation {worst:.1e}, nesting into 2^11 {nested}"),
    )
}

/// Star discrepancy of equispaced points and nearest-neighbour decay.
fn discrepancy_diagnostics() -> Result<Outcome> {
    let mut exact = true;
    for n in [2usize, 4, 8] {
        let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64]).collect();
        exact &= star_discrepancy_bruteforce(&pts)? == 1.0 / n as f64;
    }
    let z = GeneratingVector::embedded();
    let mut dists = Vec::new();
    for e in 4..=12 {
        dists.push(max_nn_distance(&lattice_points(&z, 1 << e, 2)?)?);
    }
    // Doubling a nested lattice can keep the worst-placed pair, so plateaus are allowed.
    let monotone = dists.windows(2).all(|w| w[1] <= w[0]) && dists[dists.len() - 1] < dists[0];
    outcome(
        exact && monotone,
        format!("D* exact {exact}, nn distances {}", list(&dists, 4, false)),
    )
}

/// Adaptive MLQMC on the island problem at eps = 0.05.
fn island_smoke() -> Result<Outcome> {
    let p = problem2(2.0, 2.0, 2.0, 2.0)?;
    let z = GeneratingVector::embedded();
    let eps = 0.05;
    let r = adaptive_mlqmc(
        &p,
        eps,
        &HierarchyConfig::default(),
        8,
        &z,
        SEED,
        SamplingOptions::default(),
        &AdaptiveSettings::default(),
    )?;
    let v: Vec<f64> = r.levels.iter().map(|l| l.variance).collect();
    let sum: f64 = v.iter().sum();
    let decreasing = v.windows(2).all(|w| w[1] < w[0]);
    let pass = sum <= eps * eps / 2.0 && r.estimate > 0.0 && decreasing;
    outcome(
        pass,
        format!(
            "estimate {:.6}, sum V = {sum:.3e}, V = {}",
            r.estimate,
            list(&v, 3, true)
        ),
    )
}

type Criterion = (u32, &'static str, u64, fn() -> Result<Outcome>);

const CRITERIA: [Criterion; 10] = [
    (1, "deterministic FE rate", 60, fe_rate),
    (2, "two-grid fidelity", 120, two_grid_fidelity),
    (3, "warm-start economy", 300, warm_start_economy),
    (4, "QMC variance rate", 600, qmc_variance_rate),
    (5, "level-variance decay", 600, level_variance_decay),
    (6, "telescoping consistency", 600, telescoping_consistency),
    (7, "adaptive cost slope", 1800, adaptive_cost_slope),
    (8, "lattice arithmetic oracle", 1, lattice_oracle),
    (9, "discrepancy diagnostics", 10, discrepancy_diagnostics),
    (10, "island problem smoke", 900, island_smoke),
];

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (id, name, limit, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} #{id:<2} {name}: {detail} [{:.1}s, limit {limit}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
