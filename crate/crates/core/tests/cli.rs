use std::path::Path;
use std::process::Command;

use mlqmc_evp::cli::{convergence_study, run_experiment, ExperimentConfig};
use mlqmc_evp::estimators::MlqmcReport;

fn config(out: &Path, extra: &str) -> String {
    format!(
        r#"{{"problem": {{"problem1": {{"decay": 2.0}}}}, "seed": 5, "output_dir": {:?}{extra}}}"#,
        out.to_str().unwrap()
    )
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mlqmc"))
}

#[test]
fn run_writes_reports_that_meet_the_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = ExperimentConfig::from_json(&config(&out, r#", "tolerances": [0.05]"#)).unwrap();
    let outcome = run_experiment(&cfg).unwrap();
    assert!(outcome.success());
    let text = std::fs::read_to_string(out.join("eps_0/report.json")).unwrap();
    let report = MlqmcReport::from_json(&text).unwrap();
    assert!(report.total_variance <= 0.05f64.powi(2) / 2.0);
    assert_eq!(report, outcome.reports[0]);
    assert_eq!(
        MlqmcReport::from_json(&report.to_json().unwrap()).unwrap(),
        report
    );
    assert!(out.join("eps_0/levels.csv").exists());
    let costs = std::fs::read_to_string(out.join("cost_vs_tolerance.csv")).unwrap();
    assert_eq!(costs.lines().count(), 2);
}

/// Drops the `cost_seconds` column, the only wall-clock field.
fn without_timing(csv: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "cost_seconds").unwrap();
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(col);
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn repeated_runs_give_identical_csv_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    let mut tables = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let path = dir.path().join(format!("cfg{k}.json"));
        std::fs::write(&path, config(&out, r#", "tolerances": [0.1, 0.05]"#)).unwrap();
        let status = bin().args(["run", "--config"]).arg(&path).status().unwrap();
        assert!(status.success());
        tables.push(without_timing(
            &std::fs::read_to_string(out.join("eps_1/levels.csv")).unwrap(),
        ));
    }
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn malformed_config_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        config(&out, r#", "tolerances": [0.05], "unknown_key": 1"#),
    )
    .unwrap();
    let result = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert!(!result.status.success());
    assert!(String::from_utf8_lossy(&result.stderr).contains("unknown_key"));
    assert!(!out.exists());

    std::fs::write(&path, "{\"problem\": ").unwrap();
    let result = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert!(!result.status.success());
    assert!(!out.exists());
}

#[test]
fn environment_overrides_seed_and_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(
        &path,
        config(
            &dir.path().join("ignored"),
            r#", "samples": [16], "shifts": 2"#,
        ),
    )
    .unwrap();
    let out = dir.path().join("env_out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&path)
        .env("MLQMC_OUT", &out)
        .env("MLQMC_SEED", "42")
        .status()
        .unwrap();
    assert!(status.success());
    let report =
        MlqmcReport::from_json(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.seed, 42);
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn unreachable_tolerance_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let path = dir.path().join("cfg.json");
    std::fs::write(
        &path,
        config(
            &out,
            r#", "tolerances": [0.01], "adaptive": {"max_level": 1}"#,
        ),
    )
    .unwrap();
    let status = bin().args(["run", "--config"]).arg(&path).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn study_recovers_the_quadratic_eigenvalue_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("study");
    let text = format!(
        r#"{{"problem": {{"constant": {{"a": 1.0}}}}, "tolerances": [0.1], "output_dir": {:?},
            "study": {{"mesh_exponents": [3, 4, 5, 6], "two_grid_coarse_exponent": 3}}}}"#,
        out.to_str().unwrap()
    );
    let study = convergence_study(&ExperimentConfig::from_json(&text).unwrap()).unwrap();
    assert_eq!(study.rates.reference_kind, "analytic");
    assert!(
        (1.8..=2.2).contains(&study.rates.eigenvalue_rate),
        "{}",
        study.rates.eigenvalue_rate
    );
    let tg = study.rates.two_grid_rate.unwrap();
    assert!((1.8..=2.2).contains(&tg), "{tg}");
    let csv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert!(csv.starts_with("h,lambda_h,error_estimate,"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn compare_runs_every_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, config(&out, r#", "tolerances": [0.2]"#)).unwrap();
    let status = bin()
        .args(["compare", "--threads", "2", "--config"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let costs = std::fs::read_to_string(out.join("cost_vs_tolerance.csv")).unwrap();
    for kind in ["mc", "qmc", "mlmc", "mlqmc"] {
        assert!(costs.contains(&format!(",{kind},")), "{kind} missing");
        assert!(out.join(format!("eps_0/{kind}/report.json")).exists());
    }
}
