use std::path::PathBuf;
use std::process::Command as Process;

use regcalc::cli::{render, run, Command, Format, Overrides, Status};
use serde_json::Value;

fn config(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn structured(command: Command, text: &str, overrides: &Overrides) -> Value {
    let mut report = run(command, text, overrides);
    report.elapsed_ms = 0.0;
    serde_json::from_str(&render(&report, Format::Structured)).unwrap()
}

#[test]
fn pointwise_algebra_passes() {
    let report = run(Command::CheckAlgebra, &config("pointwise_ck.toml"), &Overrides::default());
    assert_eq!(report.status, Status::Pass, "{report:?}");
    assert_eq!(report.exit_code, 0);
}

#[test]
fn bundled_circle_glue_meets_tolerance() {
    let report = run(Command::Glue, &config("s1_two_chart.toml"), &Overrides::default());
    assert_eq!(report.exit_code, 0, "{report:?}");
    let result = report.result.unwrap();
    let symbolic = result["law_symbolic"]["max_residual"].as_f64().unwrap();
    assert!(symbolic <= 1e-6, "symbolic residual {symbolic}");
    let grid = result["law_grid"]["max_residual"].as_f64().unwrap();
    assert!(grid <= 1e-3, "grid residual {grid}");
}

#[test]
fn undeclared_chart_is_a_config_error() {
    let text = config("s1_two_chart.toml").replace("B = [\"sin(x1)\"]", "C = [\"sin(x1)\"]");
    let report = run(Command::Glue, &text, &Overrides::default());
    assert_eq!(report.exit_code, 64);
    let err = report.error.unwrap();
    assert_eq!(err.kind, "config");
    assert_eq!(err.at, "connection.locals.C");
}

#[test]
fn syntax_error_reports_line() {
    let report = run(Command::CheckAlgebra, "[index]\nstructure = \n", &Overrides::default());
    assert_eq!(report.exit_code, 64);
    assert!(report.error.unwrap().at.starts_with("line "));
}

#[test]
fn non_positive_tolerance_is_rejected() {
    let overrides = Overrides {
        tol: Some(0.0),
        ..Overrides::default()
    };
    let report = run(Command::CheckAlgebra, &config("pointwise_ck.toml"), &overrides);
    assert_eq!(report.exit_code, 64);
    assert_eq!(report.error.unwrap().at, "settings.tol");
}

#[test]
fn finite_atlas_fails_multiplicity_precondition() {
    let text = config("s1_two_chart.toml").replace("smooth = true", "smooth = false");
    let report = run(Command::Multiplicity, &text, &Overrides::default());
    assert_eq!(report.exit_code, 65);
    let err = report.error.unwrap();
    assert_eq!(err.kind, "precondition");
    assert_eq!(err.at, "smooth atlas");
}

#[test]
fn residual_against_zero_fails() {
    let report = run(Command::Residual, &config("s1_two_chart.toml"), &Overrides::default());
    assert_eq!(report.status, Status::Fail);
    assert_eq!(report.exit_code, 1);
}

#[test]
fn reports_are_deterministic() {
    let overrides = Overrides {
        seed: Some(7),
        ..Overrides::default()
    };
    for command in [Command::BuildPartition, Command::Glue, Command::Multiplicity] {
        let text = config("s1_two_chart.toml");
        let a = structured(command, &text, &overrides);
        let b = structured(command, &text, &overrides);
        assert_eq!(a, b, "{}", command.name());
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}

#[test]
fn report_field_order_is_stable() {
    let report = run(Command::CheckAlgebra, &config("pointwise_ck.toml"), &Overrides::default());
    let text = render(&report, Format::Structured);
    let keys = [
        "\"format_version\"",
        "\"tool\"",
        "\"command\"",
        "\"config_sha256\"",
        "\"settings\"",
        "\"status\"",
        "\"exit_code\"",
        "\"summary\"",
        "\"result\"",
        "\"error\"",
        "\"elapsed_ms\"",
    ];
    let positions: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn every_bundled_config_parses() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        regcalc::cli::config::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

fn binary() -> Process {
    Process::new(env!("CARGO_BIN_EXE_regcalc"))
}

#[test]
fn binary_exit_codes() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let ok = binary()
        .args(["check-algebra", "--config"])
        .arg(dir.join("pointwise_ck.toml"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("check-algebra: PASS"));

    let unknown = binary().args(["frobnicate", "--config", "x.toml"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(64));

    let missing = binary().args(["glue", "--config", "/nonexistent/config.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(64));

    let help = binary().arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn binary_writes_structured_report() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let out = std::env::temp_dir().join(format!("regcalc-report-{}.json", std::process::id()));
    let status = binary()
        .args(["check-algebra", "--format", "structured", "--jobs", "1", "--config"])
        .arg(dir.join("holder_table.toml"))
        .arg("--report")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let printed: Value = serde_json::from_slice(&status.stdout).unwrap();
    assert_eq!(written["config_sha256"], printed["config_sha256"]);
    assert_eq!(written["settings"]["jobs"], 1);
    std::fs::remove_file(&out).ok();
}
