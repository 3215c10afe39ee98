//! Command dispatch and structured reports for the `regcalc` binary.
//!
//! Exit codes: 0 every verdict passes, 1 a verdict fails or a run error
//! occurred, 2 some verdict is inconclusive, 64 the configuration is
//! unusable, 65 a hypothesis of the requested construction fails.

mod commands;
pub mod config;

use std::fmt::Write as _;
use std::time::Instant;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::spaces::Verdict;

pub use config::RunConfig;

pub const FORMAT_VERSION: u32 = 1;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_CONFIG: i32 = 64;
pub const EXIT_PRECONDITION: i32 = 65;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    CheckAlgebra,
    CheckSpaces,
    CheckAtlas,
    BuildPartition,
    Glue,
    Pipeline,
    Multiplicity,
    Residual,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckAlgebra => "check-algebra",
            Command::CheckSpaces => "check-spaces",
            Command::CheckAtlas => "check-atlas",
            Command::BuildPartition => "build-partition",
            Command::Glue => "glue",
            Command::Pipeline => "pipeline",
            Command::Multiplicity => "multiplicity",
            Command::Residual => "residual",
        }
    }

    pub fn from_name(name: &str) -> Option<Command> {
        Command::value_variants().iter().copied().find(|c| c.name() == name)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Structured,
}

/// Command-line overrides of `[settings]`.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },
    #[error("precondition `{hypothesis}` fails: {detail}")]
    Precondition { hypothesis: String, detail: String },
    #[error("{0}")]
    Failed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
    ConfigError,
    PreconditionFailed,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => EXIT_PASS,
            Status::Fail | Status::Error => EXIT_FAIL,
            Status::Inconclusive => EXIT_INCONCLUSIVE,
            Status::ConfigError => EXIT_CONFIG,
            Status::PreconditionFailed => EXIT_PRECONDITION,
        }
    }

    pub fn from_verdict(v: Verdict) -> Status {
        match v {
            Verdict::Member => Status::Pass,
            Verdict::NotMember => Status::Fail,
            Verdict::Inconclusive => Status::Inconclusive,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
            Status::ConfigError => "CONFIG ERROR",
            Status::PreconditionFailed => "PRECONDITION FAILED",
            Status::Error => "ERROR",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EffectiveSettings {
    pub grid: usize,
    pub tol: f64,
    pub grid_tol: f64,
    pub seed: u64,
    pub jobs: usize,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorInfo {
    pub kind: &'static str,
    /// Config location or violated hypothesis.
    pub at: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub format_version: u32,
    pub tool: String,
    pub command: String,
    pub config_sha256: String,
    pub settings: Option<EffectiveSettings>,
    pub status: Status,
    pub exit_code: i32,
    pub summary: Vec<String>,
    pub result: Option<Value>,
    pub error: Option<ErrorInfo>,
    pub elapsed_ms: f64,
}

/// What a command produced before it is wrapped into a [`Report`].
pub(crate) struct Outcome {
    pub status: Status,
    pub summary: Vec<String>,
    pub result: Value,
}

pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn settings(cfg: &mut RunConfig, o: &Overrides) -> Result<EffectiveSettings, RunError> {
    let s = &mut cfg.settings;
    if let Some(g) = o.grid {
        s.grid = g;
    }
    if let Some(t) = o.tol {
        s.tol = t;
    }
    if let Some(v) = o.seed {
        s.seed = v;
    }
    if let Some(j) = o.jobs {
        s.jobs = j;
    }
    let bad = |location: &str, message: &str| RunError::Config {
        location: location.into(),
        message: message.into(),
    };
    if !(s.tol > 0.0 && s.tol.is_finite()) {
        return Err(bad("settings.tol", "must be positive"));
    }
    if !(s.grid_tol > 0.0 && s.grid_tol.is_finite()) {
        return Err(bad("settings.grid_tol", "must be positive"));
    }
    if s.grid < 2 {
        return Err(bad("settings.grid", "must be at least 2"));
    }
    if s.samples == 0 {
        return Err(bad("settings.samples", "must be positive"));
    }
    Ok(EffectiveSettings {
        grid: s.grid,
        tol: s.tol,
        grid_tol: s.grid_tol,
        seed: s.seed,
        jobs: s.jobs,
        samples: s.samples,
    })
}

fn blank(command: Command, config_text: &str) -> Report {
    Report {
        format_version: FORMAT_VERSION,
        tool: format!("regcalc {}", env!("CARGO_PKG_VERSION")),
        command: command.name().into(),
        config_sha256: config_hash(config_text),
        settings: None,
        status: Status::Error,
        exit_code: EXIT_FAIL,
        summary: Vec::new(),
        result: None,
        error: None,
        elapsed_ms: 0.0,
    }
}

/// Runs `command` on the configuration text and returns the report; the
/// exit status is `report.exit_code`.
pub fn run(command: Command, config_text: &str, overrides: &Overrides) -> Report {
    let start = Instant::now();
    let mut report = blank(command, config_text);
    let outcome = config::parse(config_text).and_then(|mut cfg| {
        let eff = settings(&mut cfg, overrides)?;
        report.settings = Some(eff.clone());
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(eff.jobs)
            .build()
            .map_err(|e| RunError::Failed(format!("thread pool: {e}")))?;
        pool.install(|| commands::dispatch(command, &cfg))
    });
    match outcome {
        Ok(o) => {
            report.status = o.status;
            report.summary = o.summary;
            report.result = Some(o.result);
        }
        Err(e) => {
            let (status, kind, at, message) = match e {
                RunError::Config { location, message } => (Status::ConfigError, "config", location, message),
                RunError::Precondition { hypothesis, detail } => {
                    (Status::PreconditionFailed, "precondition", hypothesis, detail)
                }
                RunError::Failed(m) => (Status::Error, "run", String::new(), m),
            };
            report.status = status;
            report.error = Some(ErrorInfo { kind, at, message });
        }
    }
    report.exit_code = report.status.exit_code();
    report.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    report
}

/// Reads the config file and runs; an unreadable file is a config error.
pub fn run_file(command: Command, path: &std::path::Path, overrides: &Overrides) -> Report {
    match std::fs::read_to_string(path) {
        Ok(text) => run(command, &text, overrides),
        Err(e) => {
            let mut r = blank(command, "");
            r.status = Status::ConfigError;
            r.exit_code = EXIT_CONFIG;
            r.error = Some(ErrorInfo {
                kind: "config",
                at: path.display().to_string(),
                message: e.to_string(),
            });
            r
        }
    }
}

pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Structured => {
            let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
            s.push('\n');
            s
        }
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "{}: {}", report.command, report.status.label());
            for line in &report.summary {
                let _ = writeln!(s, "  {line}");
            }
            if let Some(e) = &report.error {
                if e.at.is_empty() {
                    let _ = writeln!(s, "  {}", e.message);
                } else {
                    let _ = writeln!(s, "  {}: {}", e.at, e.message);
                }
            }
            let _ = writeln!(s, "  config sha256 {}", report.config_sha256);
            s
        }
    }
}
