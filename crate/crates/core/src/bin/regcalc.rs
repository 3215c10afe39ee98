use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use regcalc::cli::{render, run_file, Command, Format, Overrides, EXIT_CONFIG};

/// Regularity checks and constructions for affine connections on
/// chart-described manifolds.
#[derive(Parser, Debug)]
#[command(name = "regcalc", version)]
struct Args {
    /// What to run.
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Cells per axis for law, residual and difference grids.
    #[arg(long)]
    grid: Option<usize>,
    /// Tolerance for symbolic law checks and residuals.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Also write the structured report to this file.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let overrides = Overrides {
        grid: args.grid,
        tol: args.tol,
        seed: args.seed,
        jobs: args.jobs,
    };
    let report = run_file(args.command, &args.config, &overrides);
    print!("{}", render(&report, args.format));
    if let Some(path) = &args.report {
        if let Err(e) = std::fs::write(path, render(&report, Format::Structured)) {
            eprintln!("regcalc: cannot write report to {}: {e}", path.display());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    ExitCode::from(report.exit_code as u8)
}
