use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ctdde::pipeline::{self, Output, Overrides, PipelineError, Status};
use ctdde::repro::{run_repro, SpecSource};
use ctdde::specfile::SpecFile;

/// Simulation and oscillation analysis for x(t+1) - x(t) + sum_k a_k(t) x(h_k(t)) = 0.
///
/// Exit status: 0 verdict or success, 3 inconclusive, 1 error or failed
/// check, 2 invalid spec file or arguments.
#[derive(Parser)]
#[command(name = "ctdde", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate from the spec file's history; writes trajectory.csv.
    Simulate(SpecArgs),
    /// Run every applicable criterion and report a verdict.
    Analyze(SpecArgs),
    /// Coefficient and delay-floor envelopes; writes envelopes.csv.
    Envelopes(SpecArgs),
    /// Check the spec file's certificate and build the bounded solution.
    Bound(SpecArgs),
    /// Reproduce the worked examples.
    Repro(ReproArgs),
}

#[derive(Args)]
struct SpecArgs {
    spec: PathBuf,
    #[command(flatten)]
    out: OutArgs,
    /// Grid points per unit interval.
    #[arg(long = "Q")]
    q: Option<usize>,
    /// Simulation horizon (an integer).
    #[arg(long = "T")]
    t: Option<f64>,
    /// Number of grid shifts alpha = j / count.
    #[arg(long = "alpha-grid")]
    alpha_grid: Option<usize>,
}

#[derive(Args)]
struct ReproArgs {
    /// Directory of example specs to use instead of the built-in ones.
    spec_dir: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
    /// Run a single example.
    #[arg(long)]
    only: Option<String>,
}

#[derive(Args)]
struct OutArgs {
    /// Write report.txt and any CSV files here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(output: &Output, out: Option<&Path>) -> Result<()> {
    print!("{}", output.report);
    let Some(dir) = out else {
        return Ok(());
    };
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let report = std::iter::once(("report.txt".to_string(), output.report.to_string()));
    for (name, contents) in report.chain(output.files.iter().cloned()) {
        let path = dir.join(&name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn exit_code(status: Status) -> ExitCode {
    match status {
        Status::Ok => ExitCode::SUCCESS,
        Status::Inconclusive => ExitCode::from(3),
        Status::Failed => ExitCode::from(1),
    }
}

fn run_spec(args: &SpecArgs, f: fn(&SpecFile) -> Result<Output, PipelineError>) -> ExitCode {
    let overrides = Overrides {
        q: args.q,
        t: args.t,
        alpha_count: args.alpha_grid,
    };
    let result = SpecFile::load(&args.spec)
        .and_then(|s| overrides.apply(&s))
        .map_err(PipelineError::from)
        .and_then(|s| f(&s));
    match result {
        Ok(output) => match emit(&output, args.out.out.as_deref()) {
            Ok(()) => exit_code(output.status),
            Err(e) => fail(e, 1),
        },
        Err(e) => {
            let code = if e.is_schema() { 2 } else { 1 };
            fail(e.into(), code)
        }
    }
}

fn fail(e: anyhow::Error, code: u8) -> ExitCode {
    eprintln!("error: {e:#}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(a) => run_spec(a, pipeline::run_simulate),
        Command::Analyze(a) => run_spec(a, pipeline::run_analyze),
        Command::Envelopes(a) => run_spec(a, pipeline::run_envelopes),
        Command::Bound(a) => run_spec(a, pipeline::run_bound),
        Command::Repro(a) => {
            let src = match &a.spec_dir {
                Some(d) => SpecSource::Dir(d),
                None => SpecSource::Builtin,
            };
            match run_repro(src, a.only.as_deref()) {
                Ok(output) => {
                    if output.status != Status::Ok {
                        eprintln!("failed: {}", output.report.get("failed").unwrap_or("?"));
                    }
                    match emit(&output, a.out.out.as_deref()) {
                        Ok(()) => exit_code(output.status),
                        Err(e) => fail(e, 1),
                    }
                }
                Err(e) => fail(e.into(), 2),
            }
        }
    }
}
