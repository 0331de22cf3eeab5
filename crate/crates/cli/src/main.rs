//! Command-line front end: one subcommand per study, one config file per
//! reproducible experiment.

mod runner;
mod scenario;

use clap::{Args, Parser, Subcommand};
use runner::{run, RunError, Session, StudyKind};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "kirchhoff",
    version,
    about = "Spectral laboratory for u'' + m(|A^1/2 u|^2) A u = 0"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts (default: the config's `out_dir`,
    /// else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the optional perturbation field.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress progress lines.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct LemmasArgs {
    /// Optional config; the lemma checks run on built-in fixtures.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the truncated system and emit the trajectory CSV.
    Simulate(CommonArgs),
    /// Reparametrize by s, recover time, and cross-check direct s-integration.
    Reparam(CommonArgs),
    /// Evaluate the uniqueness criterion and scan for degeneracy events.
    Criterion(CommonArgs),
    /// Compare two schemes on the same data; optional perturbed energy trace.
    Agreement(CommonArgs),
    /// Measure the smoothing estimate constants over an eps sweep.
    Mollifier(CommonArgs),
    /// Run the built-in lemma checks.
    Lemmas(LemmasArgs),
    /// Run a batch of studies in parallel, one subdirectory each.
    Sweep(CommonArgs),
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Simulate(a) => run_common(StudyKind::Simulate, a),
        Command::Reparam(a) => run_common(StudyKind::Reparam, a),
        Command::Criterion(a) => run_common(StudyKind::Criterion, a),
        Command::Agreement(a) => run_common(StudyKind::Agreement, a),
        Command::Mollifier(a) => run_common(StudyKind::Mollifier, a),
        Command::Sweep(a) => run_common(StudyKind::Sweep, a),
        Command::Lemmas(a) => {
            let session = match &a.config {
                Some(path) => Session::from_file(path, &a.out, None, a.quiet)?,
                None => Session::without_config(&a.out, a.quiet),
            };
            run(StudyKind::Lemmas, &session)
        }
    }
}

fn run_common(kind: StudyKind, args: CommonArgs) -> Result<(), RunError> {
    let (config_text, base_dir) = runner::read_config(&args.config)?;
    let out = args.out.unwrap_or_else(|| {
        serde_json::from_str::<serde_json::Value>(&config_text)
            .ok()
            .and_then(|v| v.get("out_dir").and_then(|x| x.as_str()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    });
    let session = Session {
        config_text,
        base_dir,
        out_dir: &out,
        seed: args.seed,
        quiet: args.quiet,
    };
    run(kind, &session)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
