use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lazygap::config::{ExperimentConfig, ExperimentKind};
use lazygap::record::{write_output, write_records};
use lazygap::{accept, harness, HarnessError, Result};

#[derive(Parser)]
#[command(name = "lazygap", version, about = "Random features, neural tangent and trained networks on quadratic models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Asymptotic predictions over the ρ grid.
    Theory(RunArgs),
    /// Predictions against finite-size oracles.
    Sweep(RunArgs),
    /// SGD evolution curves for NN and NT.
    Sgd(RunArgs),
    /// Critical points and saddle certificates.
    Landscape(RunArgs),
    /// Acceptance suite.
    Accept(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Data CSV; companion files are written next to it. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paper_scale: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let (kind, args) = match cli.command {
        Command::Theory(a) => (ExperimentKind::TheoryTable, a),
        Command::Sweep(a) => (ExperimentKind::Sweep, a),
        Command::Sgd(a) => (ExperimentKind::SgdEvolution, a),
        Command::Landscape(a) => (ExperimentKind::Landscape, a),
        Command::Accept(a) => (ExperimentKind::Accept, a),
    };
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    cfg.bind_experiment(kind)?;
    if let Some(seed) = args.seed {
        cfg.override_seed(seed);
    }
    if args.paper_scale {
        cfg.apply_paper_scale();
    }
    cfg.validate()?;

    let mut failed = 0;
    let output = if kind == ExperimentKind::Accept {
        let mut reports = Vec::new();
        for id in accept::CRITERIA {
            let r = accept::run_criterion(id);
            println!("{}", r.line());
            reports.push(r);
        }
        failed = reports.iter().filter(|r| !r.passed).count();
        accept::to_output(&cfg, &reports)
    } else {
        harness::run(&cfg)?
    };
    match args.out.or(cfg.output_path.as_ref().map(PathBuf::from)) {
        Some(path) => write_output(&path, &output)?,
        None if kind != ExperimentKind::Accept => {
            let stdout = std::io::stdout();
            write_records(stdout.lock(), &output.records)?;
            stdout.lock().flush().map_err(|source| HarnessError::Io { path: "<stdout>".into(), source })?;
        }
        None => {}
    }
    if failed > 0 {
        return Err(HarnessError::Acceptance { failed });
    }
    Ok(())
}
