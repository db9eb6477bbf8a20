use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gaussperc_cli::config::{ExperimentConfig, ExperimentKind};
use gaussperc_cli::error::HarnessError;
use gaussperc_cli::plot::{emit_plot, PlotSpec};
use gaussperc_cli::runner::{run, RunOverrides};

#[derive(Parser)]
#[command(name = "gaussperc", version, about = "Monte Carlo lab for excursion-set percolation of smooth Gaussian fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Path to the experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory root (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for trial-level parallelism.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Dump one sampled field as a GPF artifact.
    Sample(RunArgs),
    /// Per-trial existence / uniqueness / duality events.
    Events(RunArgs),
    /// Crossing frequency versus box size.
    CrossingScan(RunArgs),
    /// Crossing frequency versus level, with the critical-level estimate.
    LevelScan(RunArgs),
    /// Point-to-point chemical distances.
    Chemdist(RunArgs),
    /// Tail of the S-statistic over a box.
    STail(RunArgs),
    /// Global-structure success frequency under Bernoulli sites.
    RenormScan(RunArgs),
    /// Field-derived versus Bernoulli domination comparison.
    Domination(RunArgs),
    /// Stretch-factor scaling experiment.
    Stretch(RunArgs),
    /// Validate a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render a CSV table to a deterministic SVG.
    Plot {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// Output SVG path (default: table path with .svg extension).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &PathBuf, expected: ExperimentKind) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::validation("config", &format!("{}: {e}", path.display())))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    if cfg.experiment != expected {
        return Err(HarnessError::validation(
            "experiment",
            &format!("config declares '{}' but the '{}' subcommand was invoked", cfg.experiment.name(), expected.name()),
        ));
    }
    Ok(cfg)
}

fn dispatch_run(args: RunArgs, kind: ExperimentKind) -> Result<(), HarnessError> {
    let cfg = load_config(&args.config, kind)?;
    let overrides = RunOverrides {
        out: args.out,
        seed: args.seed,
        threads: args.threads,
    };
    let manifest = run(cfg, &overrides)?;
    println!("{}", manifest.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Sample(a) => dispatch_run(a, ExperimentKind::Sample),
        Command::Events(a) => dispatch_run(a, ExperimentKind::Events),
        Command::CrossingScan(a) => dispatch_run(a, ExperimentKind::CrossingScan),
        Command::LevelScan(a) => dispatch_run(a, ExperimentKind::LevelScan),
        Command::Chemdist(a) => dispatch_run(a, ExperimentKind::Chemdist),
        Command::STail(a) => dispatch_run(a, ExperimentKind::STail),
        Command::RenormScan(a) => dispatch_run(a, ExperimentKind::RenormScan),
        Command::Domination(a) => dispatch_run(a, ExperimentKind::Domination),
        Command::Stretch(a) => dispatch_run(a, ExperimentKind::Stretch),
        Command::Validate { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| HarnessError::validation("config", &format!("{}: {e}", config.display())))?;
            ExperimentConfig::from_json(&text)?;
            println!("ok");
            Ok(())
        }
        Command::Plot { table, spec, out } => {
            let table_text = std::fs::read_to_string(&table)
                .map_err(|e| HarnessError::validation("table", &format!("{}: {e}", table.display())))?;
            let spec_text = std::fs::read_to_string(&spec)
                .map_err(|e| HarnessError::validation("spec", &format!("{}: {e}", spec.display())))?;
            let plot_spec: PlotSpec = serde_json::from_str(&spec_text)
                .map_err(|e| HarnessError::validation("spec", &e.to_string()))?;
            let svg = emit_plot(&table_text, &plot_spec)?;
            let out = out.unwrap_or_else(|| table.with_extension("svg"));
            std::fs::write(&out, svg)?;
            println!("{}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
