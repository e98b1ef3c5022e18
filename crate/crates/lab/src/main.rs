use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nls_lab_cli::{ExperimentConfig, LabError, Scenario};

#[derive(Parser)]
#[command(name = "nls-lab", version, about = "Scattering and reconstruction experiments for inhomogeneous NLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel constants and quadrature cross-checks.
    ValidateKernels(RunArgs),
    /// Horizon convergence of the scattering map.
    Scatter(RunArgs),
    /// Pointwise reconstruction along a σ schedule.
    Recover(RunArgs),
    /// Reconstruction error against measured map distance.
    Stability(RunArgs),
    /// Modified-map recovery and structure residual.
    ModifiedStructure(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; scenario defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; falls back to `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Validate the config and print the effective version, then exit.
    #[arg(long)]
    dry_run: bool,
}

fn execute(scenario: Scenario, args: RunArgs) -> Result<(), LabError> {
    let cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default_for(scenario),
    };
    if cfg.scenario != scenario {
        return Err(LabError::Config(format!(
            "scenario: config is for {}, but the subcommand runs {scenario}",
            cfg.scenario
        )));
    }
    cfg.validate()?;
    if args.dry_run {
        print!("{}", cfg.to_toml_string());
        println!("# config_hash = {}", cfg.hash());
        return Ok(());
    }
    let out = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| LabError::Config("output directory: pass --out or set output_dir".into()))?;
    let summary = nls_lab_cli::run(&cfg, &out)?;
    let failed = summary.checks.iter().filter(|c| !c.passed).count();
    println!(
        "{}: {} checks, {} failed; results in {}",
        summary.scenario,
        summary.checks.len(),
        failed,
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (scenario, args) = match cli.command {
        Command::ValidateKernels(a) => (Scenario::ValidateKernels, a),
        Command::Scatter(a) => (Scenario::ScatterConvergence, a),
        Command::Recover(a) => (Scenario::RecoverySweep, a),
        Command::Stability(a) => (Scenario::StabilityCurve, a),
        Command::ModifiedStructure(a) => (Scenario::ModifiedStructure, a),
    };
    match execute(scenario, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nls-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
