mod config;
mod report;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use config::{CampaignArgs, CampaignConfig};
use std::process::ExitCode;
use tsreach::{load_network, load_series, Dataset, Network};

/// Reachability-based robustness checks for time-series regression networks.
#[derive(Debug, Parser)]
#[command(name = "tsreach", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-window estimated and allowable bounds as a CSV trace (plus JSON next to it).
    Bounds(CampaignArgs),
    /// PR, POR and average runtime over a campaign, with a soundness self-check.
    Verify(CampaignArgs),
    /// One campaign per noise magnitude in --epsilon-list.
    Sweep(CampaignArgs),
    /// Local monotonicity of the estimated bounds.
    Monotonicity(CampaignArgs),
    /// Cross-check reachable bounds against sampling and exact oracles.
    OracleCheck {
        #[command(flatten)]
        args: CampaignArgs,
        /// Evaluate samples on a corrupted copy of the network (its last bias shifted).
        #[arg(long)]
        inject_fault: bool,
    },
}

/// Exit status when the run finished but a soundness check failed.
const EXIT_CHECK_FAILED: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Bounds(args) => {
            let (cfg, net, ds) = load(&args)?;
            report::bounds(&cfg, &net, &ds)
        }
        Command::Verify(args) => {
            let (cfg, net, ds) = load(&args)?;
            report::verify(&cfg, &net, &ds)
        }
        Command::Sweep(args) => {
            let (cfg, net, ds) = load(&args)?;
            report::sweep(&cfg, &net, &ds)
        }
        Command::Monotonicity(args) => {
            let (cfg, net, ds) = load(&args)?;
            report::monotonicity(&cfg, &net, &ds)
        }
        Command::OracleCheck { args, inject_fault } => {
            let (cfg, net, ds) = load(&args)?;
            report::oracle_check(&cfg, &net, &ds, inject_fault)
        }
    }
}

fn load(args: &CampaignArgs) -> Result<(CampaignConfig, Network, Dataset)> {
    let cfg = args.resolve()?;
    let model = cfg.model_path()?;
    let net = load_network(model).with_context(|| format!("loading model {}", model.display()))?;
    let data = cfg.data_path()?;
    let target = cfg.target.as_deref().unwrap_or("target");
    let mut ds = load_series(data, cfg.features.as_deref(), target)
        .with_context(|| format!("loading series {}", data.display()))?;
    if cfg.zscore.unwrap_or(false) {
        ds = ds.zscore()?;
    }
    if ds.num_features() != net.input_features() {
        bail!(
            "network expects {} input features but {} were selected from the data ({})",
            net.input_features(),
            ds.num_features(),
            ds.feature_names.join(", ")
        );
    }
    Ok((cfg, net, ds))
}
