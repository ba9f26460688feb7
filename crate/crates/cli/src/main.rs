use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use markup_did_cli::config::{RunConfig, Stage};
use markup_did_cli::exit_code;
use markup_did_cli::pipeline::Pipeline;

#[derive(Parser)]
#[command(name = "markup-did", version, about = "Markups, takeovers and staggered difference-in-differences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run the stages listed in the configuration.
    Run,
    /// Generate a synthetic panel with known truth.
    Simulate,
    /// Estimate production functions by industry.
    EstimateProdfn,
    /// Compute firm-level markups.
    Markups,
    /// Classify deals as horizontal, vertical or other.
    Classify,
    /// Group-time effects and their aggregates.
    Did,
    /// Event-study coefficients and the pretrend test.
    EventStudy,
    /// Matched-sample two-way fixed-effects DiD.
    PsmDid,
    /// Dashboard and event-study plot data.
    Report,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::Run => return None,
            Command::Simulate => Stage::Simulate,
            Command::EstimateProdfn => Stage::EstimateProdfn,
            Command::Markups => Stage::Markups,
            Command::Classify => Stage::Classify,
            Command::Did => Stage::Did,
            Command::EventStudy => Stage::EventStudy,
            Command::PsmDid => Stage::PsmDid,
            Command::Report => Stage::Report,
        })
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::from_entries(Default::default(), &std::env::current_dir()?)?,
    }
    .with_overrides(cli.seed, cli.out.clone());
    let stages = match cli.command.stage() {
        Some(s) => vec![s],
        None => cfg.stages.clone(),
    };
    Pipeline::new(&cfg, &stages).run()?;
    eprintln!("outputs in {}", cfg.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
