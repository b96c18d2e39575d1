use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use tasksel_cli::{cmd_report, cmd_score, cmd_select, RunConfig, DEFAULT_GAMMA};
use tasksel_core::allocation::DEFAULT_BASE;
use tasksel_core::selectors::{KernelKind, DEFAULT_JITTER};

#[derive(Parser)]
#[command(name = "tasksel", version, about = "Task-aware selection of prompts for annotation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute per-example confidence, entropy and margin scores into a cache file.
    Score {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Select a subset and write a JSON manifest.
    Select(SelectArgs),
    /// Print a per-task summary of a manifest.
    Report {
        manifest: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Euclidean,
    Rbf,
    Cosine,
}

#[derive(clap::Args)]
struct SelectArgs {
    /// JSONL pool, one record per line.
    #[arg(long)]
    pool: PathBuf,
    /// Binary embedding sidecar, row-aligned with the pool.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// One of: random, least_confidence, mean_entropy, mean_margin, min_margin,
    /// k_center, facility_location, dpp, active_it, task_diversity,
    /// weighted_task_diversity.
    #[arg(long)]
    strategy: String,
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-task floor for weighted_task_diversity.
    #[arg(long, default_value_t = DEFAULT_BASE)]
    base_allocation: usize,
    /// Kernel for the embedding strategies. Defaults: rbf for facility_location,
    /// euclidean for k_center and dpp (dpp then uses the inner-product Gram).
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    /// RBF bandwidth in exp(-gamma * ||a - b||^2); 0.1 and 0.002 are the usual choices.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// Diagonal jitter added to the DPP kernel (a choice of this tool, not a tuned value).
    #[arg(long, default_value_t = DEFAULT_JITTER)]
    jitter: f64,
    /// Scores cache written by `tasksel score`; skips rescoring.
    #[arg(long)]
    scores_cache: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
}

impl From<SelectArgs> for RunConfig {
    fn from(a: SelectArgs) -> Self {
        RunConfig {
            pool: a.pool,
            embeddings: a.embeddings,
            strategy: a.strategy,
            budget: a.budget,
            seed: a.seed,
            base_allocation: a.base_allocation,
            kernel: a.kernel.map(|k| match k {
                KernelArg::Euclidean => KernelKind::Euclidean,
                KernelArg::Rbf => KernelKind::Rbf,
                KernelArg::Cosine => KernelKind::Cosine,
            }),
            gamma: a.gamma,
            jitter: a.jitter,
            output: a.output,
            scores_cache: a.scores_cache,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Score { pool, output } => {
            let n = cmd_score(&pool, &output)?;
            eprintln!("scored {n} records into {}", output.display());
        }
        Command::Select(args) => {
            let config = RunConfig::from(args);
            let m = cmd_select(&config)?;
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!("selected {} records into {}", m.selected_ids.len(), config.output.display());
        }
        Command::Report { manifest } => print!("{}", cmd_report(&manifest)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
