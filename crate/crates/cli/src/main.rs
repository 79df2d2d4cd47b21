//! `cfprobe`: generate counterfactual completion probes, evaluate models on
//! them, and report mutation effects.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use cfprobe_core::datasets::DatasetFormat;
use cfprobe_core::mutations::MutationKind;
use clap::{Args, Parser, Subcommand};

use config::{DatasetSpec, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "cfprobe", version, about = "Counterfactual probes for code-completion models")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel workers (completion requests and sandboxed runs).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Per-run wall-clock limit in seconds (overrides dataset limits).
    #[arg(long, global = true)]
    time_limit: Option<f64>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct DataArgs {
    /// Dataset file (repeatable).
    #[arg(long = "dataset")]
    datasets: Vec<PathBuf>,
    /// Format per dataset: humaneval, mbpp or codecontests. One value
    /// applies to every dataset.
    #[arg(long = "format")]
    formats: Vec<DatasetFormat>,
    /// Mutation kinds, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    kinds: Vec<MutationKind>,
    /// Keep at most this many problems per dataset.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write every applicable mutant of every problem.
    Mutate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also run each mutant against its tests.
        #[arg(long)]
        validate: bool,
    },
    /// Build validated counterfactual pairs and the pair-count table.
    GeneratePairs {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query an endpoint on both sides of every pair and score the results.
    Evaluate {
        /// Output directory of `generate-pairs`.
        #[arg(long)]
        pairs: PathBuf,
        /// Endpoint name from the config, or oracle-perfect / oracle-memorizer / oracle-empty.
        #[arg(long)]
        endpoint: Option<String>,
        /// Completions per pair side.
        #[arg(long)]
        repeat: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mutation-effect tables, correlation matrix and model-size CSV.
    Report {
        /// Effect files written by `evaluate` (repeatable).
        #[arg(long = "effects", required = true)]
        effects: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Relational-operator frequencies over a corpus of Python files.
    Freq {
        /// Corpus directory (repeatable; counts are summed).
        #[arg(long = "corpus", required = true)]
        corpus: Vec<PathBuf>,
        /// Effect files to derive per-direction flip deltas from.
        #[arg(long = "effects")]
        effects: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Mutate { .. } => "mutate",
            Command::GeneratePairs { .. } => "generate-pairs",
            Command::Evaluate { .. } => "evaluate",
            Command::Report { .. } => "report",
            Command::Freq { .. } => "freq",
        }
    }
}

fn apply_data_args(cfg: &mut RunConfig, data: &DataArgs) -> Result<()> {
    if !data.datasets.is_empty() {
        let formats = match data.formats.len() {
            1 => vec![data.formats[0]; data.datasets.len()],
            n if n == data.datasets.len() => data.formats.clone(),
            0 => bail!("--format is required with --dataset"),
            n => bail!("{n} formats given for {} datasets", data.datasets.len()),
        };
        cfg.datasets = data.datasets.iter().zip(formats).map(|(p, f)| DatasetSpec { path: p.clone(), format: f }).collect();
    }
    if !data.kinds.is_empty() {
        cfg.kinds = data.kinds.clone();
    }
    if data.limit.is_some() {
        cfg.limit = data.limit;
    }
    if cfg.datasets.is_empty() {
        bail!("no datasets given (--dataset/--format or [[datasets]] in the config)");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<commands::Outcome> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if cli.config.is_none() || cli.workers.is_some() {
        cfg.sandbox.workers = cfg.workers;
    }
    if cli.time_limit.is_some() {
        cfg.sandbox.time_limit_s = cli.time_limit;
    }
    rayon::ThreadPoolBuilder::new().num_threads(cfg.workers.max(1)).build_global().ok();
    match cli.command {
        Command::Mutate { data, out, validate } => {
            apply_data_args(&mut cfg, &data)?;
            commands::mutate(&cfg, &out, validate)
        }
        Command::GeneratePairs { data, out } => {
            apply_data_args(&mut cfg, &data)?;
            commands::generate_pairs(&cfg, &out)
        }
        Command::Evaluate { pairs, endpoint, repeat, out } => {
            if let Some(r) = repeat {
                cfg.repeat = r;
            }
            commands::evaluate(&cfg, &pairs, endpoint.as_deref(), &out)
        }
        Command::Report { effects, out } => commands::report(&cfg, &effects, &out),
        Command::Freq { corpus, effects, out } => commands::freq(&cfg, &corpus, &effects, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    tracing_subscriber::fmt().with_max_level(level).with_writer(std::io::stderr).init();
    let command = cli.command.name();
    match run(cli) {
        Ok(outcome) => {
            println!("{}", serde_json::to_string(&outcome.summary).unwrap_or_default());
            if outcome.partial {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            let summary = serde_json::json!({
                "status": "error",
                "command": command,
                "error": format!("{e:#}"),
            });
            eprintln!("{summary}");
            ExitCode::from(1)
        }
    }
}
