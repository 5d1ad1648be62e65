//! Batch command-line surface for the causal feature-selection pipeline:
//! ingest → align → split → discover/select → fit → evaluate → report,
//! plus synthetic-benchmark and hyperparameter-sweep commands.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use causalsel::regress::Split;
use causalsel::Result;

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "causalsel",
    version,
    about = "Multidata time-series causal feature selection"
)]
struct Cli {
    /// JSON run configuration; flags override individual fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for this run.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Data source (file or directory), overriding the config.
    #[arg(long, global = true)]
    data: Option<PathBuf>,

    /// Discovery/selection target, overriding the config.
    #[arg(long, global = true)]
    target: Option<String>,

    /// Global seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(value: SplitArg) -> Self {
        match value {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate the configured data, printing a summary.
    IngestCheck,
    /// Discover causal parents for every configured target.
    Discover,
    /// Run the configured feature-selection method.
    Select,
    /// Fit a linear model on a stored feature selection.
    Fit {
        /// Path to a selection JSON produced by `select`.
        #[arg(long)]
        selection: PathBuf,
    },
    /// Evaluate a stored model on one split.
    Evaluate {
        /// Path to a model JSON produced by `fit`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Sweep pc_alpha (and optionally alpha_level) against validation R².
    Sweep,
    /// Run the method-comparison benchmark on a synthetic scenario.
    Bench {
        #[arg(long, default_value = "confounder")]
        scenario: String,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
    /// Generate a synthetic ensemble (directory CSVs plus ground truth).
    Synth,
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.output {
        config.output_dir = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.threads = Some(threads);
    }
    if let Some(target) = &cli.target {
        config.targets = vec![target.clone()];
    }
    Ok(config)
}

fn run(cli: &Cli, config: &RunConfig) -> Result<()> {
    let data = cli.data.as_deref();
    let out = cli.output.as_deref();
    match &cli.command {
        Command::IngestCheck => commands::cmd_ingest_check(config, data),
        Command::Discover => commands::cmd_discover(config, data, out),
        Command::Select => commands::cmd_select(config, data, out),
        Command::Fit { selection } => {
            commands::cmd_fit(config, selection, cli.target.as_deref(), data, out)
        }
        Command::Evaluate { model, split } => commands::cmd_evaluate(
            config,
            model,
            Split::from(*split),
            cli.target.as_deref(),
            data,
            out,
        ),
        Command::Sweep => commands::cmd_sweep(config, data, out),
        Command::Bench { scenario, seeds } => commands::cmd_bench(config, scenario, *seeds, out),
        Command::Synth => commands::cmd_synth(config, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            commands::print_error(&e);
            return ExitCode::from(commands::error_exit_code(&e));
        }
    };

    let outcome = match config.threads {
        Some(n) => {
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: cannot build thread pool: {e}");
                    return ExitCode::from(1);
                }
            };
            pool.install(|| run(&cli, &config))
        }
        None => run(&cli, &config),
    };

    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            commands::print_error(&e);
            ExitCode::from(commands::error_exit_code(&e))
        }
    }
}
