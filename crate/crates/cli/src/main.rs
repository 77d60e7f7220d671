//! `drum`: prepare splits, train, mine rules, evaluate, build inductive
//! splits and check gradients.

mod commands;
mod data;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::data::DataArgs;
use crate::settings::SharedArgs;

/// Error caused by bad invocation rather than by the run itself; exits 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "drum", version, about = "Differentiable rule mining for knowledge graphs")]
struct Cli {
    #[command(flatten)]
    shared: SharedArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Valid,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Score with the trained model.
    Model,
    /// Score with mined rules only.
    Rules,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Graph {
    /// Facts and training triples (the default for evaluation).
    #[value(name = "facts+train")]
    FactsTrain,
    /// Facts only.
    Facts,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split a raw training file into facts and training queries.
    Prepare {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train a model; writes model.ckpt, train_log.tsv, vocab.tsv and a manifest.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Run the shards of each batch in parallel.
        #[arg(long)]
        parallel_batch: bool,
    },
    /// Extract sorted rules for every head relation; writes rules.txt.
    Mine {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Vocabulary dump (default: vocab.tsv next to the checkpoint).
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Fixed confidence threshold (default: max(1e-4, 1% of the top path per head)).
        #[arg(long)]
        min_conf: Option<f64>,
    },
    /// Filtered-ranking evaluation; prints a report and a key=value record.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
        #[arg(long, value_enum, default_value = "model")]
        mode: Mode,
        /// Rule file for `--mode rules` (default: rules.txt next to the checkpoint).
        #[arg(long)]
        rules: Option<PathBuf>,
        /// In rules mode, mine the rules from the checkpoint at this
        /// threshold instead of reading a rule file (keeps full precision).
        #[arg(long, conflicts_with = "rules")]
        min_conf: Option<f64>,
        #[arg(long, value_enum, default_value = "facts+train")]
        graph: Graph,
        /// Triple file to build scoring operators from, replacing `--graph`.
        #[arg(long)]
        graph_file: Option<PathBuf>,
        /// Rank tails only, skipping the inverse-relation queries.
        #[arg(long)]
        tail_only: bool,
    },
    /// Remove every training triple that touches a test entity.
    InductiveSplit {
        #[command(flatten)]
        data: DataArgs,
        /// Draw this many new test triples from the training file instead
        /// of using the dataset's test file.
        #[arg(long)]
        test_count: Option<usize>,
    },
    /// Compare analytic and finite-difference gradients of the full loss on
    /// a built-in toy graph.
    Gradcheck {
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let settings = settings::Settings::resolve(&cli.shared)?;
    commands::configure_threads(settings.threads)?;
    match cli.command {
        Command::Prepare { data } => commands::prepare(&settings, &data),
        Command::Train { data, parallel_batch } => commands::train(&settings, &data, parallel_batch),
        Command::Mine {
            checkpoint,
            vocab,
            min_conf,
        } => commands::mine(&settings, &checkpoint, vocab.as_deref(), min_conf),
        Command::Eval {
            checkpoint,
            vocab,
            data,
            split,
            mode,
            rules,
            min_conf,
            graph,
            graph_file,
            tail_only,
        } => commands::eval(
            &settings,
            &commands::EvalArgs {
                checkpoint,
                vocab,
                data,
                split,
                mode,
                rules,
                min_conf,
                graph,
                graph_file,
                tail_only,
            },
        ),
        Command::InductiveSplit { data, test_count } => commands::inductive_split(&settings, &data, test_count),
        Command::Gradcheck { step, tolerance } => commands::gradcheck(&settings, &cli.shared, step, tolerance),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(2));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
