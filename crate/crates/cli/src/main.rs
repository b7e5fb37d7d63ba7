//! `pyrfix`: preprocessing, training, evaluation, correction,
//! classification and benchmarking of pyramid-encoder repair models.

mod commands;
mod config;
mod diff;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pyrfix::harness::alloc::CountingAlloc;

#[global_allocator]
static ALLOC: CountingAlloc = CountingAlloc;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration or input files; exit code 2.
    Usage(String),
    /// Failure while running; exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<pyrfix::Error> for CliError {
    fn from(e: pyrfix::Error) -> Self {
        use pyrfix::Error as E;
        match e {
            E::Config(_) | E::Parse { .. } | E::Json(_) | E::Empty(_) | E::IdOutOfRange { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "pyrfix", version, about = "Pyramid-encoder seq2seq program repair")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Flat TOML file with model and training keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for evaluation.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Run directory (default: runs/<command>).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct BeamArgs {
    #[arg(long, default_value_t = 5)]
    pub beam_width: usize,
    #[arg(long, default_value_t = 5)]
    pub n_best: usize,
    /// Generated-token limit (default: 1.5 x source length + 10).
    #[arg(long)]
    pub max_len: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tokenize, clean, filter and encode raw pairs into pairs.jsonl.
    Preprocess(commands::PreprocessArgs),
    /// Build vocab.txt from raw pairs.
    BuildVocab(commands::BuildVocabArgs),
    /// Train a repair model.
    Train(commands::TrainArgs),
    /// Beam-search a test set and report repair rates.
    Evaluate(commands::EvaluateArgs),
    /// Print ranked corrections for one source file.
    Correct(commands::CorrectArgs),
    /// Train and score a fault classifier on a labeled set.
    Classify(commands::ClassifyArgs),
    /// Pyramid versus regular encoder throughput and memory slope.
    Benchmark(commands::BenchmarkArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
