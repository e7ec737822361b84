//! `syntagraph`: build question-schema interaction graphs, run the relation
//! aware encoder, check its gradients and explore the decoupling penalty.
//!
//! Exit codes: 0 success, 1 validation error, 2 parse or I/O error,
//! 3 gradient check above threshold.

mod commands;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "syntagraph", version, about)]
pub struct Cli {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output document path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the interaction graph of a parsed question over a schema.
    BuildGraph(BuildGraphArgs),
    /// Write freshly initialized encoder parameters.
    InitParams(InitParamsArgs),
    /// Run the encoder over a graph document.
    Encode(EncodeArgs),
    /// Compare analytic and central-difference gradients.
    GradCheck(GradCheckArgs),
    /// Gradient descent on the decoupling penalty alone.
    DcTrain(DcTrainArgs),
    /// Cosine similarities between the relation embeddings of a checkpoint.
    SimMatrix(SimMatrixArgs),
}

#[derive(Args, Debug)]
pub struct BuildGraphArgs {
    #[arg(long)]
    pub schema: PathBuf,
    /// CoNLL-U dependency parse of the question.
    #[arg(long)]
    pub parse: PathBuf,
    /// Plain-text question; must agree with the parse tokens.
    #[arg(long)]
    pub question: PathBuf,
}

#[derive(Args, Debug)]
pub struct InitParamsArgs {
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub ffn: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Checkpoint written by `init-params`.
    #[arg(long)]
    pub params: PathBuf,
}

#[derive(Args, Debug)]
pub struct GradCheckArgs {
    /// `model_dim,heads,layers,nodes`.
    #[arg(long)]
    pub dims: Option<String>,
    #[arg(long)]
    pub ffn: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub coords: Option<usize>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, hide = true)]
    pub corrupt_gradient: bool,
}

#[derive(Args, Debug)]
pub struct DcTrainArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SimMatrixArgs {
    #[arg(long)]
    pub params: PathBuf,
}

/// Outcome of a command that ran to completion.
pub enum Status {
    Ok,
    ThresholdExceeded,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<syntagraph::Error>() {
            return if e.is_parse() { 2 } else { 1 };
        }
        if cause.is::<std::io::Error>()
            || cause.is::<toml::de::Error>()
            || cause.is::<serde_json::Error>()
            || cause.is::<csv::Error>()
        {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SYNTAGRAPH_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::ThresholdExceeded) => ExitCode::from(3),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
