//! `ctrnli`: validate data, train, predict, ensemble, evaluate and report.
//!
//! Exit codes: 0 success, 1 data or validation failure, 2 usage error,
//! 3 backend error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctrnli_core::checkpoint::{CheckpointError, System};
use ctrnli_core::encode::{Backend, EncodeError};
use ctrnli_core::ensemble::Tasks;
use ctrnli_core::pipeline::ModelError;

/// Bad invocation: missing or unreadable inputs, invalid settings.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "ctrnli", version, about = "Evidence selection and entailment for clinical trial claims")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for per-claim and per-example work.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct DataArgs {
    /// CTR file or directory of CTR files.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Claim file.
    #[arg(long)]
    pub claims: Option<PathBuf>,
    /// Skip claims that reference missing CTRs instead of failing.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SystemArg {
    Pipeline,
    Joint,
}

impl From<SystemArg> for System {
    fn from(s: SystemArg) -> System {
        match s {
            SystemArg::Pipeline => System::Pipeline,
            SystemArg::Joint => System::Joint,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Toy,
    Pretrained,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TasksArg {
    Both,
    Evidence,
    Entailment,
}

impl From<TasksArg> for Tasks {
    fn from(t: TasksArg) -> Tasks {
        match t {
            TasksArg::Both => Tasks::Both,
            TasksArg::Evidence => Tasks::Evidence,
            TasksArg::Entailment => Tasks::Entailment,
        }
    }
}

#[derive(Debug, Args, Clone, Default)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Checkpoint directory to create.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Which system to train.
    #[arg(long, value_enum)]
    pub system: Option<SystemArg>,
    /// Encoder backend.
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Required unless train.seed is set in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Peak AdamW learning rate.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Fraction of steps spent in linear warmup.
    #[arg(long)]
    pub warmup_rate: Option<f64>,
    /// AdamW weight decay.
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Fixed optimizer step budget per model instead of full epochs.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Train only the heads.
    #[arg(long)]
    pub freeze_encoder: bool,
    /// Start from the encoder of an existing checkpoint.
    #[arg(long)]
    pub init_checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct PredictArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Checkpoint directory written by train.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Prediction file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct EnsembleArgs {
    /// Pipeline prediction file.
    #[arg(long)]
    pub pipeline: PathBuf,
    /// Joint prediction file.
    #[arg(long)]
    pub joint: PathBuf,
    /// Combined prediction file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pipeline weight; defaults to 1 minus the joint weight when only that is given.
    #[arg(long)]
    pub w_pipeline: Option<f64>,
    /// Joint weight; defaults to 1 minus the pipeline weight when only that is given.
    #[arg(long)]
    pub w_joint: Option<f64>,
    /// Most sentences kept per claim.
    #[arg(long)]
    pub max_evidence: Option<usize>,
    /// Evidence probability threshold (strict).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Restrict averaging to one task; the other comes from the heavier member.
    #[arg(long, value_enum)]
    pub tasks: Option<TasksArg>,
}

#[derive(Debug, Args, Clone)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Prediction file to score.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Report file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Row label in the table; defaults to the prediction file stem.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args, Clone)]
pub struct ReportArgs {
    /// One or more report files.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Also write the table here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a corpus and claim file for dataset violations.
    Validate(DataArgs),
    /// Train a pipeline or joint system and write a checkpoint.
    Train(TrainArgs),
    /// Predict with a checkpoint.
    Predict(PredictArgs),
    /// Average two prediction files and cap the evidence selection.
    Ensemble(EnsembleArgs),
    /// Score predictions against gold annotations.
    Evaluate(EvaluateArgs),
    /// Render report files as a table.
    Report(ReportArgs),
}

fn is_backend(e: &(dyn std::error::Error + 'static)) -> bool {
    let model = |m: &ModelError| matches!(m, ModelError::Backend(EncodeError::BackendUnavailable(_)));
    if let Some(m) = e.downcast_ref::<ModelError>() {
        return model(m);
    }
    if let Some(CheckpointError::Model(m)) = e.downcast_ref::<CheckpointError>() {
        return model(m);
    }
    matches!(e.downcast_ref::<EncodeError>(), Some(EncodeError::BackendUnavailable(_)))
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 2;
        }
        if is_backend(cause) {
            return 3;
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return 2;
            }
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Backend {
        match b {
            BackendArg::Toy => Backend::Toy,
            BackendArg::Pretrained => Backend::Pretrained,
        }
    }
}
