//! Command-line front end: `train`, `eval`, `gradcheck` and `inspect-trace`.

mod commands;
mod config;

use std::path::PathBuf;

use thiserror::Error;

pub use commands::{cmd_eval, cmd_gradcheck, cmd_inspect_trace, cmd_train, load_task, TaskData, TrainSummary};
pub use config::{parse_config, ModelKind, RunConfig, TaskKind, KEYS};

/// File names written into a run's output directory.
pub mod artifacts {
    pub const PARAMS: &str = "params.ennw";
    pub const METRICS: &str = "metrics.csv";
    pub const TRACE_STATS: &str = "trace_stats.csv";
    pub const TRACE_INITIAL: &str = "trace_initial.pgm";
    pub const TRACE_FINAL: &str = "trace_final.pgm";
    pub const TRACE_DIFF: &str = "trace_diff.pgm";
    pub const MANIFEST: &str = "run_manifest";
    pub const CONFUSION: &str = "confusion.csv";
    pub const INSPECT: &str = "trace_inspect.pgm";
}

pub const METRICS_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc,wall_time_s";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("gradient check failed")]
    CheckFailed,
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("artifact mismatch: {0}")]
    Artifact(String),
    #[error("{0}")]
    Engine(#[from] enn_core::EnnError),
}

impl CliError {
    /// 0 success, 1 check failure, 2 config, 3 data, 4 artifact mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed => 1,
            CliError::Config(_) | CliError::Engine(_) => 2,
            CliError::Data(_) => 3,
            CliError::Artifact(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Train,
    Eval,
    Gradcheck,
    InspectTrace,
}

/// A parsed command line.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub params: Option<PathBuf>,
    pub break_gradients: bool,
    pub overrides: Vec<(String, String)>,
}

pub const USAGE: &str = "\
usage: enn <command> [--config FILE] [--key value ...]

commands:
  train          train a model and write artifacts into --out
  eval           evaluate --params FILE on the configured test split
  gradcheck      compare BPTT gradients with finite differences
  inspect-trace  run --params FILE over one test batch and report its trace

common flags: --config, --seed, --out, --model enn|rnn, --task mnist|copy
any config key may be given as --key value (dashes or underscores)";

pub fn parse_args<I: IntoIterator<Item = String>>(args: I) -> Result<Invocation, CliError> {
    let mut it = args.into_iter();
    let command = match it.next().as_deref() {
        Some("train") => Command::Train,
        Some("eval") => Command::Eval,
        Some("gradcheck") => Command::Gradcheck,
        Some("inspect-trace") => Command::InspectTrace,
        Some(other) => return Err(CliError::Config(format!("unknown command `{other}`\n{USAGE}"))),
        None => return Err(CliError::Config(USAGE.to_string())),
    };
    let mut inv = Invocation { command, config: None, params: None, break_gradients: false, overrides: Vec::new() };
    while let Some(arg) = it.next() {
        let Some(name) = arg.strip_prefix("--") else {
            return Err(CliError::Config(format!("unexpected argument `{arg}`")));
        };
        if name == "break-gradients" {
            inv.break_gradients = true;
            continue;
        }
        let (name, value) = match name.split_once('=') {
            Some((n, v)) => (n.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| CliError::Config(format!("--{name} needs a value")))?;
                (name.to_string(), v)
            }
        };
        match name.as_str() {
            "config" => inv.config = Some(PathBuf::from(value)),
            "params" => inv.params = Some(PathBuf::from(value)),
            _ => inv.overrides.push((name, value)),
        }
    }
    Ok(inv)
}

/// Reads the config file (if any) and applies the overrides.
pub fn resolve_config(inv: &Invocation) -> Result<RunConfig, CliError> {
    let mut cfg = match &inv.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            parse_config(&text).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
                other => other,
            })?
        }
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&inv.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a full command line and returns the process exit code.
pub fn run<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let result = parse_args(args).and_then(|inv| {
        let cfg = resolve_config(&inv)?;
        match inv.command {
            Command::Train => cmd_train(&cfg).map(|_| ()),
            Command::Eval => cmd_eval(&cfg, required_params(&inv)?).map(|_| ()),
            Command::Gradcheck => cmd_gradcheck(&cfg, inv.break_gradients).map(|_| ()),
            Command::InspectTrace => cmd_inspect_trace(&cfg, required_params(&inv)?).map(|_| ()),
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("enn: {e}");
            e.exit_code()
        }
    }
}

fn required_params(inv: &Invocation) -> Result<&std::path::Path, CliError> {
    inv.params
        .as_deref()
        .ok_or_else(|| CliError::Config("--params FILE is required".into()))
}
