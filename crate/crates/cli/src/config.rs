//! `key = value` run configuration.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use enn_core::{CellConfig, TrainConfig, WeightInit};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Enn,
    Rnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Mnist,
    Copy,
}

impl FromStr for ModelKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "enn" => Ok(ModelKind::Enn),
            "rnn" => Ok(ModelKind::Rnn),
            _ => Err(()),
        }
    }
}

impl FromStr for TaskKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "mnist" => Ok(TaskKind::Mnist),
            "copy" => Ok(TaskKind::Copy),
            _ => Err(()),
        }
    }
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Enn => "enn",
            ModelKind::Rnn => "rnn",
        }
    }
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Mnist => "mnist",
            TaskKind::Copy => "copy",
        }
    }
}

/// Everything a run needs. `cell.input_dim` is derived from the task.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cell: CellConfig,
    pub train: TrainConfig,
    pub model: ModelKind,
    pub task: TaskKind,
    pub mnist_dir: PathBuf,
    pub out: PathBuf,
    pub train_n: usize,
    pub test_n: usize,
    pub val_fraction: f64,
    pub copy_train_n: usize,
    pub copy_test_n: usize,
    pub copy_steps: usize,
    pub copy_delay: usize,
    pub copy_dim: usize,
    pub gradcheck_input_dim: usize,
    pub gradcheck_hidden_dim: usize,
    pub gradcheck_memory_size: usize,
    pub gradcheck_steps: usize,
    pub gradcheck_batch: usize,
    pub gradcheck_classes: usize,
    pub gradcheck_epsilon: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = Self {
            cell: CellConfig::default(),
            train: TrainConfig::default(),
            model: ModelKind::Enn,
            task: TaskKind::Mnist,
            mnist_dir: PathBuf::from("data/mnist"),
            out: PathBuf::from("runs/latest"),
            train_n: 10_000,
            test_n: 2_000,
            val_fraction: 0.1,
            copy_train_n: 2_000,
            copy_test_n: 500,
            copy_steps: 12,
            copy_delay: 10,
            copy_dim: 8,
            gradcheck_input_dim: 3,
            gradcheck_hidden_dim: 4,
            gradcheck_memory_size: 5,
            gradcheck_steps: 3,
            gradcheck_batch: 2,
            gradcheck_classes: 3,
            gradcheck_epsilon: 1e-5,
        };
        cfg.sync_derived();
        cfg
    }
}

/// Every accepted key, in manifest order.
pub const KEYS: &[&str] = &[
    "model",
    "task",
    "seed",
    "hidden_dim",
    "memory_size",
    "hebbian_alpha",
    "hebbian_eta",
    "temperature",
    "sparsity_strength",
    "clip_lo",
    "clip_hi",
    "noise_std",
    "reset_states_per_batch",
    "weight_init",
    "learning_rate",
    "batch_size",
    "epochs",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "early_stop_patience",
    "lr_reduce_factor",
    "lr_reduce_patience",
    "record_wall_time",
    "mnist_dir",
    "out",
    "train_n",
    "test_n",
    "val_fraction",
    "copy_train_n",
    "copy_test_n",
    "copy_steps",
    "copy_delay",
    "copy_dim",
    "gradcheck_input_dim",
    "gradcheck_hidden_dim",
    "gradcheck_memory_size",
    "gradcheck_steps",
    "gradcheck_batch",
    "gradcheck_classes",
    "gradcheck_epsilon",
];

fn typed<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("key `{key}` expects {expected}, got `{value}`"))
}

fn count(key: &str, v: &str) -> Result<usize, String> {
    typed(key, v, "a non-negative integer")
}

fn real(key: &str, v: &str) -> Result<f64, String> {
    let x: f64 = typed(key, v, "a number")?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("key `{key}` expects a finite number, got `{v}`"))
    }
}

fn flag(key: &str, v: &str) -> Result<bool, String> {
    typed(key, v, "true or false")
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let c = &mut self.cell;
        let t = &mut self.train;
        match key {
            "model" => self.model = v.parse().map_err(|_| format!("key `model` expects enn or rnn, got `{v}`"))?,
            "task" => self.task = v.parse().map_err(|_| format!("key `task` expects mnist or copy, got `{v}`"))?,
            "seed" => {
                let s = typed(key, v, "an unsigned 64-bit integer")?;
                c.seed = s;
                t.seed = s;
            }
            "hidden_dim" => c.hidden_dim = count(key, v)?,
            "memory_size" => c.memory_size = count(key, v)?,
            "hebbian_alpha" => c.hebbian_alpha = real(key, v)?,
            "hebbian_eta" => c.hebbian_eta = real(key, v)?,
            "temperature" => c.temperature = real(key, v)?,
            "sparsity_strength" => c.sparsity_strength = real(key, v)?,
            "clip_lo" => c.clip_lo = real(key, v)?,
            "clip_hi" => c.clip_hi = real(key, v)?,
            "noise_std" => c.noise_std = real(key, v)?,
            "reset_states_per_batch" => c.reset_states_per_batch = flag(key, v)?,
            "weight_init" => {
                c.weight_init = match v {
                    "glorot" => WeightInit::Glorot,
                    "identity" => WeightInit::IdentityRecurrent,
                    _ => return Err(format!("key `weight_init` expects glorot or identity, got `{v}`")),
                }
            }
            "learning_rate" => t.learning_rate = real(key, v)?,
            "batch_size" => t.batch_size = count(key, v)?,
            "epochs" => t.epochs = count(key, v)?,
            "adam_beta1" => t.adam_beta1 = real(key, v)?,
            "adam_beta2" => t.adam_beta2 = real(key, v)?,
            "adam_eps" => t.adam_eps = real(key, v)?,
            "early_stop_patience" => t.early_stop_patience = count(key, v)?,
            "lr_reduce_factor" => t.lr_reduce_factor = real(key, v)?,
            "lr_reduce_patience" => t.lr_reduce_patience = count(key, v)?,
            "record_wall_time" => t.record_wall_time = flag(key, v)?,
            "mnist_dir" => self.mnist_dir = PathBuf::from(v),
            "out" => self.out = PathBuf::from(v),
            "train_n" => self.train_n = count(key, v)?,
            "test_n" => self.test_n = count(key, v)?,
            "val_fraction" => self.val_fraction = real(key, v)?,
            "copy_train_n" => self.copy_train_n = count(key, v)?,
            "copy_test_n" => self.copy_test_n = count(key, v)?,
            "copy_steps" => self.copy_steps = count(key, v)?,
            "copy_delay" => self.copy_delay = count(key, v)?,
            "copy_dim" => self.copy_dim = count(key, v)?,
            "gradcheck_input_dim" => self.gradcheck_input_dim = count(key, v)?,
            "gradcheck_hidden_dim" => self.gradcheck_hidden_dim = count(key, v)?,
            "gradcheck_memory_size" => self.gradcheck_memory_size = count(key, v)?,
            "gradcheck_steps" => self.gradcheck_steps = count(key, v)?,
            "gradcheck_batch" => self.gradcheck_batch = count(key, v)?,
            "gradcheck_classes" => self.gradcheck_classes = count(key, v)?,
            "gradcheck_epsilon" => self.gradcheck_epsilon = real(key, v)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        self.sync_derived();
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        let c = &self.cell;
        let t = &self.train;
        match key {
            "model" => self.model.as_str().into(),
            "task" => self.task.as_str().into(),
            "seed" => c.seed.to_string(),
            "hidden_dim" => c.hidden_dim.to_string(),
            "memory_size" => c.memory_size.to_string(),
            "hebbian_alpha" => c.hebbian_alpha.to_string(),
            "hebbian_eta" => c.hebbian_eta.to_string(),
            "temperature" => c.temperature.to_string(),
            "sparsity_strength" => c.sparsity_strength.to_string(),
            "clip_lo" => c.clip_lo.to_string(),
            "clip_hi" => c.clip_hi.to_string(),
            "noise_std" => c.noise_std.to_string(),
            "reset_states_per_batch" => c.reset_states_per_batch.to_string(),
            "weight_init" => match c.weight_init {
                WeightInit::Glorot => "glorot".into(),
                WeightInit::IdentityRecurrent => "identity".into(),
            },
            "learning_rate" => t.learning_rate.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "epochs" => t.epochs.to_string(),
            "adam_beta1" => t.adam_beta1.to_string(),
            "adam_beta2" => t.adam_beta2.to_string(),
            "adam_eps" => t.adam_eps.to_string(),
            "early_stop_patience" => t.early_stop_patience.to_string(),
            "lr_reduce_factor" => t.lr_reduce_factor.to_string(),
            "lr_reduce_patience" => t.lr_reduce_patience.to_string(),
            "record_wall_time" => t.record_wall_time.to_string(),
            "mnist_dir" => self.mnist_dir.display().to_string(),
            "out" => self.out.display().to_string(),
            "train_n" => self.train_n.to_string(),
            "test_n" => self.test_n.to_string(),
            "val_fraction" => self.val_fraction.to_string(),
            "copy_train_n" => self.copy_train_n.to_string(),
            "copy_test_n" => self.copy_test_n.to_string(),
            "copy_steps" => self.copy_steps.to_string(),
            "copy_delay" => self.copy_delay.to_string(),
            "copy_dim" => self.copy_dim.to_string(),
            "gradcheck_input_dim" => self.gradcheck_input_dim.to_string(),
            "gradcheck_hidden_dim" => self.gradcheck_hidden_dim.to_string(),
            "gradcheck_memory_size" => self.gradcheck_memory_size.to_string(),
            "gradcheck_steps" => self.gradcheck_steps.to_string(),
            "gradcheck_batch" => self.gradcheck_batch.to_string(),
            "gradcheck_classes" => self.gradcheck_classes.to_string(),
            "gradcheck_epsilon" => self.gradcheck_epsilon.to_string(),
            _ => unreachable!("get called with unlisted key {key}"),
        }
    }

    pub fn sync_derived(&mut self) {
        self.cell.input_dim = match self.task {
            TaskKind::Mnist => enn_core::data::MNIST_SIDE,
            TaskKind::Copy => self.copy_dim,
        };
    }

    pub fn classes(&self) -> usize {
        match self.task {
            TaskKind::Mnist => 10,
            TaskKind::Copy => self.copy_dim,
        }
    }

    /// Range checks on the merged configuration.
    pub fn validate(&self) -> Result<(), CliError> {
        let cfg_err = |e: enn_core::EnnError| CliError::Config(e.to_string());
        self.cell.validate().map_err(cfg_err)?;
        self.train.validate().map_err(cfg_err)?;
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(CliError::Config(msg.to_string())) };
        check((0.0..1.0).contains(&self.val_fraction), "val_fraction must lie in [0, 1)")?;
        check(self.copy_delay < self.copy_steps, "copy_delay must be shorter than copy_steps")?;
        check(self.copy_dim >= 2, "copy_dim must be at least 2")?;
        check(self.gradcheck_epsilon > 0.0, "gradcheck_epsilon must be positive")?;
        Ok(())
    }

    /// Fully resolved `key = value` listing that parses back to this config.
    pub fn to_manifest(&self) -> String {
        let mut out = String::from("# resolved run configuration\n");
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key));
        }
        out
    }

    /// Applies `--key value` style overrides in order; dashes in keys are
    /// read as underscores.
    pub fn apply_overrides(&mut self, overrides: &[(String, String)]) -> Result<(), CliError> {
        for (k, v) in overrides {
            let key = k.replace('-', "_");
            self.set(&key, v)
                .map_err(|m| CliError::Config(format!("--{k}: {m}")))?;
        }
        Ok(())
    }
}

/// Parses a config file. Blank lines and `#` comments are ignored, a key may
/// appear once, unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| CliError::Config(format!("line {line_no}: {m}"));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        cfg.set(key, value).map_err(err)?;
    }
    Ok(cfg)
}
