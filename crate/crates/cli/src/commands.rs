use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use enn_core::data::{self, MnistSplit, SequenceDataset};
use enn_core::grad::GradCheckInstance;
use enn_core::model::{evaluate, io, train, EnnModel, Evaluation, RnnModel, SequenceModel, TrainReport, Trainable};
use enn_core::monitor::{self, TraceSnapshot};
use enn_core::{EnnError, GradCheckReport, Matrix};

use crate::artifacts;
use crate::config::{ModelKind, RunConfig, TaskKind};
use crate::{CliError, METRICS_HEADER};

/// Train, validation and test splits for the configured task.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub train: SequenceDataset,
    pub val: SequenceDataset,
    pub test: SequenceDataset,
}

fn data_err(e: EnnError) -> CliError {
    CliError::Data(e.to_string())
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn ensure_out(cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", cfg.out.display())))
}

pub fn load_task(cfg: &RunConfig) -> Result<TaskData, CliError> {
    match cfg.task {
        TaskKind::Mnist => {
            let dir = &cfg.mnist_dir;
            for name in ["train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"] {
                if !dir.join(name).is_file() {
                    return Err(CliError::Data(format!("{} not found (set mnist_dir)", dir.join(name).display())));
                }
            }
            let train_all = data::load_mnist(dir, MnistSplit::Train).map_err(data_err)?;
            let test_all = data::load_mnist(dir, MnistSplit::Test).map_err(data_err)?;
            let s = data::subset_and_split(&train_all, cfg.train_n, 0, cfg.val_fraction, cfg.cell.seed).map_err(data_err)?;
            let t = data::subset_and_split(&test_all, 0, cfg.test_n, 0.0, cfg.cell.seed).map_err(data_err)?;
            Ok(TaskData { train: s.train, val: s.val, test: t.test })
        }
        TaskKind::Copy => {
            let total = cfg.copy_train_n + cfg.copy_test_n;
            let all = data::make_copy_task(total, cfg.copy_steps, cfg.copy_dim, cfg.copy_delay, cfg.cell.seed)
                .map_err(data_err)?;
            let s = data::subset_and_split(&all, cfg.copy_train_n, cfg.copy_test_n, cfg.val_fraction, cfg.cell.seed)
                .map_err(data_err)?;
            Ok(TaskData { train: s.train, val: s.val, test: s.test })
        }
    }
}

fn metrics_csv(report: &TrainReport) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for m in &report.metrics {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            m.epoch, m.train_loss, m.train_acc, m.val_loss, m.val_acc, m.wall_time_s
        );
    }
    out
}

fn confusion_csv(confusion: &[Vec<usize>]) -> String {
    let mut out = String::from("true\\pred");
    for j in 0..confusion.len() {
        let _ = write!(out, ",{j}");
    }
    out.push('\n');
    for (i, row) in confusion.iter().enumerate() {
        let _ = write!(out, "{i}");
        for n in row {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
    }
    out
}

fn print_confusion(confusion: &[Vec<usize>]) {
    for row in confusion {
        let cells: Vec<String> = row.iter().map(|n| format!("{n:>5}")).collect();
        println!("  {}", cells.join(""));
    }
}

/// What a training run produced.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub report: TrainReport,
    pub test: Evaluation,
    pub param_count: usize,
}

fn enn_model(cfg: &RunConfig) -> Result<EnnModel, CliError> {
    Ok(EnnModel::new(cfg.cell.clone(), cfg.classes())?)
}

fn rnn_model(cfg: &RunConfig) -> RnnModel {
    RnnModel::new(cfg.cell.input_dim, cfg.cell.hidden_dim, cfg.classes(), cfg.cell.seed)
}

fn train_and_save<M: SequenceModel>(cfg: &RunConfig, model: &mut M, data: &TaskData) -> Result<TrainSummary, CliError> {
    let report = train(model, &cfg.train, &data.train, &data.val)?;
    io::save_params(model.params(), &cfg.out.join(artifacts::PARAMS))?;
    write(&cfg.out.join(artifacts::METRICS), metrics_csv(&report))?;
    write(&cfg.out.join(artifacts::TRACE_STATS), monitor::stats_csv(&report.snapshots))?;
    if let (Some(first), Some(last)) = (report.snapshots.first(), report.snapshots.last()) {
        let (lo, hi) = (cfg.cell.clip_lo, cfg.cell.clip_hi);
        let span = hi - lo;
        write(&cfg.out.join(artifacts::TRACE_INITIAL), monitor::encode_pgm(&first.trace, lo, hi)?)?;
        write(&cfg.out.join(artifacts::TRACE_FINAL), monitor::encode_pgm(&last.trace, lo, hi)?)?;
        write(&cfg.out.join(artifacts::TRACE_DIFF), monitor::encode_pgm(&monitor::diff(first, last)?, -span, span)?)?;
    }
    let test = evaluate(model, &data.test, cfg.train.batch_size)?;
    Ok(TrainSummary { report, test, param_count: model.params().param_count() })
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary, CliError> {
    let data = load_task(cfg)?;
    ensure_out(cfg)?;
    write(&cfg.out.join(artifacts::MANIFEST), cfg.to_manifest())?;
    println!(
        "training {} on {} ({} train / {} val / {} test), seed {}",
        cfg.model.as_str(),
        cfg.task.as_str(),
        data.train.len(),
        data.val.len(),
        data.test.len(),
        cfg.cell.seed
    );
    let summary = match cfg.model {
        ModelKind::Enn => train_and_save(cfg, &mut enn_model(cfg)?, &data)?,
        ModelKind::Rnn => train_and_save(cfg, &mut rnn_model(cfg), &data)?,
    };
    for m in &summary.report.metrics {
        println!(
            "epoch {:>3}  loss {:.4}  acc {:.4}  val_loss {:.4}  val_acc {:.4}  {:.1}s",
            m.epoch, m.train_loss, m.train_acc, m.val_loss, m.val_acc, m.wall_time_s
        );
    }
    println!("parameters: {}", summary.param_count);
    println!("best epoch: {}", summary.report.best_epoch);
    println!("test accuracy: {}", summary.test.accuracy);
    println!("test loss: {}", summary.test.loss);
    println!("artifacts written to {}", cfg.out.display());
    Ok(summary)
}

fn load_into<P: Trainable>(params: &mut P, path: &Path) -> Result<(), CliError> {
    let tensors = io::load_tensors(path).map_err(|e| CliError::Artifact(e.to_string()))?;
    params.assign(&tensors).map_err(|e| CliError::Artifact(e.to_string()))
}

fn eval_with<M: SequenceModel>(cfg: &RunConfig, model: &mut M, params: &Path, test: &SequenceDataset) -> Result<Evaluation, CliError> {
    load_into(model.params_mut(), params)?;
    Ok(evaluate(model, test, cfg.train.batch_size)?)
}

pub fn cmd_eval(cfg: &RunConfig, params: &Path) -> Result<Evaluation, CliError> {
    let data = load_task(cfg)?;
    let eval = match cfg.model {
        ModelKind::Enn => eval_with(cfg, &mut enn_model(cfg)?, params, &data.test)?,
        ModelKind::Rnn => eval_with(cfg, &mut rnn_model(cfg), params, &data.test)?,
    };
    ensure_out(cfg)?;
    write(&cfg.out.join(artifacts::CONFUSION), confusion_csv(&eval.confusion))?;
    println!("test accuracy: {}", eval.accuracy);
    println!("test loss: {}", eval.loss);
    println!("confusion (rows: true class, columns: predicted):");
    print_confusion(&eval.confusion);
    Ok(eval)
}

/// Pinned-trace report. Fails with [`CliError::CheckFailed`] when any block
/// exceeds the threshold.
pub fn cmd_gradcheck(cfg: &RunConfig, break_gradients: bool) -> Result<GradCheckReport, CliError> {
    let base = enn_core::CellConfig {
        input_dim: cfg.gradcheck_input_dim,
        hidden_dim: cfg.gradcheck_hidden_dim,
        memory_size: cfg.gradcheck_memory_size,
        ..cfg.cell.clone()
    };
    let inst = GradCheckInstance::sample(
        &base,
        cfg.gradcheck_classes,
        cfg.gradcheck_steps,
        cfg.gradcheck_batch,
        1e-3,
        cfg.cell.seed,
    )?;
    let (pinned, free) = inst.check_with(cfg.gradcheck_epsilon, |g| {
        if break_gradients {
            let v = g.cell.w_u.get(0, 0);
            g.cell.w_u.set(0, 0, 1.5 * v + 1e-3);
        }
    })?;
    println!(
        "gradient check: d={} h={} N={} T={} B={} eps={}",
        base.input_dim, base.hidden_dim, base.memory_size, cfg.gradcheck_steps, cfg.gradcheck_batch, cfg.gradcheck_epsilon
    );
    println!("{:<12} {:>14} {:>14}", "block", "max_rel_err", "free_traj");
    for (p, f) in pinned.blocks.iter().zip(&free.blocks) {
        println!("{:<12} {:>14.3e} {:>14.3e}", p.name, p.max_rel_error, f.max_rel_error);
    }
    println!("threshold {:e}: {}", pinned.threshold, if pinned.passed() { "PASS" } else { "FAIL" });
    if pinned.passed() {
        Ok(pinned)
    } else {
        Err(CliError::CheckFailed)
    }
}

/// Runs one eval batch of the test split from a fresh trace and reports the
/// trace it leaves behind.
pub fn cmd_inspect_trace(cfg: &RunConfig, params: &Path) -> Result<TraceSnapshot, CliError> {
    if cfg.model != ModelKind::Enn {
        return Err(CliError::Config("inspect-trace needs model = enn".into()));
    }
    let data = load_task(cfg)?;
    let mut model = enn_model(cfg)?;
    load_into(&mut model.params, params)?;
    let n = cfg.train.batch_size.min(data.test.len());
    let batch = data.test.batch(&(0..n).collect::<Vec<_>>())?;
    let mut memory: Option<Matrix> = model.initial_memory();
    model.eval_batch(&mut memory, &batch)?;
    let trace = memory.expect("engram model always has a trace");
    let snap = monitor::snapshot(0, &trace)?;
    println!("trace after {n} test sequences ({}x{}):", trace.rows(), trace.cols());
    println!(
        "  mean_abs {:.6e}  max {:.6e}  min {:.6e}  sparsity {:.4}",
        snap.mean_abs, snap.max, snap.min, snap.sparsity_fraction
    );
    let mut slots: Vec<(usize, f64)> = (0..trace.rows())
        .map(|i| (i, trace.row(i).iter().map(|v| v.abs()).sum::<f64>() / trace.cols() as f64))
        .collect();
    slots.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    println!("  most active slots (mean |H| per row):");
    for (i, v) in slots.iter().take(5) {
        println!("    slot {i:>3}  {v:.6e}");
    }
    ensure_out(cfg)?;
    write(&cfg.out.join(artifacts::INSPECT), monitor::encode_pgm(&trace, cfg.cell.clip_lo, cfg.cell.clip_hi)?)?;
    Ok(snap)
}
