//! Sequence classification on top of the engram cell (and a baseline RNN).

mod adam;
pub mod io;
mod rnn;
mod train;

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::cell::{self, CellConfig, CellParams, EffectiveMemory, Mode};
use crate::error::{ensure, EnnError, Result};
use crate::grad::{self, UnrollTape};
use crate::linalg::{self, Matrix, Vector};

pub use adam::Adam;
pub use io::NamedTensor;
pub use rnn::{baseline_rnn_step, RnnModel, RnnParams};
pub use train::{evaluate, train, EpochMetrics, Evaluation, TrainConfig, TrainReport};

/// Floor inside the log of the cross-entropy.
pub const LOG_FLOOR: f64 = 1e-12;

/// Sequences per gradient-accumulation chunk. The partition is fixed so the
/// reduction order, and hence every bit of the result, does not depend on how
/// many worker threads run.
const GRAD_CHUNK: usize = 16;

/// Read-only view of one parameter buffer.
#[derive(Debug, Clone, Copy)]
pub struct TensorView<'a> {
    pub name: &'static str,
    pub rows: usize,
    /// `None` for vectors.
    pub cols: Option<usize>,
    pub data: &'a [f64],
}

impl TensorView<'_> {
    pub fn dims(&self) -> Vec<usize> {
        match self.cols {
            Some(c) => vec![self.rows, c],
            None => vec![self.rows],
        }
    }
}

pub(crate) fn mat_view<'a>(name: &'static str, m: &'a Matrix) -> TensorView<'a> {
    TensorView { name, rows: m.rows(), cols: Some(m.cols()), data: m.as_slice() }
}

pub(crate) fn vec_view<'a>(name: &'static str, v: &'a Vector) -> TensorView<'a> {
    TensorView { name, rows: v.len(), cols: None, data: v }
}

/// A fixed, ordered set of named parameter buffers.
pub trait Trainable: Clone + Send + Sync {
    fn tensors(&self) -> Vec<TensorView<'_>>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// `self += other`, buffer by buffer.
    fn accumulate(&mut self, other: &Self) {
        let src: Vec<Vec<f64>> = other.tensors().iter().map(|t| t.data.to_vec()).collect();
        for (dst, s) in self.tensors_mut().into_iter().zip(src) {
            linalg::axpy(1.0, &s, dst);
        }
    }

    /// Copies buffers loaded from a parameter file, checking names and shapes.
    fn assign(&mut self, loaded: &[NamedTensor]) -> Result<()> {
        let expect: Vec<(String, Vec<usize>)> =
            self.tensors().iter().map(|t| (t.name.to_string(), t.dims())).collect();
        ensure!(
            loaded.len() == expect.len(),
            "parameter file holds {} buffers, model expects {}",
            loaded.len(),
            expect.len()
        );
        for (l, (name, dims)) in loaded.iter().zip(&expect) {
            ensure!(
                &l.name == name && &l.dims == dims,
                "buffer {} {:?} does not match expected {} {:?}",
                l.name,
                l.dims,
                name,
                dims
            );
        }
        for (dst, l) in self.tensors_mut().into_iter().zip(loaded) {
            dst.copy_from_slice(&l.data);
        }
        Ok(())
    }
}

/// Engram cell plus a softmax head on the final hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub cell: CellParams,
    /// `C × h`
    pub w_out: Matrix,
    pub b_out: Vector,
}

impl ClassifierParams {
    pub fn zeros(cfg: &CellConfig, classes: usize) -> Self {
        Self {
            cell: CellParams::zeros(cfg),
            w_out: Matrix::zeros(classes, cfg.hidden_dim),
            b_out: Vector::zeros(classes),
        }
    }

    pub fn init<R: Rng + ?Sized>(cfg: &CellConfig, classes: usize, rng: &mut R) -> Self {
        let cell = CellParams::init(cfg, rng);
        let mut w_out = Matrix::zeros(classes, cfg.hidden_dim);
        cell::glorot_fill(&mut w_out, rng);
        Self { cell, w_out, b_out: Vector::zeros(classes) }
    }

    pub fn num_classes(&self) -> usize {
        self.b_out.len()
    }

    pub fn check_shapes(&self, cfg: &CellConfig) -> Result<()> {
        self.cell.check_shapes(cfg)?;
        ensure!(
            self.w_out.shape() == (self.b_out.len(), cfg.hidden_dim),
            "output head is {:?} with {} biases, hidden size {}",
            self.w_out.shape(),
            self.b_out.len(),
            cfg.hidden_dim
        );
        Ok(())
    }

    /// `h·d + h + h·3h + h + h·h + h + N·h + C·h + C`
    pub fn expected_count(cfg: &CellConfig, classes: usize) -> usize {
        let (d, h, n, c) = (cfg.input_dim, cfg.hidden_dim, cfg.memory_size, classes);
        h * d + h + h * 3 * h + h + h * h + h + n * h + c * h + c
    }
}

impl Trainable for ClassifierParams {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        let c = &self.cell;
        vec![
            mat_view("cell.w_z", &c.w_z),
            vec_view("cell.b_z", &c.b_z),
            mat_view("cell.w_u", &c.w_u),
            vec_view("cell.b_u", &c.b_u),
            mat_view("cell.w_h", &c.w_h),
            vec_view("cell.b_h", &c.b_h),
            mat_view("cell.memory", &c.memory),
            mat_view("head.w_out", &self.w_out),
            vec_view("head.b_out", &self.b_out),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let c = &mut self.cell;
        vec![
            c.w_z.as_mut_slice(),
            &mut c.b_z,
            c.w_u.as_mut_slice(),
            &mut c.b_u,
            c.w_h.as_mut_slice(),
            &mut c.b_h,
            c.memory.as_mut_slice(),
            self.w_out.as_mut_slice(),
            &mut self.b_out,
        ]
    }
}

/// Equal-length sequences, flattened `B × T × d`, with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    inputs: Vec<f64>,
    labels: Vec<usize>,
    steps: usize,
    dim: usize,
}

impl SequenceBatch {
    pub fn new(inputs: Vec<f64>, labels: Vec<usize>, steps: usize, dim: usize) -> Result<Self> {
        ensure!(steps >= 1 && dim >= 1, "batch needs at least one step and one feature");
        ensure!(
            inputs.len() == labels.len() * steps * dim,
            "batch holds {} values for {} sequences of {steps}x{dim}",
            inputs.len(),
            labels.len()
        );
        Ok(Self { inputs, labels, steps, dim })
    }

    /// Builds a batch from nested `[sequence][step][feature]` data. Ragged
    /// input is rejected.
    pub fn from_sequences(seqs: &[Vec<Vec<f64>>], labels: Vec<usize>) -> Result<Self> {
        ensure!(!seqs.is_empty(), "empty batch");
        ensure!(seqs.len() == labels.len(), "{} sequences but {} labels", seqs.len(), labels.len());
        let steps = seqs[0].len();
        let dim = seqs[0].first().map_or(0, Vec::len);
        let mut inputs = Vec::with_capacity(seqs.len() * steps * dim);
        for (b, s) in seqs.iter().enumerate() {
            ensure!(s.len() == steps, "ragged batch: sequence {b} has {} steps, expected {steps}", s.len());
            for (t, x) in s.iter().enumerate() {
                ensure!(x.len() == dim, "ragged batch: sequence {b} step {t} has {} features", x.len());
                inputs.extend_from_slice(x);
            }
        }
        Self::new(inputs, labels, steps, dim)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn input(&self, b: usize, t: usize) -> &[f64] {
        let off = (b * self.steps + t) * self.dim;
        &self.inputs[off..off + self.dim]
    }

    pub fn one_hot(&self, classes: usize) -> Matrix {
        let mut m = Matrix::zeros(self.len(), classes);
        for (i, &c) in self.labels.iter().enumerate() {
            m.set(i, c, 1.0);
        }
        m
    }
}

/// Logits and class probabilities, one row per sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub logits: Matrix,
    pub probs: Matrix,
}

impl BatchOutput {
    pub(crate) fn from_logits(logits: Matrix) -> Self {
        let mut probs = logits.clone();
        for i in 0..probs.rows() {
            linalg::softmax_in_place(probs.row_mut(i));
        }
        Self { logits, probs }
    }

    pub fn predictions(&self) -> Vec<usize> {
        (0..self.probs.rows())
            .map(|i| {
                let row = self.probs.row(i);
                let mut best = 0;
                for (j, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}

/// Mean over the batch of `-Σ_c y_c log(p_c + 1e-12)`.
pub fn cross_entropy(probs: &Matrix, labels: &Matrix) -> Result<f64> {
    ensure!(
        probs.shape() == labels.shape(),
        "cross_entropy: probabilities {:?} vs labels {:?}",
        probs.shape(),
        labels.shape()
    );
    ensure!(probs.rows() > 0, "cross_entropy of an empty batch");
    let mut total = 0.0;
    for i in 0..probs.rows() {
        let mut row = 0.0;
        for (p, y) in probs.row(i).iter().zip(labels.row(i)) {
            if *y != 0.0 {
                row -= y * (p + LOG_FLOOR).ln();
            }
        }
        total += row;
    }
    Ok(total / probs.rows() as f64)
}

/// Gradient of the mean cross-entropy with respect to the logits:
/// `(p - y) / B` per row.
pub(crate) fn cross_entropy_logit_grads(out: &BatchOutput, labels: &[usize]) -> Matrix {
    let b = labels.len() as f64;
    let mut g = out.probs.clone();
    for (i, &c) in labels.iter().enumerate() {
        let row = g.row_mut(i);
        row[c] -= 1.0;
        for v in row.iter_mut() {
            *v /= b;
        }
    }
    g
}

/// Where the trace read at each step comes from during a batch unroll.
#[derive(Debug, Clone, Copy)]
pub enum TraceSchedule<'a> {
    /// Start from this trace and write it every step.
    Live(&'a Matrix),
    /// Read a recorded trace per step; nothing is written.
    Pinned(&'a [Matrix]),
}

/// Everything produced by a batch unroll of the engram classifier.
#[derive(Debug, Clone)]
pub struct EnnForward {
    pub output: BatchOutput,
    pub tapes: Vec<UnrollTape>,
    /// The trace each step read, `H_1..H_T`.
    pub traces: Vec<Matrix>,
    pub trace_after: Matrix,
}

/// Unrolls every sequence of the batch through the cell in lockstep.
///
/// All sequences share one trace, written each step with the batch mean of
/// `a ⊗ z`. Per-sequence hidden states start at zero.
pub fn forward_batch<R: Rng + ?Sized>(
    cfg: &CellConfig,
    params: &ClassifierParams,
    batch: &SequenceBatch,
    mode: Mode,
    schedule: TraceSchedule<'_>,
    rng: &mut R,
) -> Result<EnnForward> {
    params.check_shapes(cfg)?;
    ensure!(!batch.is_empty(), "forward_batch: empty batch");
    ensure!(
        batch.dim() == cfg.input_dim,
        "forward_batch: features {} but input_dim {}",
        batch.dim(),
        cfg.input_dim
    );
    let steps = batch.steps();
    let (n, h) = (cfg.memory_size, cfg.hidden_dim);
    let mut trace = match schedule {
        TraceSchedule::Live(t) => {
            ensure!(t.shape() == (n, h), "initial trace {:?}, expected {:?}", t.shape(), (n, h));
            t.clone()
        }
        TraceSchedule::Pinned(ts) => {
            ensure!(ts.len() == steps, "{} pinned traces for {steps} steps", ts.len());
            ensure!(ts.iter().all(|t| t.shape() == (n, h)), "pinned trace shape mismatch");
            ts[0].clone()
        }
    };
    let tau = cfg.effective_temperature();
    let bsz = batch.len();
    let mut hidden: Vec<Vector> = vec![Vector::zeros(h); bsz];
    let mut tapes: Vec<Vec<cell::StepTape>> = (0..bsz).map(|_| Vec::with_capacity(steps)).collect();
    let mut traces = Vec::with_capacity(steps);
    let inv_b = 1.0 / bsz as f64;

    for t in 0..steps {
        if let TraceSchedule::Pinned(ts) = schedule {
            trace = ts[t].clone();
        }
        let mem = Arc::new(EffectiveMemory::new(&params.cell.memory, &trace, cfg.hebbian_alpha));
        let step_tapes: Vec<cell::StepTape> = (0..bsz)
            .into_par_iter()
            .map(|b| cell::forward_step(&params.cell, Arc::clone(&mem), batch.input(b, t), &hidden[b], tau))
            .collect();

        let mut co = Matrix::zeros(n, h);
        for tape in &step_tapes {
            linalg::outer_acc(&mut co, inv_b, &tape.attention, &tape.z);
        }
        let next = cell::write_trace(cfg, &trace, &co, mode, rng)?;
        traces.push(std::mem::replace(&mut trace, next));

        for (b, tape) in step_tapes.into_iter().enumerate() {
            hidden[b] = tape.h.clone();
            tapes[b].push(tape);
        }
    }

    let c = params.num_classes();
    let mut logits = Matrix::zeros(bsz, c);
    for (b, hb) in hidden.iter().enumerate() {
        linalg::affine_into(&params.w_out, hb, &params.b_out, logits.row_mut(b));
    }
    let tapes = tapes
        .into_iter()
        .zip(hidden)
        .map(|(steps, final_hidden)| UnrollTape { steps, final_hidden })
        .collect();
    Ok(EnnForward { output: BatchOutput::from_logits(logits), tapes, traces, trace_after: trace })
}

/// Mean-loss gradients for a batch, accumulated over fixed chunks of sequences
/// and reduced in chunk order.
pub(crate) fn reduce_chunked<P, F>(zero: &P, count: usize, per_sequence: F) -> Result<P>
where
    P: Trainable,
    F: Fn(usize, &mut P) -> Result<()> + Sync,
{
    let chunks: Vec<Result<P>> = (0..count)
        .step_by(GRAD_CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let mut acc = zero.clone();
            for b in start..(start + GRAD_CHUNK).min(count) {
                per_sequence(b, &mut acc)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = zero.clone();
    for c in chunks {
        total.accumulate(&c?);
    }
    Ok(total)
}

/// A sequence classifier the shared training loop can drive.
pub trait SequenceModel: Sync {
    type Params: Trainable;

    fn params(&self) -> &Self::Params;
    fn params_mut(&mut self) -> &mut Self::Params;
    fn num_classes(&self) -> usize;
    fn input_dim(&self) -> usize;

    /// Fresh dynamic memory shared across a batch, if the model has any.
    fn initial_memory(&self) -> Option<Matrix>;
    fn resets_per_batch(&self) -> bool;

    /// Train-mode forward pass and mean cross-entropy gradients.
    fn train_batch(
        &self,
        memory: &mut Option<Matrix>,
        batch: &SequenceBatch,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<(BatchOutput, Self::Params)>;

    /// Deterministic eval-mode forward pass.
    fn eval_batch(&self, memory: &mut Option<Matrix>, batch: &SequenceBatch) -> Result<BatchOutput>;
}

/// The engram classifier: configuration plus trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EnnModel {
    pub config: CellConfig,
    pub params: ClassifierParams,
}

impl EnnModel {
    pub fn new(config: CellConfig, classes: usize) -> Result<Self> {
        config.validate()?;
        ensure!(classes >= 1, "need at least one class");
        let mut rng = crate::rng::substream(config.seed, crate::rng::Stream::Init);
        let params = ClassifierParams::init(&config, classes, &mut rng);
        Ok(Self { config, params })
    }

    fn memory_in<'a>(&self, memory: &'a mut Option<Matrix>) -> Result<&'a mut Matrix> {
        memory
            .as_mut()
            .ok_or_else(|| EnnError::contract("engram model run without a trace"))
    }
}

impl SequenceModel for EnnModel {
    type Params = ClassifierParams;

    fn params(&self) -> &ClassifierParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ClassifierParams {
        &mut self.params
    }

    fn num_classes(&self) -> usize {
        self.params.num_classes()
    }

    fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    fn initial_memory(&self) -> Option<Matrix> {
        Some(cell::initial_state(&self.config, cell::InitMode::Zeros).trace)
    }

    fn resets_per_batch(&self) -> bool {
        self.config.reset_states_per_batch
    }

    fn train_batch(
        &self,
        memory: &mut Option<Matrix>,
        batch: &SequenceBatch,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<(BatchOutput, ClassifierParams)> {
        let trace = self.memory_in(memory)?;
        let fwd = forward_batch(&self.config, &self.params, batch, Mode::Train, TraceSchedule::Live(trace), rng)?;
        let dlogits = cross_entropy_logit_grads(&fwd.output, batch.labels());
        let zero = self.params.zeros_like();
        let grads = reduce_chunked(&zero, batch.len(), |b, acc| {
            grad::backprop_sequence_into(&self.config, &self.params, &fwd.tapes[b], dlogits.row(b), acc)
        })?;
        *trace = fwd.trace_after;
        Ok((fwd.output, grads))
    }

    fn eval_batch(&self, memory: &mut Option<Matrix>, batch: &SequenceBatch) -> Result<BatchOutput> {
        let trace = self.memory_in(memory)?;
        // eval mode never draws noise
        let mut unused = crate::rng::substream(0, crate::rng::Stream::Noise);
        let fwd = forward_batch(&self.config, &self.params, batch, Mode::Eval, TraceSchedule::Live(trace), &mut unused)?;
        *trace = fwd.trace_after;
        Ok(fwd.output)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn tiny_cfg() -> CellConfig {
        CellConfig { input_dim: 3, hidden_dim: 4, memory_size: 5, ..CellConfig::default() }
    }

    fn random_batch(b: usize, t: usize, d: usize, seed: u64) -> SequenceBatch {
        let mut rng = substream(seed, Stream::Data);
        let inputs = (0..b * t * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels = (0..b).map(|_| rng.random_range(0..3)).collect();
        SequenceBatch::new(inputs, labels, t, d).unwrap()
    }

    #[test]
    fn zero_head_gives_uniform_probabilities() {
        let cfg = tiny_cfg();
        let mut params = ClassifierParams::init(&cfg, 7, &mut substream(1, Stream::Init));
        params.w_out = Matrix::zeros(7, 4);
        params.b_out = Vector::zeros(7);
        let batch = random_batch(3, 4, 3, 2);
        let zero = Matrix::zeros(5, 4);
        let fwd = forward_batch(&cfg, &params, &batch, Mode::Eval, TraceSchedule::Live(&zero), &mut substream(0, Stream::Noise)).unwrap();
        for &p in fwd.output.probs.as_slice() {
            assert!((p - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn duplicated_sample_matches_single() {
        let cfg = tiny_cfg();
        let params = ClassifierParams::init(&cfg, 3, &mut substream(1, Stream::Init));
        let one = random_batch(1, 5, 3, 4);
        let seq: Vec<Vec<f64>> = (0..5).map(|t| one.input(0, t).to_vec()).collect();
        let two = SequenceBatch::from_sequences(&[seq.clone(), seq], vec![1, 1]).unwrap();
        let zero = Matrix::zeros(5, 4);
        let mut r = substream(0, Stream::Noise);
        let a = forward_batch(&cfg, &params, &one, Mode::Eval, TraceSchedule::Live(&zero), &mut r).unwrap();
        let b = forward_batch(&cfg, &params, &two, Mode::Eval, TraceSchedule::Live(&zero), &mut r).unwrap();
        assert_eq!(a.output.probs.row(0), b.output.probs.row(0));
        assert_eq!(a.output.probs.row(0), b.output.probs.row(1));
        assert_eq!(a.trace_after, b.trace_after);
    }

    #[test]
    fn mnist_shaped_batch_normalizes() {
        let cfg = CellConfig { hidden_dim: 16, memory_size: 8, ..CellConfig::default() };
        let params = ClassifierParams::init(&cfg, 10, &mut substream(1, Stream::Init));
        let mut rng = substream(3, Stream::Data);
        let inputs = (0..4 * 28 * 28).map(|_| rng.random_range(0.0..1.0)).collect();
        let batch = SequenceBatch::new(inputs, vec![0, 1, 2, 3], 28, 28).unwrap();
        let zero = Matrix::zeros(8, 16);
        let fwd = forward_batch(&cfg, &params, &batch, Mode::Train, TraceSchedule::Live(&zero), &mut rng).unwrap();
        assert_eq!(fwd.output.probs.shape(), (4, 10));
        for i in 0..4 {
            let s: f64 = fwd.output.probs.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(fwd.traces.len(), 28);
        assert_eq!(fwd.tapes[0].steps.len(), 28);
    }

    #[test]
    fn ragged_batch_rejected() {
        let seqs = vec![vec![vec![0.0; 3]; 4], vec![vec![0.0; 3]; 5]];
        assert!(matches!(SequenceBatch::from_sequences(&seqs, vec![0, 1]), Err(EnnError::Contract(_))));
        let seqs = vec![vec![vec![0.0; 3], vec![0.0; 2]]];
        assert!(SequenceBatch::from_sequences(&seqs, vec![0]).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let perfect = Matrix::from_rows(&[vec![0.0, 1.0, 0.0]]).unwrap();
        assert!(cross_entropy(&perfect, &perfect).unwrap().abs() < 1e-9);

        let uniform = Matrix::from_vec(1, 10, vec![0.1; 10]).unwrap();
        let mut y = Matrix::zeros(1, 10);
        y.set(0, 3, 1.0);
        assert!((cross_entropy(&uniform, &y).unwrap() - 10f64.ln()).abs() < 1e-9);

        let p = Matrix::from_rows(&[vec![0.2, 0.8], vec![0.6, 0.4]]).unwrap();
        let y = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let both = cross_entropy(&p, &y).unwrap();
        let first = cross_entropy(&Matrix::from_rows(&[vec![0.2, 0.8]]).unwrap(), &Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap()).unwrap();
        let second = cross_entropy(&Matrix::from_rows(&[vec![0.6, 0.4]]).unwrap(), &Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap()).unwrap();
        assert!((both - (first + second) / 2.0).abs() < 1e-15);

        assert!(cross_entropy(&p, &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn parameter_count_matches_buffer_enumeration() {
        for (d, h, n, c) in [(28, 128, 64, 10), (3, 4, 5, 3), (8, 32, 16, 8)] {
            let cfg = CellConfig { input_dim: d, hidden_dim: h, memory_size: n, ..CellConfig::default() };
            let p = ClassifierParams::zeros(&cfg, c);
            let enumerated: usize = p.tensors().iter().map(|t| t.dims().iter().product::<usize>()).sum();
            assert_eq!(enumerated, ClassifierParams::expected_count(&cfg, c));
            assert_eq!(p.param_count(), enumerated);
        }
        let cfg = CellConfig::default();
        assert_eq!(ClassifierParams::expected_count(&cfg, 10), 78_986);
    }
}
