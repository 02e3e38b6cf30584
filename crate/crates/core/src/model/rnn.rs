//! Vanilla tanh RNN baseline with the same softmax head and training loop.

use rand::Rng;

use super::{cross_entropy_logit_grads, mat_view, reduce_chunked, vec_view, BatchOutput, SequenceBatch, SequenceModel, TensorView, Trainable};
use crate::cell::glorot_fill;
use crate::error::{ensure, Result};
use crate::linalg::{self, Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct RnnParams {
    /// `h × d`
    pub w_x: Matrix,
    /// `h × h`
    pub w_h: Matrix,
    pub b: Vector,
    /// `C × h`
    pub w_out: Matrix,
    pub b_out: Vector,
}

impl RnnParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize, classes: usize) -> Self {
        Self {
            w_x: Matrix::zeros(hidden_dim, input_dim),
            w_h: Matrix::zeros(hidden_dim, hidden_dim),
            b: Vector::zeros(hidden_dim),
            w_out: Matrix::zeros(classes, hidden_dim),
            b_out: Vector::zeros(classes),
        }
    }

    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, classes: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim, classes);
        glorot_fill(&mut p.w_x, rng);
        glorot_fill(&mut p.w_h, rng);
        glorot_fill(&mut p.w_out, rng);
        p
    }

    pub fn hidden_dim(&self) -> usize {
        self.b.len()
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.cols()
    }
}

impl Trainable for RnnParams {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        vec![
            mat_view("rnn.w_x", &self.w_x),
            mat_view("rnn.w_h", &self.w_h),
            vec_view("rnn.b", &self.b),
            mat_view("head.w_out", &self.w_out),
            vec_view("head.b_out", &self.b_out),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_x.as_mut_slice(),
            self.w_h.as_mut_slice(),
            &mut self.b,
            self.w_out.as_mut_slice(),
            &mut self.b_out,
        ]
    }
}

/// `h_t = tanh(W_x x + W_h h_{t-1} + b)`
pub fn baseline_rnn_step(params: &RnnParams, h_prev: &[f64], x: &[f64]) -> Result<Vector> {
    ensure!(
        x.len() == params.input_dim() && h_prev.len() == params.hidden_dim(),
        "rnn step: input {} / state {} against weights {:?} / {:?}",
        x.len(),
        h_prev.len(),
        params.w_x.shape(),
        params.w_h.shape()
    );
    ensure!(params.w_h.shape() == (params.hidden_dim(), params.hidden_dim()), "rnn recurrent weights are not square");
    let mut out = vec![0.0; params.hidden_dim()];
    step_into(params, h_prev, x, &mut out);
    Ok(Vector::from_vec(out))
}

fn step_into(params: &RnnParams, h_prev: &[f64], x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let pre = linalg::dot(params.w_x.row(i), x) + linalg::dot(params.w_h.row(i), h_prev) + params.b[i];
        *o = pre.tanh();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnModel {
    pub params: RnnParams,
}

impl RnnModel {
    pub fn new(input_dim: usize, hidden_dim: usize, classes: usize, seed: u64) -> Self {
        let mut rng = crate::rng::substream(seed, crate::rng::Stream::Init);
        Self { params: RnnParams::init(input_dim, hidden_dim, classes, &mut rng) }
    }

    /// Hidden states `h_0 = 0, h_1, …, h_T` of one sequence.
    fn unroll(&self, batch: &SequenceBatch, b: usize) -> Vec<Vec<f64>> {
        let h = self.params.hidden_dim();
        let mut states = Vec::with_capacity(batch.steps() + 1);
        states.push(vec![0.0; h]);
        for t in 0..batch.steps() {
            let mut next = vec![0.0; h];
            step_into(&self.params, &states[t], batch.input(b, t), &mut next);
            states.push(next);
        }
        states
    }

    fn head(&self, states: &[Vec<Vec<f64>>]) -> BatchOutput {
        let c = self.params.b_out.len();
        let mut logits = Matrix::zeros(states.len(), c);
        for (b, s) in states.iter().enumerate() {
            linalg::affine_into(&self.params.w_out, s.last().expect("h_0 always present"), &self.params.b_out, logits.row_mut(b));
        }
        BatchOutput::from_logits(logits)
    }

    fn check_batch(&self, batch: &SequenceBatch) -> Result<()> {
        ensure!(!batch.is_empty(), "empty batch");
        ensure!(
            batch.dim() == self.params.input_dim(),
            "batch features {} but rnn input size {}",
            batch.dim(),
            self.params.input_dim()
        );
        Ok(())
    }

    fn backprop_into(&self, batch: &SequenceBatch, b: usize, states: &[Vec<f64>], logit_grad: &[f64], g: &mut RnnParams) {
        let p = &self.params;
        let h = p.hidden_dim();
        let last = states.last().expect("h_0 always present");
        linalg::outer_acc(&mut g.w_out, 1.0, logit_grad, last);
        linalg::axpy(1.0, logit_grad, &mut g.b_out);
        let mut dh = vec![0.0; h];
        linalg::gemv_t_acc(&p.w_out, logit_grad, &mut dh);
        let mut d_pre = vec![0.0; h];
        for t in (0..batch.steps()).rev() {
            let ht = &states[t + 1];
            for i in 0..h {
                d_pre[i] = dh[i] * (1.0 - ht[i] * ht[i]);
            }
            linalg::outer_acc(&mut g.w_x, 1.0, &d_pre, batch.input(b, t));
            linalg::outer_acc(&mut g.w_h, 1.0, &d_pre, &states[t]);
            linalg::axpy(1.0, &d_pre, &mut g.b);
            dh.fill(0.0);
            linalg::gemv_t_acc(&p.w_h, &d_pre, &mut dh);
        }
    }
}

impl SequenceModel for RnnModel {
    type Params = RnnParams;

    fn params(&self) -> &RnnParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut RnnParams {
        &mut self.params
    }

    fn num_classes(&self) -> usize {
        self.params.b_out.len()
    }

    fn input_dim(&self) -> usize {
        self.params.input_dim()
    }

    fn initial_memory(&self) -> Option<Matrix> {
        None
    }

    fn resets_per_batch(&self) -> bool {
        true
    }

    fn train_batch(
        &self,
        _memory: &mut Option<Matrix>,
        batch: &SequenceBatch,
        _rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<(BatchOutput, RnnParams)> {
        use rayon::prelude::*;
        self.check_batch(batch)?;
        let states: Vec<Vec<Vec<f64>>> = (0..batch.len()).into_par_iter().map(|b| self.unroll(batch, b)).collect();
        let out = self.head(&states);
        let dlogits = cross_entropy_logit_grads(&out, batch.labels());
        let zero = self.params.zeros_like();
        let grads = reduce_chunked(&zero, batch.len(), |b, acc| {
            self.backprop_into(batch, b, &states[b], dlogits.row(b), acc);
            Ok(())
        })?;
        Ok((out, grads))
    }

    fn eval_batch(&self, _memory: &mut Option<Matrix>, batch: &SequenceBatch) -> Result<BatchOutput> {
        use rayon::prelude::*;
        self.check_batch(batch)?;
        let states: Vec<Vec<Vec<f64>>> = (0..batch.len()).into_par_iter().map(|b| self.unroll(batch, b)).collect();
        Ok(self.head(&states))
    }
}
