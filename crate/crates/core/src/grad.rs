//! Backpropagation through time for the engram classifier.
//!
//! The Hebbian trace is treated as a constant: each [`StepTape`] holds the
//! effective memory `M + αH_t` it read, and gradients flow into `M` only.
//! Gradients do flow through `h_{t-1}` across every step (no truncation).
//!
//! [`finite_difference_grads`] is the independent check. It perturbs one
//! scalar at a time and re-runs the batch forward pass with the trace sequence
//! pinned to the one recorded by the unperturbed pass, so both sides
//! differentiate the same function.

use crate::cell::{CellConfig, Mode, StepTape};
use crate::error::{ensure, Result};
use crate::linalg::{self, Matrix, Vector, NORM_EPS};
use crate::model::{forward_batch, BatchOutput, ClassifierParams, SequenceBatch, TraceSchedule, Trainable};
use crate::rng::{substream, Stream};

/// Gradient buffers, shaped exactly like [`ClassifierParams`].
pub type ParamGrads = ClassifierParams;

/// The forward record of one sequence.
#[derive(Debug, Clone)]
pub struct UnrollTape {
    pub steps: Vec<StepTape>,
    /// `h_T`, read by the output head.
    pub final_hidden: Vector,
}

/// Reverse-mode gradients of one sequence given `dL/dlogits`.
pub fn backprop_sequence(
    cfg: &CellConfig,
    params: &ClassifierParams,
    tape: &UnrollTape,
    logit_grad: &[f64],
) -> Result<ParamGrads> {
    let mut grads = params.zeros_like();
    backprop_sequence_into(cfg, params, tape, logit_grad, &mut grads)?;
    Ok(grads)
}

/// As [`backprop_sequence`], accumulating into `grads`.
pub fn backprop_sequence_into(
    cfg: &CellConfig,
    params: &ClassifierParams,
    tape: &UnrollTape,
    logit_grad: &[f64],
    grads: &mut ParamGrads,
) -> Result<()> {
    let h = cfg.hidden_dim;
    let n = cfg.memory_size;
    ensure!(
        logit_grad.len() == params.num_classes(),
        "logit gradient has length {}, head has {} classes",
        logit_grad.len(),
        params.num_classes()
    );
    ensure!(tape.final_hidden.len() == h, "tape hidden size {} != {h}", tape.final_hidden.len());
    ensure!(
        grads.w_out.shape() == params.w_out.shape() && grads.cell.memory.shape() == params.cell.memory.shape(),
        "gradient buffers do not match parameters"
    );
    for (t, s) in tape.steps.iter().enumerate() {
        ensure!(
            s.h.len() == h && s.attention.len() == n && s.x.len() == cfg.input_dim,
            "step {t} of the tape does not match the configuration"
        );
    }

    let p = &params.cell;
    let tau = cfg.effective_temperature();

    linalg::outer_acc(&mut grads.w_out, 1.0, logit_grad, &tape.final_hidden);
    linalg::axpy(1.0, logit_grad, &mut grads.b_out);
    let mut dh = vec![0.0; h];
    linalg::gemv_t_acc(&params.w_out, logit_grad, &mut dh);

    let mut d_pre_h = vec![0.0; h];
    let mut du = vec![0.0; h];
    let mut d_pre_u = vec![0.0; h];
    let mut concat = vec![0.0; 3 * h];
    let mut d_concat = vec![0.0; 3 * h];
    let mut da = vec![0.0; n];
    let mut d_pre_z = vec![0.0; h];

    for s in tape.steps.iter().rev() {
        let g = &mut grads.cell;

        relu_backward(&dh, &s.pre_h, &mut d_pre_h);
        linalg::outer_acc(&mut g.w_h, 1.0, &d_pre_h, &s.u);
        linalg::axpy(1.0, &d_pre_h, &mut g.b_h);
        du.fill(0.0);
        linalg::gemv_t_acc(&p.w_h, &d_pre_h, &mut du);

        relu_backward(&du, &s.pre_u, &mut d_pre_u);
        concat[..h].copy_from_slice(&s.z);
        concat[h..2 * h].copy_from_slice(&s.retrieved);
        concat[2 * h..].copy_from_slice(&s.h_prev);
        linalg::outer_acc(&mut g.w_u, 1.0, &d_pre_u, &concat);
        linalg::axpy(1.0, &d_pre_u, &mut g.b_u);
        d_concat.fill(0.0);
        linalg::gemv_t_acc(&p.w_u, &d_pre_u, &mut d_concat);
        let (dz, rest) = d_concat.split_at_mut(h);
        let (dm, dh_prev) = rest.split_at(h);

        // retrieval m = Σ a_i E_i, then the softmax over scaled cosine scores
        let mem = &s.memory;
        for (i, d) in da.iter_mut().enumerate() {
            *d = linalg::dot(dm, mem.rows.row(i));
        }
        let mean: f64 = s.attention.iter().zip(&da).map(|(a, d)| a * d).sum();
        let nz = s.z_norm.max(NORM_EPS);
        let z_floored = s.z_norm < NORM_EPS;
        let mut z_radial = 0.0;
        for i in 0..n {
            let a = s.attention[i];
            let ds = a * (da[i] - mean) / tau;
            let dm_row = g.memory.row_mut(i);
            linalg::axpy(a, dm, dm_row);
            if ds == 0.0 {
                continue;
            }
            let e = mem.rows.row(i);
            let ni = mem.norms[i];
            let coef = ds / (nz * ni);
            linalg::axpy(coef, e, dz);
            linalg::axpy(coef, &s.z, dm_row);
            if mem.raw_norms[i] >= NORM_EPS {
                linalg::axpy(-ds * s.scores[i] / (ni * ni), e, dm_row);
            }
            z_radial += ds * s.scores[i];
        }
        if !z_floored {
            linalg::axpy(-z_radial / (nz * nz), &s.z, dz);
        }

        relu_backward(dz, &s.pre_z, &mut d_pre_z);
        linalg::outer_acc(&mut g.w_z, 1.0, &d_pre_z, &s.x);
        linalg::axpy(1.0, &d_pre_z, &mut g.b_z);

        dh.copy_from_slice(dh_prev);
    }
    Ok(())
}

/// ReLU derivative, with the subgradient at exactly zero taken as zero.
#[inline]
fn relu_backward(upstream: &[f64], pre: &[f64], out: &mut [f64]) {
    for ((o, &g), &p) in out.iter_mut().zip(upstream).zip(pre) {
        *o = if p > 0.0 { g } else { 0.0 };
    }
}

/// Analytic mean cross-entropy gradients for a batch, computed with noise off.
/// Also returns the loss and the trace sequence the forward pass read.
pub fn batch_gradients(
    cfg: &CellConfig,
    params: &ClassifierParams,
    batch: &SequenceBatch,
    initial_trace: &Matrix,
) -> Result<(f64, ParamGrads, Vec<Matrix>)> {
    let mut unused = substream(0, Stream::Noise);
    let fwd = forward_batch(cfg, params, batch, Mode::Eval, TraceSchedule::Live(initial_trace), &mut unused)?;
    let loss = crate::model::cross_entropy(&fwd.output.probs, &batch.one_hot(params.num_classes()))?;
    let dlogits = crate::model::cross_entropy_logit_grads(&fwd.output, batch.labels());
    let mut grads = params.zeros_like();
    for (b, tape) in fwd.tapes.iter().enumerate() {
        backprop_sequence_into(cfg, params, tape, dlogits.row(b), &mut grads)?;
    }
    Ok((loss, grads, fwd.traces))
}

/// Central differences of a scalar function at `x`.
pub fn central_difference<F>(mut f: F, x: &[f64], epsilon: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            work[i] = x[i] + epsilon;
            let plus = f(&work);
            work[i] = x[i] - epsilon;
            let minus = f(&work);
            work[i] = x[i];
            (plus - minus) / (2.0 * epsilon)
        })
        .collect()
}

/// How the finite-difference oracle treats the Hebbian trace.
#[derive(Debug, Clone, Copy)]
pub enum TraceProtocol<'a> {
    /// Replay the trace recorded by the unperturbed pass (matches BPTT).
    Recorded(&'a [Matrix]),
    /// Let each perturbed pass rebuild its own trace from this initial value.
    Free(&'a Matrix),
}

/// Central-difference gradients of `loss_fn` over every scalar parameter.
/// The forward pass runs in eval mode, so the trace is written without noise.
pub fn finite_difference_grads<L>(
    cfg: &CellConfig,
    params: &ClassifierParams,
    batch: &SequenceBatch,
    loss_fn: L,
    epsilon: f64,
    protocol: TraceProtocol<'_>,
) -> Result<ParamGrads>
where
    L: Fn(&BatchOutput) -> f64,
{
    ensure!(epsilon > 0.0, "epsilon must be positive");
    let schedule = match protocol {
        TraceProtocol::Recorded(ts) => TraceSchedule::Pinned(ts),
        TraceProtocol::Free(t) => TraceSchedule::Live(t),
    };
    let eval = |p: &ClassifierParams| -> Result<f64> {
        let mut unused = substream(0, Stream::Noise);
        let fwd = forward_batch(cfg, p, batch, Mode::Eval, schedule, &mut unused)?;
        Ok(loss_fn(&fwd.output))
    };
    // surface shape errors before the loop
    eval(params)?;

    let mut work = params.clone();
    let mut grads = params.zeros_like();
    let buffers = params.tensors().len();
    for k in 0..buffers {
        let len = params.tensors()[k].data.len();
        for j in 0..len {
            let orig = work.tensors_mut()[k][j];
            work.tensors_mut()[k][j] = orig + epsilon;
            let plus = eval(&work)?;
            work.tensors_mut()[k][j] = orig - epsilon;
            let minus = eval(&work)?;
            work.tensors_mut()[k][j] = orig;
            grads.tensors_mut()[k][j] = (plus - minus) / (2.0 * epsilon);
        }
    }
    Ok(grads)
}

/// Relative-error threshold for a passing gradient check.
pub const GRAD_CHECK_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockError {
    pub name: String,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockError>,
    pub threshold: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.max_rel_error < self.threshold)
    }

    pub fn worst(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }
}

/// `|a - n| / max(|a|, |n|, 1e-10)`
pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-10)
}

/// Per-block maximum relative error between two gradient sets.
pub fn grad_check_report<P: Trainable>(analytic: &P, numeric: &P) -> Result<GradCheckReport> {
    let a = analytic.tensors();
    let n = numeric.tensors();
    ensure!(a.len() == n.len(), "{} vs {} gradient blocks", a.len(), n.len());
    let mut blocks = Vec::with_capacity(a.len());
    for (ta, tn) in a.iter().zip(&n) {
        ensure!(
            ta.name == tn.name && ta.dims() == tn.dims(),
            "block {} {:?} vs {} {:?}",
            ta.name,
            ta.dims(),
            tn.name,
            tn.dims()
        );
        let max_rel_error = ta
            .data
            .iter()
            .zip(tn.data)
            .map(|(&x, &y)| relative_error(x, y))
            .fold(0.0, f64::max);
        blocks.push(BlockError { name: ta.name.to_string(), max_rel_error });
    }
    Ok(GradCheckReport { blocks, threshold: GRAD_CHECK_THRESHOLD })
}

/// A random gradient-check problem with every ReLU pre-activation at least
/// `margin` away from zero.
#[derive(Debug, Clone)]
pub struct GradCheckInstance {
    pub config: CellConfig,
    pub params: ClassifierParams,
    pub batch: SequenceBatch,
}

impl GradCheckInstance {
    /// Samples instances from `seed` until one has no ReLU kink within
    /// `margin` of a pre-activation.
    pub fn sample(
        base: &CellConfig,
        classes: usize,
        steps: usize,
        batch_size: usize,
        margin: f64,
        seed: u64,
    ) -> Result<Self> {
        use rand::Rng;
        let cfg = CellConfig { noise_std: 0.0, ..base.clone() };
        cfg.validate()?;
        let mut rng = substream(seed, Stream::Init);
        for _ in 0..1000 {
            let mut params = ClassifierParams::zeros(&cfg, classes);
            for buf in params.tensors_mut() {
                for v in buf.iter_mut() {
                    *v = rng.random_range(-0.8..0.8);
                }
            }
            let inputs = (0..batch_size * steps * cfg.input_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let labels = (0..batch_size).map(|_| rng.random_range(0..classes)).collect();
            let batch = SequenceBatch::new(inputs, labels, steps, cfg.input_dim)?;
            let inst = Self { config: cfg.clone(), params, batch };
            if inst.min_kink_distance()? > margin {
                return Ok(inst);
            }
        }
        Err(crate::error::EnnError::contract("no instance without ReLU kinks found in 1000 draws"))
    }

    fn min_kink_distance(&self) -> Result<f64> {
        let zero = Matrix::zeros(self.config.memory_size, self.config.hidden_dim);
        let mut unused = substream(0, Stream::Noise);
        let fwd = forward_batch(&self.config, &self.params, &self.batch, Mode::Eval, TraceSchedule::Live(&zero), &mut unused)?;
        let mut min = f64::INFINITY;
        for tape in &fwd.tapes {
            for s in &tape.steps {
                for v in s.pre_z.iter().chain(s.pre_u.iter()).chain(s.pre_h.iter()) {
                    min = min.min(v.abs());
                }
                min = min.min(s.z_norm);
            }
        }
        Ok(min)
    }

    /// Analytic versus recorded-trace finite differences. Also returns the
    /// free-trajectory comparison as an informational report.
    pub fn check(&self, epsilon: f64) -> Result<(GradCheckReport, GradCheckReport)> {
        self.check_with(epsilon, |_| {})
    }

    /// As [`check`](Self::check), with `tamper` applied to the analytic
    /// gradients first. Used as a negative control.
    pub fn check_with<F>(&self, epsilon: f64, tamper: F) -> Result<(GradCheckReport, GradCheckReport)>
    where
        F: FnOnce(&mut ParamGrads),
    {
        let zero = Matrix::zeros(self.config.memory_size, self.config.hidden_dim);
        let (_, mut analytic, traces) = batch_gradients(&self.config, &self.params, &self.batch, &zero)?;
        tamper(&mut analytic);
        let labels = self.batch.one_hot(self.params.num_classes());
        let loss = |out: &BatchOutput| crate::model::cross_entropy(&out.probs, &labels).unwrap_or(f64::NAN);
        let pinned = finite_difference_grads(
            &self.config,
            &self.params,
            &self.batch,
            loss,
            epsilon,
            TraceProtocol::Recorded(&traces),
        )?;
        let free = finite_difference_grads(&self.config, &self.params, &self.batch, loss, epsilon, TraceProtocol::Free(&zero))?;
        Ok((grad_check_report(&analytic, &pinned)?, grad_check_report(&analytic, &free)?))
    }

    pub fn analytic(&self) -> Result<ParamGrads> {
        let zero = Matrix::zeros(self.config.memory_size, self.config.hidden_dim);
        Ok(batch_gradients(&self.config, &self.params, &self.batch, &zero)?.1)
    }
}
