//! The engram cell: one recurrent step with an explicit memory bank and a
//! Hebbian trace.
//!
//! A step runs `encode → attend → retrieve → integrate` against the effective
//! memory `M + αH`, then writes the trace with the step's own attention and
//! encoding. Retrieval always sees the trace from *before* the write.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{ensure, Result};
use crate::linalg::{self, affine_into, dot, Matrix, Vector, NORM_EPS};
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct CellConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub memory_size: usize,
    /// Weight of the Hebbian trace in the effective memory.
    pub hebbian_alpha: f64,
    /// Trace learning/decay rate.
    pub hebbian_eta: f64,
    pub temperature: f64,
    pub sparsity_strength: f64,
    pub clip_lo: f64,
    pub clip_hi: f64,
    pub noise_std: f64,
    pub reset_states_per_batch: bool,
    pub weight_init: WeightInit,
    pub seed: u64,
}

/// How [`CellParams::init`] sets the recurrent path. Identity is the default:
/// with Glorot recurrent weights the ReLU state contracts by roughly a third
/// per step and a ten-step delay erases the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightInit {
    /// Glorot-uniform everywhere.
    Glorot,
    /// Glorot, except the `h_prev` block of `W_u` and all of `W_h` start as
    /// identities, so the state passes through the ReLU pair unchanged.
    IdentityRecurrent,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            input_dim: 28,
            hidden_dim: 128,
            memory_size: 64,
            hebbian_alpha: 1.0,
            hebbian_eta: 0.01,
            temperature: 1.0,
            sparsity_strength: 0.1,
            clip_lo: -0.1,
            clip_hi: 0.1,
            noise_std: 0.01,
            reset_states_per_batch: true,
            weight_init: WeightInit::IdentityRecurrent,
            seed: 42,
        }
    }
}

impl CellConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.input_dim >= 1 && self.hidden_dim >= 1 && self.memory_size >= 1,
            "dimensions must be positive (d={}, h={}, N={})",
            self.input_dim,
            self.hidden_dim,
            self.memory_size
        );
        ensure!(
            self.clip_lo < self.clip_hi,
            "clip_lo ({}) must be below clip_hi ({})",
            self.clip_lo,
            self.clip_hi
        );
        ensure!(self.temperature > 0.0, "temperature must be positive");
        ensure!(self.hebbian_alpha >= 0.0, "hebbian_alpha must be non-negative");
        ensure!(
            (0.0..1.0).contains(&self.hebbian_eta),
            "hebbian_eta must lie in [0, 1)"
        );
        ensure!(
            (0.0..=1.0).contains(&self.sparsity_strength),
            "sparsity_strength must lie in [0, 1]"
        );
        ensure!(self.noise_std >= 0.0, "noise_std must be non-negative");
        Ok(())
    }

    pub fn effective_temperature(&self) -> f64 {
        effective_temperature(self.temperature, self.sparsity_strength)
    }
}

/// Softmax temperature sharpened by the sparsity strength: `τ / (1 + 10λ)`.
pub fn effective_temperature(tau: f64, lambda: f64) -> f64 {
    tau / (1.0 + 10.0 * lambda)
}

/// Trainable weights of the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    /// Encoder, `h × d`.
    pub w_z: Matrix,
    pub b_z: Vector,
    /// Integrator over `[z; m; h_prev]`, `h × 3h`.
    pub w_u: Matrix,
    pub b_u: Vector,
    /// Hidden projection, `h × h`.
    pub w_h: Matrix,
    pub b_h: Vector,
    /// Slow memory bank, `N × h`. Only the optimizer writes it.
    pub memory: Matrix,
}

impl CellParams {
    pub fn zeros(cfg: &CellConfig) -> Self {
        let (d, h, n) = (cfg.input_dim, cfg.hidden_dim, cfg.memory_size);
        Self {
            w_z: Matrix::zeros(h, d),
            b_z: Vector::zeros(h),
            w_u: Matrix::zeros(h, 3 * h),
            b_u: Vector::zeros(h),
            w_h: Matrix::zeros(h, h),
            b_h: Vector::zeros(h),
            memory: Matrix::zeros(n, h),
        }
    }

    /// Glorot-uniform weights and memory, zero biases, with the recurrent
    /// blocks adjusted per `cfg.weight_init`.
    pub fn init<R: Rng + ?Sized>(cfg: &CellConfig, rng: &mut R) -> Self {
        let mut p = Self::zeros(cfg);
        glorot_fill(&mut p.w_z, rng);
        glorot_fill(&mut p.w_u, rng);
        glorot_fill(&mut p.w_h, rng);
        glorot_fill(&mut p.memory, rng);
        if cfg.weight_init == WeightInit::IdentityRecurrent {
            let h = cfg.hidden_dim;
            for i in 0..h {
                for j in 0..h {
                    let v = if i == j { 1.0 } else { 0.0 };
                    p.w_u.set(i, 2 * h + j, v);
                    p.w_h.set(i, j, v);
                }
            }
        }
        p
    }

    pub fn check_shapes(&self, cfg: &CellConfig) -> Result<()> {
        let (d, h, n) = (cfg.input_dim, cfg.hidden_dim, cfg.memory_size);
        let expect = [
            ("w_z", self.w_z.shape(), (h, d)),
            ("w_u", self.w_u.shape(), (h, 3 * h)),
            ("w_h", self.w_h.shape(), (h, h)),
            ("memory", self.memory.shape(), (n, h)),
            ("b_z", (self.b_z.len(), 1), (h, 1)),
            ("b_u", (self.b_u.len(), 1), (h, 1)),
            ("b_h", (self.b_h.len(), 1), (h, 1)),
        ];
        for (name, got, want) in expect {
            ensure!(got == want, "{name} has shape {got:?}, expected {want:?}");
        }
        Ok(())
    }
}

pub(crate) fn glorot_fill<R: Rng + ?Sized>(m: &mut Matrix, rng: &mut R) {
    let limit = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite glorot bound");
    for v in m.as_mut_slice() {
        *v = dist.sample(rng);
    }
}

/// Per-sequence dynamic state.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vector,
    /// Hebbian trace, `N × h`, always within the clip bounds.
    pub trace: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Zeros,
    SeededRandom,
}

pub fn initial_state(cfg: &CellConfig, mode: InitMode) -> CellState {
    let mut trace = Matrix::zeros(cfg.memory_size, cfg.hidden_dim);
    if mode == InitMode::SeededRandom {
        let mut rng = substream(cfg.seed, Stream::State);
        let dist = Uniform::new_inclusive(cfg.clip_lo / 10.0, cfg.clip_hi / 10.0)
            .expect("clip bounds are finite and ordered");
        for v in trace.as_mut_slice() {
            *v = dist.sample(&mut rng);
        }
    }
    CellState { h: Vector::zeros(cfg.hidden_dim), trace }
}

/// The effective memory `M + αH` for one step, with each row's L2 norm
/// floored at [`NORM_EPS`]. Shared by every sequence that reads the same trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveMemory {
    pub rows: Matrix,
    pub norms: Vec<f64>,
    /// Unfloored norms, needed to know where the floor is active.
    pub raw_norms: Vec<f64>,
}

impl EffectiveMemory {
    pub fn new(memory: &Matrix, trace: &Matrix, alpha: f64) -> Self {
        let mut rows = memory.clone();
        if alpha != 0.0 {
            linalg::axpy(alpha, trace.as_slice(), rows.as_mut_slice());
        }
        let raw_norms: Vec<f64> = (0..rows.rows()).map(|i| dot(rows.row(i), rows.row(i)).sqrt()).collect();
        let norms = raw_norms.iter().map(|n| n.max(NORM_EPS)).collect();
        Self { rows, norms, raw_norms }
    }
}

/// Cached intermediates of one forward step, consumed by backpropagation.
#[derive(Debug, Clone)]
pub struct StepTape {
    pub x: Vector,
    pub pre_z: Vector,
    pub z: Vector,
    /// `‖z‖` before flooring.
    pub z_norm: f64,
    /// Cosine similarity per slot.
    pub scores: Vector,
    pub attention: Vector,
    pub retrieved: Vector,
    pub h_prev: Vector,
    pub pre_u: Vector,
    pub u: Vector,
    pub pre_h: Vector,
    pub h: Vector,
    pub memory: Arc<EffectiveMemory>,
}

impl StepTape {
    /// Recomputes the step from the cached inputs.
    pub fn replay(&self, params: &CellParams, tau_eff: f64) -> StepTape {
        forward_step(params, Arc::clone(&self.memory), &self.x, &self.h_prev, tau_eff)
    }
}

/// Unchecked forward step against a precomputed effective memory.
pub(crate) fn forward_step(
    params: &CellParams,
    memory: Arc<EffectiveMemory>,
    x: &[f64],
    h_prev: &[f64],
    tau_eff: f64,
) -> StepTape {
    let h = params.b_z.len();
    let n = memory.rows.rows();

    let mut pre_z = vec![0.0; h];
    affine_into(&params.w_z, x, &params.b_z, &mut pre_z);
    let z = linalg::relu(&pre_z);

    let z_norm = z.norm();
    let nz = z_norm.max(NORM_EPS);
    let mut scores = vec![0.0; n];
    for (i, s) in scores.iter_mut().enumerate() {
        *s = dot(&z, memory.rows.row(i)) / (nz * memory.norms[i]);
    }
    let mut attention: Vec<f64> = scores.iter().map(|s| s / tau_eff).collect();
    linalg::softmax_in_place(&mut attention);

    let mut retrieved = vec![0.0; h];
    for (i, &a) in attention.iter().enumerate() {
        linalg::axpy(a, memory.rows.row(i), &mut retrieved);
    }

    let (pre_u, u, pre_h, h_new) = integrate_raw(params, &z, &retrieved, h_prev);

    StepTape {
        x: Vector::from(x),
        pre_z: Vector::from_vec(pre_z),
        z,
        z_norm,
        scores: Vector::from_vec(scores),
        attention: Vector::from_vec(attention),
        retrieved: Vector::from_vec(retrieved),
        h_prev: Vector::from(h_prev),
        pre_u: Vector::from_vec(pre_u),
        u,
        pre_h: Vector::from_vec(pre_h),
        h: h_new,
        memory,
    }
}

fn integrate_raw(
    params: &CellParams,
    z: &[f64],
    m: &[f64],
    h_prev: &[f64],
) -> (Vec<f64>, Vector, Vec<f64>, Vector) {
    let h = z.len();
    let mut concat = Vec::with_capacity(3 * h);
    concat.extend_from_slice(z);
    concat.extend_from_slice(m);
    concat.extend_from_slice(h_prev);
    let mut pre_u = vec![0.0; h];
    affine_into(&params.w_u, &concat, &params.b_u, &mut pre_u);
    let u = linalg::relu(&pre_u);
    let mut pre_h = vec![0.0; h];
    affine_into(&params.w_h, &u, &params.b_h, &mut pre_h);
    let h_new = linalg::relu(&pre_h);
    (pre_u, u, pre_h, h_new)
}

pub fn encode(params: &CellParams, x: &[f64]) -> Result<Vector> {
    ensure!(
        x.len() == params.w_z.cols(),
        "encode: input has length {}, expected {}",
        x.len(),
        params.w_z.cols()
    );
    let mut pre = vec![0.0; params.b_z.len()];
    affine_into(&params.w_z, x, &params.b_z, &mut pre);
    Ok(linalg::relu(&pre))
}

fn check_state(cfg: &CellConfig, params: &CellParams, state: &CellState) -> Result<()> {
    params.check_shapes(cfg)?;
    ensure!(
        state.h.len() == cfg.hidden_dim,
        "hidden state has length {}, expected {}",
        state.h.len(),
        cfg.hidden_dim
    );
    ensure!(
        state.trace.shape() == (cfg.memory_size, cfg.hidden_dim),
        "trace has shape {:?}, expected {:?}",
        state.trace.shape(),
        (cfg.memory_size, cfg.hidden_dim)
    );
    Ok(())
}

/// Attention over memory slots: softmax of per-row cosine similarity between
/// `z` and `M + αH`, divided by the effective temperature.
pub fn attend(cfg: &CellConfig, params: &CellParams, state: &CellState, z: &[f64]) -> Result<Vector> {
    check_state(cfg, params, state)?;
    ensure!(z.len() == cfg.hidden_dim, "attend: z has length {}", z.len());
    let mem = EffectiveMemory::new(&params.memory, &state.trace, cfg.hebbian_alpha);
    let nz = dot(z, z).sqrt().max(NORM_EPS);
    let tau = cfg.effective_temperature();
    let mut logits: Vec<f64> = (0..cfg.memory_size)
        .map(|i| dot(z, mem.rows.row(i)) / (nz * mem.norms[i]) / tau)
        .collect();
    linalg::softmax_in_place(&mut logits);
    Ok(Vector::from_vec(logits))
}

/// `Σ_i a_i (M_i + αH_i)`.
pub fn retrieve(params: &CellParams, state: &CellState, attention: &[f64], alpha: f64) -> Result<Vector> {
    ensure!(
        attention.len() == params.memory.rows() && state.trace.shape() == params.memory.shape(),
        "retrieve: attention over {} slots against memory {:?} and trace {:?}",
        attention.len(),
        params.memory.shape(),
        state.trace.shape()
    );
    let mut out = vec![0.0; params.memory.cols()];
    for (i, &a) in attention.iter().enumerate() {
        linalg::axpy(a, params.memory.row(i), &mut out);
        linalg::axpy(a * alpha, state.trace.row(i), &mut out);
    }
    Ok(Vector::from_vec(out))
}

/// Decayed, noisy, clipped trace write:
/// `clip((1-η)H + η(C + ξ), lo, hi)` where `C` is the co-activation matrix
/// (`a ⊗ z`, or its batch mean). Noise is drawn only in train mode.
pub fn write_trace<R: Rng + ?Sized>(
    cfg: &CellConfig,
    trace: &Matrix,
    coactivation: &Matrix,
    mode: Mode,
    rng: &mut R,
) -> Result<Matrix> {
    ensure!(
        trace.shape() == coactivation.shape(),
        "trace {:?} and co-activation {:?} differ in shape",
        trace.shape(),
        coactivation.shape()
    );
    ensure!(cfg.clip_lo <= cfg.clip_hi, "clip bounds out of order");
    let eta = cfg.hebbian_eta;
    let keep = 1.0 - eta;
    let mut out = Matrix::zeros(trace.rows(), trace.cols());
    let noise = (mode == Mode::Train && cfg.noise_std > 0.0)
        .then(|| Normal::new(0.0, cfg.noise_std).expect("noise_std is finite and non-negative"));
    for ((dst, &h), &c) in out.as_mut_slice().iter_mut().zip(trace.as_slice()).zip(coactivation.as_slice()) {
        let xi = noise.as_ref().map_or(0.0, |n| n.sample(rng));
        *dst = (keep * h + eta * (c + xi)).clamp(cfg.clip_lo, cfg.clip_hi);
    }
    Ok(out)
}

/// Single-sequence Hebbian update from one step's attention and encoding.
/// The result carries no gradient.
pub fn hebbian_update<R: Rng + ?Sized>(
    cfg: &CellConfig,
    state: &CellState,
    attention: &[f64],
    z: &[f64],
    mode: Mode,
    rng: &mut R,
) -> Result<Matrix> {
    let co = linalg::outer(attention, z);
    write_trace(cfg, &state.trace, &co, mode, rng)
}

/// `h = ReLU(W_h · ReLU(W_u [z; m; h_prev] + b_u) + b_h)`.
pub fn integrate(params: &CellParams, z: &[f64], m: &[f64], h_prev: &[f64]) -> Result<Vector> {
    let h = params.b_u.len();
    ensure!(
        z.len() == h && m.len() == h && h_prev.len() == h,
        "integrate: lengths {}/{}/{} but hidden size is {h}",
        z.len(),
        m.len(),
        h_prev.len()
    );
    ensure!(
        params.w_u.shape() == (h, 3 * h) && params.w_h.shape() == (h, h),
        "integrate: weight shapes {:?} / {:?} do not match hidden size {h}",
        params.w_u.shape(),
        params.w_h.shape()
    );
    Ok(integrate_raw(params, z, m, h_prev).3)
}

/// One full cell step. Returns the successor state and the tape for BPTT.
pub fn step<R: Rng + ?Sized>(
    cfg: &CellConfig,
    params: &CellParams,
    state: &CellState,
    x: &[f64],
    mode: Mode,
    rng: &mut R,
) -> Result<(CellState, StepTape)> {
    check_state(cfg, params, state)?;
    ensure!(
        x.len() == cfg.input_dim,
        "step: input has length {}, expected {}",
        x.len(),
        cfg.input_dim
    );
    let mem = Arc::new(EffectiveMemory::new(&params.memory, &state.trace, cfg.hebbian_alpha));
    let tape = forward_step(params, mem, x, &state.h, cfg.effective_temperature());
    let trace = hebbian_update(cfg, state, &tape.attention, &tape.z, mode, rng)?;
    Ok((CellState { h: tape.h.clone(), trace }, tape))
}
