//! Deterministic fixtures shared by the kernel benchmarks.

use enn_core::cell::{self, CellConfig, CellState, InitMode};
use enn_core::rng::{substream, Stream};
use enn_core::{EnnModel, Matrix, SequenceBatch};

/// Row-sequence MNIST shape: 28 steps of 28 features, 10 classes.
pub const MNIST_STEPS: usize = 28;
pub const MNIST_DIM: usize = 28;
pub const MNIST_CLASSES: usize = 10;

pub fn mnist_config(hidden_dim: usize, memory_size: usize) -> CellConfig {
    CellConfig { input_dim: MNIST_DIM, hidden_dim, memory_size, ..CellConfig::default() }
}

/// Smooth pseudo-random values in `[0, 1]`, cheap and reproducible.
pub fn wave(n: usize, phase: f64) -> Vec<f64> {
    (0..n).map(|i| 0.5 + 0.5 * (i as f64 * 0.731 + phase).sin()).collect()
}

pub fn model(cfg: &CellConfig) -> EnnModel {
    EnnModel::new(cfg.clone(), MNIST_CLASSES).expect("valid bench config")
}

pub fn batch(size: usize) -> SequenceBatch {
    let inputs = wave(size * MNIST_STEPS * MNIST_DIM, 0.3);
    let labels = (0..size).map(|b| b % MNIST_CLASSES).collect();
    SequenceBatch::new(inputs, labels, MNIST_STEPS, MNIST_DIM).expect("consistent batch")
}

/// A state with non-zero hidden activity and a populated trace.
pub fn warm_state(cfg: &CellConfig, model: &EnnModel) -> CellState {
    let mut state = cell::initial_state(cfg, InitMode::Zeros);
    let mut rng = substream(cfg.seed, Stream::Noise);
    for t in 0..4 {
        let x = wave(cfg.input_dim, t as f64);
        state = cell::step(cfg, &model.params.cell, &state, &x, cell::Mode::Train, &mut rng)
            .expect("shapes agree")
            .0;
    }
    state
}

pub fn matrix(rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, wave(rows * cols, 1.1)).expect("sized data")
}
