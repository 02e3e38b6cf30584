//! Engram neural network engine.
//!
//! A recurrent cell with a trainable memory bank, cosine-attention retrieval
//! and an online Hebbian trace, trained with full backpropagation through time.
//!
//! - [`linalg`]: dense `f64` kernels
//! - [`cell`]: the engram cell step and its parts
//! - [`grad`]: BPTT with the trace held constant, plus a finite-difference oracle
//! - [`model`]: classifier head, baseline RNN, Adam, training and evaluation,
//!   parameter files
//! - [`data`]: IDX parsing, preprocessing, splits, synthetic copy task
//! - [`monitor`]: trace snapshots and exports

// Kernels index several buffers in lockstep; iterator chains read worse there.
#![allow(clippy::needless_range_loop)]

pub mod cell;
pub mod data;
pub mod error;
pub mod grad;
pub mod linalg;
pub mod model;
pub mod monitor;
pub mod rng;

pub use cell::{CellConfig, CellParams, CellState, InitMode, Mode, StepTape, WeightInit};
pub use data::SequenceDataset;
pub use error::{EnnError, Result};
pub use grad::{GradCheckReport, ParamGrads, UnrollTape};
pub use linalg::{Matrix, Vector};
pub use model::{
    BatchOutput, ClassifierParams, EnnModel, EpochMetrics, Evaluation, RnnModel, RnnParams,
    SequenceBatch, SequenceModel, TrainConfig, TrainReport, Trainable,
};
pub use monitor::TraceSnapshot;
