//! Dataset ingestion: IDX files, pixel scaling, row-as-timestep sequences,
//! stratified splits and the synthetic copy task.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{ensure, EnnError, Result};
use crate::model::SequenceBatch;
use crate::rng::{substream, Stream};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// MNIST image side length; also the sequence length and feature count.
pub const MNIST_SIDE: usize = 28;

/// Equal-length labelled sequences stored flat as `B × T × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub name: String,
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
    pub steps: usize,
    pub dim: usize,
    pub classes: usize,
}

impl SequenceDataset {
    pub fn new(name: impl Into<String>, inputs: Vec<f64>, labels: Vec<usize>, steps: usize, dim: usize, classes: usize) -> Result<Self> {
        let ds = Self { name: name.into(), inputs, labels, steps, dim, classes };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Inputs in `[0, 1]`, labels in range, sizes consistent.
    pub fn validate(&self) -> Result<()> {
        ensure!(self.steps >= 1 && self.dim >= 1 && self.classes >= 1, "{}: degenerate dimensions", self.name);
        ensure!(
            self.inputs.len() == self.len() * self.steps * self.dim,
            "{}: {} values for {} sequences of {}x{}",
            self.name,
            self.inputs.len(),
            self.len(),
            self.steps,
            self.dim
        );
        if let Some(v) = self.inputs.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(EnnError::contract(format!("{}: input value {v} outside [0, 1]", self.name)));
        }
        if let Some(c) = self.labels.iter().find(|&&c| c >= self.classes) {
            return Err(EnnError::contract(format!("{}: label {c} with {} classes", self.name, self.classes)));
        }
        Ok(())
    }

    pub fn sequence(&self, i: usize) -> &[f64] {
        let len = self.steps * self.dim;
        &self.inputs[i * len..(i + 1) * len]
    }

    /// One-hot label rows, `B × C`.
    pub fn one_hot(&self) -> Vec<Vec<f64>> {
        self.labels
            .iter()
            .map(|&c| {
                let mut row = vec![0.0; self.classes];
                row[c] = 1.0;
                row
            })
            .collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &c in &self.labels {
            counts[c] += 1;
        }
        counts
    }

    /// A new dataset holding the given samples, in that order.
    pub fn select(&self, indices: &[usize], name: impl Into<String>) -> SequenceDataset {
        let mut inputs = Vec::with_capacity(indices.len() * self.steps * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.sequence(i));
            labels.push(self.labels[i]);
        }
        SequenceDataset { name: name.into(), inputs, labels, steps: self.steps, dim: self.dim, classes: self.classes }
    }

    pub fn batch(&self, indices: &[usize]) -> Result<SequenceBatch> {
        let mut inputs = Vec::with_capacity(indices.len() * self.steps * self.dim);
        for &i in indices {
            inputs.extend_from_slice(self.sequence(i));
        }
        SequenceBatch::new(inputs, indices.iter().map(|&i| self.labels[i]).collect(), self.steps, self.dim)
    }
}

/// Raw images as stored in an IDX file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_u32_be(bytes: &[u8], offset: usize) -> Result<u32> {
    let b = bytes.get(offset..offset + 4).ok_or_else(|| {
        EnnError::format(offset as u64, format!("header truncated: need {} bytes, file has {}", offset + 4, bytes.len()))
    })?;
    Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = read_u32_be(bytes, 0)?;
    if magic != expected {
        return Err(EnnError::format(0, format!("bad magic 0x{magic:08x}, expected 0x{expected:08x}")));
    }
    Ok(())
}

fn check_payload(bytes: &[u8], header: usize, expected: usize) -> Result<()> {
    let actual = bytes.len() - header;
    if actual != expected {
        let what = if actual < expected { "truncated" } else { "oversized" };
        return Err(EnnError::format(
            bytes.len() as u64,
            format!("{what} payload: expected {expected} bytes, found {actual}"),
        ));
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IDX_IMAGES_MAGIC)?;
    let count = read_u32_be(bytes, 4)? as usize;
    let rows = read_u32_be(bytes, 8)? as usize;
    let cols = read_u32_be(bytes, 12)? as usize;
    check_payload(bytes, 16, count * rows * cols)?;
    Ok(IdxImages { count, rows, cols, pixels: bytes[16..].to_vec() })
}

/// Parses an IDX label file; every label must be below `classes`.
pub fn parse_idx_labels(bytes: &[u8], classes: usize) -> Result<Vec<u8>> {
    check_magic(bytes, IDX_LABELS_MAGIC)?;
    let count = read_u32_be(bytes, 4)? as usize;
    check_payload(bytes, 8, count)?;
    let labels = bytes[8..].to_vec();
    if let Some(pos) = labels.iter().position(|&l| l as usize >= classes) {
        return Err(EnnError::format(
            (8 + pos) as u64,
            format!("label {} out of range for {classes} classes", labels[pos]),
        ));
    }
    Ok(labels)
}

pub fn load_idx_images(path: &Path) -> Result<IdxImages> {
    let bytes = fs::read(path).map_err(|e| EnnError::io(path, e))?;
    parse_idx_images(&bytes)
}

pub fn load_idx_labels(path: &Path, classes: usize) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| EnnError::io(path, e))?;
    parse_idx_labels(&bytes, classes)
}

/// Fixed-range scaling `x / 255`.
pub fn minmax_scale(raw: &[u8]) -> Vec<f64> {
    raw.iter().map(|&p| f64::from(p) / 255.0).collect()
}

/// Scales 28×28 images and lays them out as sequences: step `t` is image row
/// `t`, features are that row's pixels.
pub fn to_row_sequences(images: &IdxImages) -> Result<Vec<f64>> {
    ensure!(
        images.rows == MNIST_SIDE && images.cols == MNIST_SIDE,
        "expected {MNIST_SIDE}x{MNIST_SIDE} images, got {}x{}",
        images.rows,
        images.cols
    );
    ensure!(images.pixels.len() == images.count * images.rows * images.cols, "pixel buffer size mismatch");
    // row-major image storage is already [image][row][col] = [seq][step][feature]
    Ok(minmax_scale(&images.pixels))
}

/// The inverse layout of [`to_row_sequences`]: one flat row-major image per sequence.
pub fn flatten_sequences(seqs: &[f64], steps: usize, dim: usize) -> Vec<Vec<f64>> {
    seqs.chunks(steps * dim).map(<[f64]>::to_vec).collect()
}

/// Builds an MNIST sequence dataset from parsed IDX images and labels.
pub fn mnist_dataset(name: &str, images: &IdxImages, labels: &[u8]) -> Result<SequenceDataset> {
    ensure!(
        images.count == labels.len(),
        "{} images but {} labels",
        images.count,
        labels.len()
    );
    let inputs = to_row_sequences(images)?;
    SequenceDataset::new(name, inputs, labels.iter().map(|&l| l as usize).collect(), MNIST_SIDE, MNIST_SIDE, 10)
}

/// Loads the standard `{train,t10k}-{images-idx3,labels-idx1}-ubyte` pair
/// from a directory.
pub fn load_mnist(dir: &Path, split: MnistSplit) -> Result<SequenceDataset> {
    let prefix = match split {
        MnistSplit::Train => "train",
        MnistSplit::Test => "t10k",
    };
    let images = load_idx_images(&dir.join(format!("{prefix}-images-idx3-ubyte")))?;
    let labels = load_idx_labels(&dir.join(format!("{prefix}-labels-idx1-ubyte")), 10)?;
    mnist_dataset(&format!("mnist-{prefix}"), &images, &labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MnistSplit {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: SequenceDataset,
    pub val: SequenceDataset,
    pub test: SequenceDataset,
}

/// Seeded, class-stratified, disjoint subsets.
///
/// `test_n` samples are drawn first, then `train_n` from the remainder; the
/// validation set is the first `round(train_n · val_fraction)` of the training
/// draw. Each draw takes classes round-robin so class counts stay within one
/// of each other while every class has samples left.
pub fn subset_and_split(ds: &SequenceDataset, train_n: usize, test_n: usize, val_fraction: f64, seed: u64) -> Result<Splits> {
    ensure!(
        train_n + test_n <= ds.len(),
        "requested {train_n} train + {test_n} test samples from {} available",
        ds.len()
    );
    ensure!((0.0..1.0).contains(&val_fraction), "val_fraction must lie in [0, 1)");
    let mut rng = substream(seed, Stream::Data);
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); ds.classes];
    for (i, &c) in ds.labels.iter().enumerate() {
        pools[c].push(i);
    }
    for pool in &mut pools {
        pool.shuffle(&mut rng);
        pool.reverse(); // pop() then yields the shuffled order
    }
    let test = round_robin(&mut pools, test_n);
    let train_all = round_robin(&mut pools, train_n);
    let val_n = (train_n as f64 * val_fraction).round() as usize;
    let (val, train) = train_all.split_at(val_n);

    let mut finish = |mut idx: Vec<usize>, tag: &str| {
        idx.shuffle(&mut rng);
        ds.select(&idx, format!("{}-{tag}", ds.name))
    };
    Ok(Splits {
        val: finish(val.to_vec(), "val"),
        train: finish(train.to_vec(), "train"),
        test: finish(test, "test"),
    })
}

/// Draws `n` indices cycling over classes. The result is grouped so that any
/// prefix is itself balanced.
fn round_robin(pools: &mut [Vec<usize>], n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let before = out.len();
        for pool in pools.iter_mut() {
            if out.len() == n {
                break;
            }
            if let Some(i) = pool.pop() {
                out.push(i);
            }
        }
        if out.len() == before {
            break;
        }
    }
    out
}

/// Synthetic memory probe: a one-hot token over `dim` classes at `t = 0`,
/// zeros afterwards; the label is the token. `delay` zero steps follow the
/// token, and any remaining steps up to `steps` are zero as well.
pub fn make_copy_task(count: usize, steps: usize, dim: usize, delay: usize, seed: u64) -> Result<SequenceDataset> {
    ensure!(delay < steps, "delay {delay} must be shorter than the sequence length {steps}");
    ensure!(dim >= 1, "copy task needs at least one token class");
    let mut rng = substream(seed, Stream::Synth);
    let mut inputs = vec![0.0; count * steps * dim];
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let token = rng.random_range(0..dim);
        inputs[i * steps * dim + token] = 1.0;
        labels.push(token);
    }
    SequenceDataset::new(format!("copy-T{steps}-d{dim}-delay{delay}"), inputs, labels, steps, dim, dim)
}

/// Checks that two datasets share no sample position from a common parent.
pub fn disjoint(a: &[usize], b: &[usize]) -> bool {
    let set: HashSet<_> = a.iter().collect();
    b.iter().all(|i| !set.contains(i))
}
