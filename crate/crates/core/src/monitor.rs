//! Trace diagnostics: per-epoch snapshots with summary statistics, difference
//! maps, CSV statistics and PGM heatmaps.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{ensure, EnnError, Result};
use crate::linalg::Matrix;

/// Entries with `|v|` below this count as near zero.
pub const SPARSITY_THRESHOLD: f64 = 1e-4;

pub const STATS_HEADER: &str = "epoch,mean_abs,max,min,sparsity_fraction";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSnapshot {
    pub epoch: usize,
    pub trace: Matrix,
    pub mean_abs: f64,
    pub max: f64,
    pub min: f64,
    pub sparsity_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStats {
    pub mean_abs: f64,
    pub max: f64,
    pub min: f64,
    pub sparsity_fraction: f64,
}

pub fn trace_stats(trace: &Matrix) -> TraceStats {
    let data = trace.as_slice();
    if data.is_empty() {
        return TraceStats { mean_abs: 0.0, max: 0.0, min: 0.0, sparsity_fraction: 1.0 };
    }
    let (mut abs_sum, mut max, mut min, mut near_zero) = (0.0, f64::NEG_INFINITY, f64::INFINITY, 0usize);
    for &v in data {
        abs_sum += v.abs();
        max = max.max(v);
        min = min.min(v);
        if v.abs() < SPARSITY_THRESHOLD {
            near_zero += 1;
        }
    }
    let n = data.len() as f64;
    TraceStats { mean_abs: abs_sum / n, max, min, sparsity_fraction: near_zero as f64 / n }
}

pub fn snapshot(epoch: usize, trace: &Matrix) -> Result<TraceSnapshot> {
    ensure!(trace.is_finite(), "trace snapshot at epoch {epoch} holds non-finite values");
    let s = trace_stats(trace);
    Ok(TraceSnapshot {
        epoch,
        trace: trace.clone(),
        mean_abs: s.mean_abs,
        max: s.max,
        min: s.min,
        sparsity_fraction: s.sparsity_fraction,
    })
}

impl TraceSnapshot {
    pub fn stats(&self) -> TraceStats {
        TraceStats { mean_abs: self.mean_abs, max: self.max, min: self.min, sparsity_fraction: self.sparsity_fraction }
    }
}

/// `b.trace − a.trace`
pub fn diff(a: &TraceSnapshot, b: &TraceSnapshot) -> Result<Matrix> {
    b.trace.sub(&a.trace)
}

fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn stats_csv(snapshots: &[TraceSnapshot]) -> String {
    let mut out = String::with_capacity(64 * (snapshots.len() + 1));
    out.push_str(STATS_HEADER);
    out.push('\n');
    for s in snapshots {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.epoch,
            sig9(s.mean_abs),
            sig9(s.max),
            sig9(s.min),
            sig9(s.sparsity_fraction)
        );
    }
    out
}

pub fn export_stats_csv(snapshots: &[TraceSnapshot], path: &Path) -> Result<()> {
    fs::write(path, stats_csv(snapshots)).map_err(|e| EnnError::io(path, e))
}

/// Reads back `(epoch, stats)` rows written by [`stats_csv`].
pub fn parse_stats_csv(text: &str) -> Result<Vec<(usize, TraceStats)>> {
    let mut lines = text.lines();
    ensure!(lines.next() == Some(STATS_HEADER), "trace stats CSV: missing or wrong header");
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let bad = || EnnError::contract(format!("trace stats CSV line {}: malformed row {line:?}", i + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        rows.push((
            f[0].parse().map_err(|_| bad())?,
            TraceStats { mean_abs: num(f[1])?, max: num(f[2])?, min: num(f[3])?, sparsity_fraction: num(f[4])? },
        ));
    }
    Ok(rows)
}

/// Maps `[lo, hi]` linearly onto `0..=255`, rounding half up and clamping.
pub fn pixel(v: f64, lo: f64, hi: f64) -> u8 {
    let scaled = ((v - lo) / (hi - lo) * 255.0 + 0.5).floor();
    scaled.clamp(0.0, 255.0) as u8
}

/// Binary 8-bit PGM, one pixel per entry, rows are memory slots.
pub fn encode_pgm(m: &Matrix, lo: f64, hi: f64) -> Result<Vec<u8>> {
    ensure!(lo < hi, "heatmap range [{lo}, {hi}] is empty");
    let header = format!("P5\n{} {}\n255\n", m.cols(), m.rows());
    let mut out = Vec::with_capacity(header.len() + m.as_slice().len());
    out.extend_from_slice(header.as_bytes());
    out.extend(m.as_slice().iter().map(|&v| pixel(v, lo, hi)));
    Ok(out)
}

pub fn export_heatmap_pgm(m: &Matrix, lo: f64, hi: f64, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm(m, lo, hi)?).map_err(|e| EnnError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn zero_trace_stats() {
        let s = snapshot(0, &Matrix::zeros(4, 3)).unwrap();
        assert_eq!((s.mean_abs, s.max, s.min, s.sparsity_fraction), (0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn symmetric_entries() {
        let s = snapshot(2, &m(&[vec![0.1, -0.1]])).unwrap();
        assert!((s.mean_abs - 0.1).abs() < 1e-15);
        assert_eq!((s.max, s.min, s.sparsity_fraction), (0.1, -0.1, 0.0));
        let s = snapshot(1, &m(&[vec![1e-5, 0.05], vec![-2e-5, 0.0]])).unwrap();
        assert_eq!(s.sparsity_fraction, 0.75);
        assert!(snapshot(0, &m(&[vec![f64::NAN]])).is_err());
    }

    #[test]
    fn diff_examples() {
        let a = snapshot(0, &m(&[vec![0.01, -0.02], vec![0.03, 0.0]])).unwrap();
        let z = snapshot(0, &Matrix::zeros(2, 2)).unwrap();
        assert_eq!(diff(&a, &a).unwrap(), Matrix::zeros(2, 2));
        assert_eq!(diff(&z, &a).unwrap(), a.trace);
        let ab = diff(&a, &z).unwrap();
        let ba = diff(&z, &a).unwrap();
        for (x, y) in ab.as_slice().iter().zip(ba.as_slice()) {
            assert_eq!(*x, -*y);
        }
        let other = snapshot(0, &Matrix::zeros(3, 2)).unwrap();
        assert!(matches!(diff(&a, &other), Err(EnnError::Contract(_))));
    }

    #[test]
    fn csv_layout() {
        assert_eq!(stats_csv(&[]), "epoch,mean_abs,max,min,sparsity_fraction\n");
        let snaps: Vec<_> = (0..3).map(|e| snapshot(e, &m(&[vec![0.1 * e as f64 / 3.0, -0.0123456789]])).unwrap()).collect();
        let text = stats_csv(&snaps);
        assert_eq!(text.lines().count(), 4);
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
        let row = text.lines().nth(1).unwrap();
        assert_eq!(row, "0,6.17283945e-3,0.00000000e0,-1.23456789e-2,5.00000000e-1");
        let back = parse_stats_csv(&text).unwrap();
        for ((e, st), s) in back.iter().zip(&snaps) {
            assert_eq!(*e, s.epoch);
            for (x, y) in [(st.mean_abs, s.mean_abs), (st.max, s.max), (st.min, s.min), (st.sparsity_fraction, s.sparsity_fraction)] {
                assert!((x - y).abs() < 1e-8);
            }
        }
        assert!(parse_stats_csv("epoch,x\n").is_err());
        assert!(parse_stats_csv(&format!("{STATS_HEADER}\n1,2,3\n")).is_err());
    }

    #[test]
    fn csv_written_to_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        export_stats_csv(&[snapshot(0, &Matrix::zeros(1, 1)).unwrap()], &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), format!("{STATS_HEADER}\n0,0.00000000e0,0.00000000e0,0.00000000e0,1.00000000e0\n"));
        let err = export_stats_csv(&[], &dir.path().join("no/such/dir.csv")).unwrap_err();
        assert!(err.to_string().contains("no/such/dir.csv"));
    }

    #[test]
    fn pgm_examples() {
        let bytes = encode_pgm(&Matrix::zeros(2, 3), -0.1, 0.1).unwrap();
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert_eq!(bytes.len(), 11 + 6);
        assert!(bytes[11..].iter().all(|&p| p == 128));

        let ends = encode_pgm(&m(&[vec![0.1, -0.1, 0.5, -3.0]]), -0.1, 0.1).unwrap();
        assert_eq!(&ends[ends.len() - 4..], &[255, 0, 255, 0]);
        assert!(encode_pgm(&Matrix::zeros(1, 1), 0.1, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn stats_recompute_exactly(vals in proptest::collection::vec(-0.1f64..0.1, 1..60)) {
            let n = vals.len();
            let t = Matrix::from_vec(1, n, vals).unwrap();
            let s = snapshot(3, &t).unwrap();
            prop_assert_eq!(s.stats(), trace_stats(&s.trace));
            prop_assert!(s.min <= s.max && s.mean_abs >= 0.0);
        }

        #[test]
        fn pgm_is_monotone(a in -0.2f64..0.2, b in -0.2f64..0.2) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(pixel(lo, -0.1, 0.1) <= pixel(hi, -0.1, 0.1));
        }
    }
}
