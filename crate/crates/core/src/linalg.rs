//! Dense row-major `f64` kernels.
//!
//! The checked operations (`matvec`, `outer`, `softmax`, ...) validate shapes and
//! return [`EnnError::Contract`] on mismatch. The slice kernels (`dot`, `axpy`,
//! `gemv_into`, ...) are the unchecked inner loops used on hot paths after the
//! caller has validated shapes once.

use std::ops::{Deref, DerefMut};

use crate::error::{ensure, Result};

/// Default floor applied to vector norms inside [`cosine`].
pub const NORM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Self { data: vec![0.0; len] }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self { data }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Self { data }
    }
}

impl From<&[f64]> for Vector {
    fn from(data: &[f64]) -> Self {
        Self { data: data.to_vec() }
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.data
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        ensure!(
            data.len() == rows * cols,
            "matrix data has {} entries, expected {rows}x{cols}",
            data.len()
        );
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            ensure!(r.len() == cols, "row {i} has length {}, expected {cols}", r.len());
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        ensure!(
            self.shape() == other.shape(),
            "cannot subtract {}x{} from {}x{}",
            other.rows,
            other.cols,
            self.rows,
            self.cols
        );
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }
}

pub fn matvec(m: &Matrix, v: &[f64]) -> Result<Vector> {
    ensure!(
        m.cols == v.len(),
        "matvec: matrix is {}x{} but vector has length {}",
        m.rows,
        m.cols,
        v.len()
    );
    let mut out = vec![0.0; m.rows];
    gemv_into(m, v, &mut out);
    Ok(Vector::from_vec(out))
}

pub fn outer(a: &[f64], b: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(a.len(), b.len());
    for (i, &ai) in a.iter().enumerate() {
        for (dst, &bj) in m.row_mut(i).iter_mut().zip(b) {
            *dst = ai * bj;
        }
    }
    m
}

pub fn relu(v: &[f64]) -> Vector {
    Vector::from_vec(v.iter().map(|&x| x.max(0.0)).collect())
}

pub fn softmax(v: &[f64]) -> Result<Vector> {
    ensure!(!v.is_empty(), "softmax of an empty vector");
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    Ok(Vector::from_vec(out))
}

/// `a·b / (max(|a|, eps) · max(|b|, eps))`.
pub fn cosine(a: &[f64], b: &[f64], eps: f64) -> Result<f64> {
    ensure!(
        a.len() == b.len(),
        "cosine: lengths {} and {} differ",
        a.len(),
        b.len()
    );
    let na = dot(a, a).sqrt().max(eps);
    let nb = dot(b, b).sqrt().max(eps);
    Ok(dot(a, b) / (na * nb))
}

pub fn clip(m: &Matrix, lo: f64, hi: f64) -> Result<Matrix> {
    ensure!(lo <= hi, "clip: lower bound {lo} exceeds upper bound {hi}");
    let mut out = m.clone();
    clip_in_place(out.as_mut_slice(), lo, hi);
    Ok(out)
}

// ---------------------------------------------------------------------------
// unchecked slice kernels

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out = m · x`
#[inline]
pub fn gemv_into(m: &Matrix, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.cols, x.len());
    debug_assert_eq!(m.rows, out.len());
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(m.row(i), x);
    }
}

/// `out = m · x + b`
#[inline]
pub fn affine_into(m: &Matrix, x: &[f64], b: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.rows, b.len());
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(m.row(i), x) + b[i];
    }
}

/// `out += mᵀ · g`
#[inline]
pub fn gemv_t_acc(m: &Matrix, g: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.rows, g.len());
    debug_assert_eq!(m.cols, out.len());
    for (i, &gi) in g.iter().enumerate() {
        if gi != 0.0 {
            axpy(gi, m.row(i), out);
        }
    }
}

/// `m += scale · g ⊗ x`
#[inline]
pub fn outer_acc(m: &mut Matrix, scale: f64, g: &[f64], x: &[f64]) {
    debug_assert_eq!(m.rows, g.len());
    debug_assert_eq!(m.cols, x.len());
    for (i, &gi) in g.iter().enumerate() {
        if gi != 0.0 {
            axpy(scale * gi, x, m.row_mut(i));
        }
    }
}

/// Max-subtracted softmax, in place. Entries that underflow are floored at
/// `f64::MIN_POSITIVE` so the output stays strictly positive.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x = (*x / sum).max(f64::MIN_POSITIVE);
    }
}

pub fn relu_in_place(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = x.max(0.0);
    }
}

pub fn clip_in_place(v: &mut [f64], lo: f64, hi: f64) {
    for x in v.iter_mut() {
        *x = x.clamp(lo, hi);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::EnnError;
    use proptest::prelude::*;

    #[test]
    fn matvec_examples() {
        let v = matvec(&Matrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(&*v, &[1.0, 2.0, 3.0]);
        let v = matvec(&Matrix::zeros(2, 3), &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(&*v, &[0.0, 0.0]);
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(&*matvec(&m, &[1.0, 1.0]).unwrap(), &[3.0, 7.0]);
    }

    #[test]
    fn matvec_rejects_mismatch() {
        let err = matvec(&Matrix::zeros(2, 3), &[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, EnnError::Contract(_)));
    }

    #[test]
    fn outer_examples() {
        let m = outer(&[1.0, 0.0], &[2.0, 3.0]);
        assert_eq!(m, Matrix::from_rows(&[vec![2.0, 3.0], vec![0.0, 0.0]]).unwrap());
        assert_eq!(outer(&[0.0, 0.0], &[5.0, 5.0]), Matrix::zeros(2, 2));
        assert_eq!(outer(&[2.0], &[3.0]).as_slice(), &[6.0]);
    }

    #[test]
    fn relu_examples() {
        assert_eq!(&*relu(&[-1.0, 0.0, 2.0]), &[0.0, 0.0, 2.0]);
        assert_eq!(&*relu(&[0.0, 0.0]), &[0.0, 0.0]);
        assert_eq!(&*relu(&[3.5]), &[3.5]);
    }

    #[test]
    fn softmax_examples() {
        let s = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for &p in s.iter() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let s = softmax(&[2f64.ln(), 0.0, 0.0]).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-15);
        assert!((s[1] - 0.25).abs() < 1e-15);
        assert!((s[2] - 0.25).abs() < 1e-15);
        assert_eq!(&*softmax(&[1000.0, 1000.0]).unwrap(), &[0.5, 0.5]);
        assert!(softmax(&[]).is_err());
    }

    /// Scalar reference of the eps-floored cosine.
    fn cosine_reference(a: &[f64], b: &[f64], eps: f64) -> f64 {
        let mut ab = 0.0;
        let mut aa = 0.0;
        let mut bb = 0.0;
        for i in 0..a.len() {
            ab += a[i] * b[i];
            aa += a[i] * a[i];
            bb += b[i] * b[i];
        }
        let na = if aa.sqrt() < eps { eps } else { aa.sqrt() };
        let nb = if bb.sqrt() < eps { eps } else { bb.sqrt() };
        ab / (na * nb)
    }

    #[test]
    fn cosine_examples() {
        let a = [1.0, 2.0, 3.0];
        assert!((cosine(&a, &a, NORM_EPS).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0], NORM_EPS).unwrap(), 0.0);
        let c = cosine(&[0.0, 0.0], &[1.0, 1.0], 1e-8).unwrap();
        assert!(c.is_finite());
        assert_eq!(c, cosine_reference(&[0.0, 0.0], &[1.0, 1.0], 1e-8));
        let tiny = [1e-10, -2e-10];
        let c = cosine(&tiny, &[1.0, 1.0], 1e-8).unwrap();
        assert!((c - cosine_reference(&tiny, &[1.0, 1.0], 1e-8)).abs() < 1e-18);
        assert!(cosine(&[1.0], &[1.0, 2.0], NORM_EPS).is_err());
    }

    #[test]
    fn clip_examples() {
        let m = Matrix::from_rows(&[vec![0.5, -0.5]]).unwrap();
        assert_eq!(clip(&m, -0.1, 0.1).unwrap().as_slice(), &[0.1, -0.1]);
        let m = Matrix::from_rows(&[vec![0.05]]).unwrap();
        assert_eq!(clip(&m, -0.1, 0.1).unwrap().as_slice(), &[0.05]);
        let m = Matrix::from_rows(&[vec![-3.0, 0.0, 3.0]]).unwrap();
        assert_eq!(clip(&m, 0.0, 0.0).unwrap().as_slice(), &[0.0, 0.0, 0.0]);
        assert!(matches!(clip(&m, 1.0, -1.0), Err(EnnError::Contract(_))));
    }

    #[test]
    fn kernels_match_scalar_loops() {
        let m = Matrix::from_vec(3, 5, (0..15).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let x: Vec<f64> = (0..5).map(|i| i as f64 - 1.5).collect();
        let g = [0.3, -1.2, 0.7];
        let mut out = vec![0.0; 5];
        gemv_t_acc(&m, &g, &mut out);
        for j in 0..5 {
            let expect: f64 = (0..3).map(|i| m.get(i, j) * g[i]).sum();
            assert!((out[j] - expect).abs() < 1e-14);
        }
        let mut acc = Matrix::zeros(3, 5);
        outer_acc(&mut acc, 2.0, &g, &x);
        for i in 0..3 {
            for j in 0..5 {
                assert!((acc.get(i, j) - 2.0 * g[i] * x[j]).abs() < 1e-14);
            }
        }
    }

    fn finite_vec(max_len: usize, mag: f64) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-mag..mag, 1..max_len)
    }

    proptest! {
        #[test]
        fn softmax_normalized_and_positive(v in finite_vec(40, 1e6)) {
            let s = softmax(&v).unwrap();
            let sum: f64 = s.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            for p in s.iter() {
                prop_assert!(*p > 0.0 && *p <= 1.0);
            }
        }

        #[test]
        fn cosine_self_is_one(v in finite_vec(30, 1e3)) {
            prop_assume!(dot(&v, &v).sqrt() >= NORM_EPS);
            prop_assert!((cosine(&v, &v, NORM_EPS).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn outer_matches_scalar_loop(a in finite_vec(8, 10.0), b in finite_vec(8, 10.0)) {
            let m = outer(&a, &b);
            prop_assert_eq!(m.shape(), (a.len(), b.len()));
            for i in 0..a.len() {
                for j in 0..b.len() {
                    prop_assert_eq!(m.get(i, j), a[i] * b[j]);
                }
            }
        }

        #[test]
        fn clip_idempotent(v in finite_vec(30, 5.0), lo in -1.0..0.0f64, width in 0.0..2.0f64) {
            let m = Matrix::from_vec(1, v.len(), v).unwrap();
            let once = clip(&m, lo, lo + width).unwrap();
            prop_assert_eq!(clip(&once, lo, lo + width).unwrap(), once.clone());
            for &x in once.as_slice() {
                prop_assert!(x >= lo && x <= lo + width);
            }
        }
    }
}
