//! An independent double-double forward pass of the engram classifier, used
//! as a finite-difference oracle whose rounding noise sits far below the
//! smallest gradient components BPTT produces in f64.

use enn_core::model::{ClassifierParams, SequenceBatch, Trainable, LOG_FLOOR};
use enn_core::linalg::NORM_EPS;
use enn_core::{CellConfig, Matrix};
use twofloat::TwoFloat as D;

fn d(v: f64) -> D {
    D::from(v)
}

fn relu(v: D) -> D {
    if v > 0.0 {
        v
    } else {
        d(0.0)
    }
}

fn affine(w: &[f64], rows: usize, x: &[D], b: &[f64]) -> Vec<D> {
    let cols = x.len();
    (0..rows)
        .map(|i| {
            let row = &w[i * cols..(i + 1) * cols];
            row.iter().zip(x).fold(d(b[i]), |acc, (&wij, &xj)| acc + xj * wij)
        })
        .collect()
}

/// `a / b` by long division: each f64 quotient digit is corrected against
/// the exact double-double remainder. The crate's `Div` loses precision to
/// f64 level on some inputs.
pub fn div(a: D, b: D) -> D {
    let q0 = a.hi() / b.hi();
    let r = a - b * q0;
    let q1 = r.hi() / b.hi();
    let r = r - b * q1;
    let q2 = r.hi() / b.hi();
    (d(q0) + q1) + q2
}

/// `e^x` to full double-double precision. The crate's own `exp` is only
/// accurate to about 1e-17, which finite differences would amplify.
pub fn exp(x: D) -> D {
    const HALVINGS: i32 = 10;
    let k = (x.hi() / std::f64::consts::LN_2).round();
    let r = (x - twofloat::consts::LN_2 * k) * (1.0 / f64::from(1 << HALVINGS));
    // expm1(r) by Taylor series, |r| < 4e-4
    let mut term = r;
    let mut em1 = r;
    for n in 2..=12 {
        term = div(term * r, d(n as f64));
        em1 += term;
    }
    for _ in 0..HALVINGS {
        em1 = em1 * 2.0 + em1 * em1;
    }
    (em1 + 1.0) * 2f64.powi(k as i32)
}

/// Natural log by Newton steps on [`exp`] from the f64 estimate.
pub fn ln(y: D) -> D {
    let mut x = d(y.hi().ln());
    for _ in 0..3 {
        x = x + y * exp(-x) - 1.0;
    }
    x
}

fn softmax(v: &[D]) -> Vec<D> {
    let max = v.iter().copied().fold(v[0], |m, x| if x > m { x } else { m });
    let e: Vec<D> = v.iter().map(|&x| exp(x - max)).collect();
    let sum = e.iter().copied().fold(d(0.0), |a, x| a + x);
    e.into_iter().map(|x| div(x, sum)).collect()
}

fn norm(v: &[D]) -> D {
    let n = v.iter().fold(d(0.0), |a, &x| a + x * x).sqrt();
    if n > NORM_EPS {
        n
    } else {
        d(NORM_EPS)
    }
}

/// Mean cross-entropy of `params` on `batch`, reading `traces[t]` at step `t`.
pub fn loss(cfg: &CellConfig, params: &ClassifierParams, batch: &SequenceBatch, traces: &[Matrix]) -> D {
    let (h, n) = (cfg.hidden_dim, cfg.memory_size);
    let c = &params.cell;
    let tau = div(d(cfg.temperature), d(10.0) * cfg.sparsity_strength + 1.0);
    let mut total = d(0.0);
    for b in 0..batch.len() {
        let mut hid = vec![d(0.0); h];
        for (t, trace) in traces.iter().enumerate() {
            let x: Vec<D> = batch.input(b, t).iter().map(|&v| d(v)).collect();
            let z: Vec<D> = affine(c.w_z.as_slice(), h, &x, &c.b_z).into_iter().map(relu).collect();
            let mem: Vec<Vec<D>> = (0..n)
                .map(|i| {
                    c.memory.row(i).iter().zip(trace.row(i)).map(|(&m, &hh)| d(m) + d(hh) * cfg.hebbian_alpha).collect()
                })
                .collect();
            let nz = norm(&z);
            let scores: Vec<D> = mem
                .iter()
                .map(|e| {
                    let dot = z.iter().zip(e).fold(d(0.0), |a, (&p, &q)| a + p * q);
                    div(div(dot, nz * norm(e)), tau)
                })
                .collect();
            let a = softmax(&scores);
            let m: Vec<D> = (0..h).map(|j| (0..n).fold(d(0.0), |acc, i| acc + a[i] * mem[i][j])).collect();
            let cat: Vec<D> = z.iter().chain(&m).chain(&hid).copied().collect();
            let u: Vec<D> = affine(c.w_u.as_slice(), h, &cat, &c.b_u).into_iter().map(relu).collect();
            hid = affine(c.w_h.as_slice(), h, &u, &c.b_h).into_iter().map(relu).collect();
        }
        let logits = affine(params.w_out.as_slice(), params.num_classes(), &hid, &params.b_out);
        let p = softmax(&logits);
        total -= ln(p[batch.labels()[b]] + LOG_FLOOR);
    }
    div(total, d(batch.len() as f64))
}

/// Central differences of [`loss`] in double-double, one per scalar
/// parameter, in the same buffer order as `params.tensors()`.
pub fn central_differences(
    cfg: &CellConfig,
    params: &ClassifierParams,
    batch: &SequenceBatch,
    traces: &[Matrix],
    epsilon: f64,
) -> Vec<Vec<f64>> {
    let mut work = params.clone();
    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.data.len()).collect();
    let mut out = Vec::with_capacity(sizes.len());
    for (k, &len) in sizes.iter().enumerate() {
        let mut g = Vec::with_capacity(len);
        for j in 0..len {
            let orig = work.tensors_mut()[k][j];
            // θ ± ε is not exact in f64, so difference against the values actually used
            work.tensors_mut()[k][j] = orig + epsilon;
            let up = work.tensors()[k].data[j];
            let plus = loss(cfg, &work, batch, traces);
            work.tensors_mut()[k][j] = orig - epsilon;
            let down = work.tensors()[k].data[j];
            let minus = loss(cfg, &work, batch, traces);
            work.tensors_mut()[k][j] = orig;
            g.push(f64::from(div(plus - minus, d(up) - d(down))));
        }
        out.push(g);
    }
    out
}
