use super::Trainable;

/// Adam with bias correction. Moment buffers mirror the parameter buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<P: Trainable>(params: &P, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect();
        Self { beta1, beta2, eps, t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    pub fn step<P: Trainable>(&mut self, params: &mut P, grads: &P, lr: f64) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let grads = grads.tensors();
        for (k, theta) in params.tensors_mut().into_iter().enumerate() {
            let g = grads[k].data;
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..theta.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                theta[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::CellConfig;
    use crate::model::ClassifierParams;
    use crate::rng::{substream, Stream};

    fn params() -> ClassifierParams {
        let cfg = CellConfig { input_dim: 2, hidden_dim: 3, memory_size: 2, ..CellConfig::default() };
        ClassifierParams::init(&cfg, 2, &mut substream(1, Stream::Init))
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = params();
        let before = p.clone();
        let mut adam = Adam::new(&p, 0.9, 0.999, 1e-8);
        let g = p.zeros_like();
        for _ in 0..3 {
            adam.step(&mut p, &g, 1e-3);
        }
        assert_eq!(p, before);
        assert_eq!(adam.timestep(), 3);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = params();
        let before = p.clone();
        let mut g = p.zeros_like();
        for buf in g.tensors_mut() {
            for (i, v) in buf.iter_mut().enumerate() {
                *v = if i % 2 == 0 { 0.7 } else { -3.0 };
            }
        }
        let mut adam = Adam::new(&p, 0.9, 0.999, 1e-8);
        adam.step(&mut p, &g, 1e-3);
        for ((a, b), gv) in p.tensors().iter().zip(before.tensors()).zip(g.tensors()) {
            for i in 0..a.data.len() {
                let delta = a.data[i] - b.data[i];
                assert!((delta.abs() - 1e-3).abs() < 1e-9);
                assert_eq!(delta.signum(), -gv.data[i].signum());
            }
        }
    }

    #[test]
    fn identical_histories_give_identical_updates() {
        let mut p = params();
        p.b_out[0] = 0.25;
        p.b_out[1] = 0.25;
        let mut adam = Adam::new(&p, 0.9, 0.999, 1e-8);
        for step in 0..5 {
            let mut g = p.zeros_like();
            g.b_out[0] = 0.1 * step as f64 - 0.2;
            g.b_out[1] = g.b_out[0];
            adam.step(&mut p, &g, 1e-2);
        }
        assert_eq!(p.b_out[0], p.b_out[1]);
    }
}
