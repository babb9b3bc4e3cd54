use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are kept in `f64` whatever the parameter type.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    /// Updates applied so far.
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        Self {
            config,
            t: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    /// Applies one update. Returns `false` and leaves everything untouched when the
    /// gradient or the resulting parameters would be non-finite.
    pub fn step<S: Scalar>(&mut self, params: &mut [S], grad: &[S]) -> bool {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(grad.len(), self.m.len(), "gradient length mismatch");
        if grad.iter().any(|g| !g.is_finite()) {
            return false;
        }
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            eps,
        } = self.config;
        let t = self.t + 1;
        let c1 = 1.0 - b1.powi(t as i32);
        let c2 = 1.0 - b2.powi(t as i32);
        let n = params.len();
        let mut m = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let g = grad[i].as_f64();
            let mi = b1 * self.m[i] + (1.0 - b1) * g;
            let vi = b2 * self.v[i] + (1.0 - b2) * g * g;
            let p = params[i].as_f64() - lr * (mi / c1) / ((vi / c2).sqrt() + eps);
            if !p.is_finite() {
                return false;
            }
            m.push(mi);
            v.push(vi);
            next.push(S::lit(p));
        }
        params.copy_from_slice(&next);
        self.m = m;
        self.v = v;
        self.t = t;
        true
    }
}
