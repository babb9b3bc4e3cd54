//! Small dense network: ReLU hidden layers, sigmoid RGB output.
//!
//! Parameters are stored flat, layer by layer, each as a row-major `[out][in]`
//! weight matrix followed by its `[out]` bias.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

pub const OUTPUT_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_layers: u32,
    pub hidden_width: u32,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 2,
            hidden_width: 64,
        }
    }
}

#[inline]
pub(crate) fn sigmoid<S: Scalar>(z: S) -> S {
    S::one() / (S::one() + (-z).exp())
}

impl MlpConfig {
    /// Layer widths from input to output.
    pub fn dims(&self, input_dim: usize) -> Vec<usize> {
        let mut d = vec![input_dim];
        d.extend(std::iter::repeat_n(self.hidden_width as usize, self.hidden_layers as usize));
        d.push(OUTPUT_DIM);
        d
    }

    pub fn num_params(&self, input_dim: usize) -> usize {
        self.dims(input_dim).windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Offset of the last layer's weights within the MLP parameter block.
    pub fn output_layer_offset(&self, input_dim: usize) -> usize {
        let dims = self.dims(input_dim);
        dims.windows(2)
            .take(dims.len() - 2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// Activation buffers reused across pixels.
#[derive(Debug, Clone)]
pub struct MlpScratch<S> {
    dims: Vec<usize>,
    /// Post-activation values per layer; `acts[0]` is the input.
    acts: Vec<Vec<S>>,
    delta: Vec<S>,
    delta_prev: Vec<S>,
}

impl<S: Scalar> MlpScratch<S> {
    pub fn new(config: &MlpConfig, input_dim: usize) -> Self {
        let dims = config.dims(input_dim);
        let widest = *dims.iter().max().unwrap_or(&OUTPUT_DIM);
        Self {
            acts: dims.iter().map(|&d| vec![S::zero(); d]).collect(),
            delta: vec![S::zero(); widest],
            delta_prev: vec![S::zero(); widest],
            dims,
        }
    }

    pub fn input_mut(&mut self) -> &mut [S] {
        &mut self.acts[0]
    }

    /// Gradient with respect to the input, valid after [`backward`].
    pub fn input_grad(&self) -> &[S] {
        &self.delta[..self.dims[0]]
    }
}

/// Runs the network on `scratch.acts[0]`.
pub fn forward<S: Scalar>(params: &[S], scratch: &mut MlpScratch<S>) -> [S; 3] {
    let n_layers = scratch.dims.len() - 1;
    let mut offset = 0;
    for l in 0..n_layers {
        let (n_in, n_out) = (scratch.dims[l], scratch.dims[l + 1]);
        let weights = &params[offset..offset + n_in * n_out];
        let bias = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        let (before, after) = scratch.acts.split_at_mut(l + 1);
        let input = &before[l];
        let out = &mut after[0];
        let last = l + 1 == n_layers;
        for o in 0..n_out {
            let row = &weights[o * n_in..(o + 1) * n_in];
            let mut z = bias[o];
            for (w, a) in row.iter().zip(input.iter()) {
                z += *w * *a;
            }
            out[o] = if last { sigmoid(z) } else { z.max(S::zero()) };
        }
    }
    let y = &scratch.acts[n_layers];
    [y[0], y[1], y[2]]
}

/// Backpropagates `upstream = dL/dRGB` through the activations left by [`forward`],
/// adding parameter gradients into `grad` (the MLP block) and leaving `dL/dinput`
/// in the scratch.
pub fn backward<S: Scalar>(params: &[S], scratch: &mut MlpScratch<S>, upstream: [S; 3], grad: &mut [f64]) {
    let n_layers = scratch.dims.len() - 1;
    let y = &scratch.acts[n_layers];
    for c in 0..OUTPUT_DIM {
        scratch.delta[c] = upstream[c] * y[c] * (S::one() - y[c]);
    }
    let mut offsets = Vec::with_capacity(n_layers);
    let mut offset = 0;
    for l in 0..n_layers {
        offsets.push(offset);
        offset += scratch.dims[l] * scratch.dims[l + 1] + scratch.dims[l + 1];
    }
    for l in (0..n_layers).rev() {
        let (n_in, n_out) = (scratch.dims[l], scratch.dims[l + 1]);
        let base = offsets[l];
        let input = &scratch.acts[l];
        for o in 0..n_out {
            let d = scratch.delta[o];
            if d == S::zero() {
                continue;
            }
            let d64 = d.as_f64();
            let row = base + o * n_in;
            for i in 0..n_in {
                grad[row + i] += d64 * input[i].as_f64();
            }
            grad[base + n_in * n_out + o] += d64;
        }
        for i in 0..n_in {
            let mut s = S::zero();
            for o in 0..n_out {
                s += params[base + o * n_in + i] * scratch.delta[o];
            }
            // hidden inputs went through ReLU; its derivative is read off the output
            if l > 0 && input[i] <= S::zero() {
                s = S::zero();
            }
            scratch.delta_prev[i] = s;
        }
        std::mem::swap(&mut scratch.delta, &mut scratch.delta_prev);
    }
}
