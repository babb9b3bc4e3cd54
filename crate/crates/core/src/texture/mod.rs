//! Trainable texture representations and their exact gradients.
//!
//! A texture maps a [`SurfaceHit`] (surface id plus `uv`) to RGB in `[0,1]^3`. Two
//! representations are provided: a multiresolution hash grid feeding a small MLP,
//! and a plain per-surface texel grid with bilinear lookup.

pub mod checkpoint;
pub mod hash_grid;
pub mod mlp;
pub mod plain_grid;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{SurfaceHit, UVQueryMap};
use crate::raster::{Image, PixelGrad, RgbImage};
use crate::scalar::Scalar;

pub use checkpoint::AnyTexture;
pub use hash_grid::{encode, HashGridConfig, HashGridField};
pub use mlp::MlpConfig;
pub use plain_grid::PlainGrid;

#[derive(Debug, Error)]
pub enum TextureError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("invalid texture config: {0}")]
    InvalidConfig(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How per-pixel gradient contributions are summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Pixels are accumulated sequentially in row-major order; bit-reproducible.
    #[default]
    Deterministic,
    /// Per-thread partial sums combined in whatever order rayon chooses.
    Parallel,
}

/// Gradient of a scalar loss with respect to every texture parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient<S> {
    pub values: Vec<S>,
}

impl<S: Scalar> ParamGradient<S> {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![S::zero(); n],
        }
    }

    pub fn from_f64(acc: &[f64]) -> Self {
        Self {
            values: acc.iter().map(|&v| S::lit(v)).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += *b;
        }
    }
}

/// A differentiable texture `surface hit -> RGB`.
pub trait TextureModel<S: Scalar>: Send + Sync {
    /// Reusable per-thread working memory.
    type Scratch: Send;

    fn new_scratch(&self) -> Self::Scratch;
    fn num_params(&self) -> usize;
    fn params(&self) -> &[S];
    fn params_mut(&mut self) -> &mut [S];

    fn eval_with(&self, hit: &SurfaceHit<S>, scratch: &mut Self::Scratch) -> [S; 3];

    /// Adds `d <upstream, eval(hit)> / d params` into `grad`.
    fn accumulate_grad(
        &self,
        hit: &SurfaceHit<S>,
        upstream: [S; 3],
        grad: &mut [f64],
        scratch: &mut Self::Scratch,
    );

    fn eval(&self, hit: &SurfaceHit<S>) -> [S; 3] {
        let mut scratch = self.new_scratch();
        self.eval_with(hit, &mut scratch)
    }

    /// Restores representation constraints after a parameter update.
    fn project(&mut self) {}
}

/// Renders a query map: hits are textured, misses take `background`.
pub fn eval_map<S: Scalar, T: TextureModel<S>>(
    model: &T,
    map: &UVQueryMap<S>,
    background: [S; 3],
) -> RgbImage<S> {
    let pixels = map
        .entries
        .par_iter()
        .map_init(
            || model.new_scratch(),
            |scratch, entry| match entry {
                Some(hit) => model.eval_with(hit, scratch),
                None => background,
            },
        )
        .collect();
    Image {
        width: map.width,
        height: map.height,
        pixels,
    }
}

/// Exact gradient of `sum_pixels <upstream, eval_map(model, map)>` with respect to the
/// texture parameters. Misses and pixels with zero upstream contribute nothing.
pub fn backward<S: Scalar, T: TextureModel<S>>(
    model: &T,
    map: &UVQueryMap<S>,
    upstream: &PixelGrad<S>,
    reduction: Reduction,
) -> Result<ParamGradient<S>, TextureError> {
    if upstream.width != map.width || upstream.height != map.height {
        return Err(TextureError::ShapeMismatch {
            expected: format!("{}x{}", map.width, map.height),
            got: format!("{}x{}", upstream.width, upstream.height),
        });
    }
    let n = model.num_params();
    let active = |up: &[S; 3]| up.iter().any(|v| *v != S::zero());
    let acc = match reduction {
        Reduction::Deterministic => {
            let mut acc = vec![0.0f64; n];
            let mut scratch = model.new_scratch();
            for (entry, up) in map.entries.iter().zip(&upstream.pixels) {
                if let Some(hit) = entry {
                    if active(up) {
                        model.accumulate_grad(hit, *up, &mut acc, &mut scratch);
                    }
                }
            }
            acc
        }
        Reduction::Parallel => map
            .entries
            .par_iter()
            .zip(upstream.pixels.par_iter())
            .with_min_len(1024)
            .fold(
                || (vec![0.0f64; n], model.new_scratch()),
                |(mut acc, mut scratch), (entry, up)| {
                    if let Some(hit) = entry {
                        if active(up) {
                            model.accumulate_grad(hit, *up, &mut acc, &mut scratch);
                        }
                    }
                    (acc, scratch)
                },
            )
            .map(|(acc, _)| acc)
            .reduce(
                || vec![0.0f64; n],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            ),
    };
    Ok(ParamGradient::from_f64(&acc))
}
