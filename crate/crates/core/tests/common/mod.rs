//! Helpers shared by the integration tests and the acceptance harness. Everything
//! here is written against first principles rather than the library's own code.

#![allow(dead_code)]

pub mod march;

use illusion_core::geometry::{SurfaceHit, UVQueryMap, Vec3};
use illusion_core::raster::Image;
use illusion_core::Scalar;
use rand::Rng;

/// `|a - b| / max(|a|, |b|)`, zero when both are zero.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub fn random_hit<S: Scalar, R: Rng>(rng: &mut R, surfaces: u32) -> SurfaceHit<S> {
    SurfaceHit {
        surface_id: rng.random_range(0..surfaces),
        uv: [S::lit(rng.random()), S::lit(rng.random())],
        normal: Vec3::zero(),
        position: Vec3::zero(),
        ray_param: S::one(),
        bounce_count: 0,
    }
}

/// A `width x 1` map of random surface hits.
pub fn random_batch<S: Scalar, R: Rng>(rng: &mut R, n: usize, surfaces: u32) -> UVQueryMap<S> {
    UVQueryMap {
        width: n,
        height: 1,
        entries: (0..n).map(|_| Some(random_hit(rng, surfaces))).collect(),
    }
}

pub fn random_image<S: Scalar, R: Rng>(rng: &mut R, w: usize, h: usize, lo: f64, hi: f64) -> Image<S> {
    Image::from_fn(w, h, |_, _| {
        [0; 3].map(|_| S::lit(rng.random_range(lo..hi)))
    })
}

/// Smooth unit-range image built from a few low-frequency waves.
pub fn smooth_image<S: Scalar>(w: usize, h: usize) -> Image<S> {
    use std::f64::consts::PI;
    Image::from_fn(w, h, |x, y| {
        let (u, v) = ((x as f64 + 0.5) / w as f64, (y as f64 + 0.5) / h as f64);
        [
            0.5 + 0.35 * (2.0 * PI * u).sin() * (PI * v).cos(),
            0.5 + 0.3 * (3.0 * PI * (u + v)).cos(),
            0.25 + 0.5 * u * v + 0.1 * (4.0 * PI * v).sin(),
        ]
        .map(S::lit)
    })
}

/// Which hidden units are active (pre-activation > 0) for every query of `map`,
/// recomputed from the documented parameter layout: hash tables first, then per
/// layer a row-major `[out][in]` weight matrix followed by the bias.
pub fn relu_pattern(field: &illusion_core::texture::HashGridField<f64>, map: &UVQueryMap<f64>) -> Vec<bool> {
    use illusion_core::texture::encode;
    let n_tables = field.grid.num_table_params();
    let dims = field.mlp.dims(field.grid.feature_dim());
    let mut pattern = Vec::new();
    for hit in map.entries.iter().flatten() {
        let mut x = encode(&field.grid, &field.params[..n_tables], hit.surface_id, hit.uv);
        let mut off = n_tables;
        for w in dims.windows(2).take(dims.len() - 2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &field.params[off..off + fan_in * fan_out];
            let bias = &field.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            let z: Vec<f64> = (0..fan_out)
                .map(|o| bias[o] + (0..fan_in).map(|i| weights[o * fan_in + i] * x[i]).sum::<f64>())
                .collect();
            pattern.extend(z.iter().map(|v| *v > 0.0));
            x = z.into_iter().map(|v| v.max(0.0)).collect();
            off += fan_in * fan_out + fan_out;
        }
    }
    pattern
}
