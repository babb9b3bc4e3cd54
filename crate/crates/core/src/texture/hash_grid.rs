//! Multiresolution hash encoding of 2D surface coordinates followed by an MLP.
//!
//! Every level holds one table of `2^T` entries with `F` features each. Level `l` has
//! grid resolution `floor(base * growth^l)`; a query blends the four surrounding grid
//! vertices bilinearly. Vertices are keyed by `(surface_id, x, y)`, so each surface
//! owns its own 2D domain. Coarse levels whose vertices fit into the table for all
//! surfaces are indexed densely; finer levels use the XOR-of-primes spatial hash.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{self, MlpConfig, MlpScratch};
use super::{TextureError, TextureModel};
use crate::geometry::SurfaceHit;
use crate::scalar::Scalar;

/// Surfaces that get collision-free dense indexing on coarse levels (cube faces).
pub const MAX_SURFACES: usize = 6;

const PRIME_Y: u32 = 2_654_435_761;
const PRIME_SURFACE: u32 = 805_459_861;

/// Half-width of the uniform distribution hash tables are initialized from.
pub const TABLE_INIT_SCALE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HashGridConfig {
    pub levels: u32,
    pub features_per_level: u32,
    pub base_resolution: u32,
    pub growth_factor: f32,
    pub table_size_log2: u32,
}

impl Default for HashGridConfig {
    fn default() -> Self {
        Self {
            levels: 8,
            features_per_level: 2,
            base_resolution: 16,
            growth_factor: 1.5,
            table_size_log2: 19,
        }
    }
}

impl HashGridConfig {
    pub fn validate(&self) -> Result<(), TextureError> {
        let bad = |m: String| Err(TextureError::InvalidConfig(m));
        if self.levels < 1 {
            return bad("levels must be >= 1".into());
        }
        if self.features_per_level < 1 {
            return bad("features_per_level must be >= 1".into());
        }
        if self.base_resolution < 2 {
            return bad("base_resolution must be >= 2".into());
        }
        if !(self.growth_factor > 1.0 && self.growth_factor.is_finite()) {
            return bad(format!("growth_factor must be > 1, got {}", self.growth_factor));
        }
        if self.table_size_log2 > 30 {
            return bad(format!("table_size_log2 {} too large", self.table_size_log2));
        }
        let b = u64::from(self.base_resolution);
        if (1u64 << self.table_size_log2) < b * b {
            return bad(format!(
                "table size 2^{} smaller than base_resolution^2 = {}",
                self.table_size_log2,
                b * b
            ));
        }
        Ok(())
    }

    pub fn table_size(&self) -> usize {
        1usize << self.table_size_log2
    }

    pub fn level_resolution(&self, level: u32) -> u32 {
        (f64::from(self.base_resolution) * f64::from(self.growth_factor).powi(level as i32)).floor() as u32
    }

    pub fn feature_dim(&self) -> usize {
        (self.levels * self.features_per_level) as usize
    }

    pub fn num_table_params(&self) -> usize {
        self.levels as usize * self.table_size() * self.features_per_level as usize
    }

    fn is_dense(&self, resolution: u32) -> bool {
        let side = resolution as usize + 1;
        MAX_SURFACES * side * side <= self.table_size()
    }

    /// Table entry of grid vertex `(x, y)` on `surface` at a level of `resolution`.
    #[inline]
    pub fn vertex_index(&self, resolution: u32, surface: u32, x: u32, y: u32) -> usize {
        if self.is_dense(resolution) {
            let side = resolution as usize + 1;
            (surface as usize * side + y as usize) * side + x as usize
        } else {
            let h = x ^ y.wrapping_mul(PRIME_Y) ^ surface.wrapping_mul(PRIME_SURFACE);
            (h as usize) & (self.table_size() - 1)
        }
    }

    /// The four `(entry, weight)` taps of one level, in table-entry units relative to
    /// the level's table.
    #[inline]
    pub fn level_taps<S: Scalar>(&self, level: u32, surface: u32, uv: [S; 2]) -> [(usize, S); 4] {
        let res = self.level_resolution(level);
        let r = S::lit(f64::from(res));
        let cell = |c: S| {
            let p = c.max(S::zero()).min(S::one()) * r;
            let i = p.floor().min(r - S::one());
            (i.to_u32().unwrap_or(0), p - i)
        };
        let (x0, fx) = cell(uv[0]);
        let (y0, fy) = cell(uv[1]);
        let one = S::one();
        [
            (self.vertex_index(res, surface, x0, y0), (one - fx) * (one - fy)),
            (self.vertex_index(res, surface, x0 + 1, y0), fx * (one - fy)),
            (self.vertex_index(res, surface, x0, y0 + 1), (one - fx) * fy),
            (self.vertex_index(res, surface, x0 + 1, y0 + 1), fx * fy),
        ]
    }
}

/// Feature vector `[level][feature]` for `uv` on `surface`. `tables` is the table
/// block laid out as `[level][entry][feature]`.
pub fn encode<S: Scalar>(config: &HashGridConfig, tables: &[S], surface: u32, uv: [S; 2]) -> Vec<S> {
    let mut out = vec![S::zero(); config.feature_dim()];
    encode_into(config, tables, surface, uv, &mut out);
    out
}

fn encode_into<S: Scalar>(config: &HashGridConfig, tables: &[S], surface: u32, uv: [S; 2], out: &mut [S]) {
    let f = config.features_per_level as usize;
    let level_len = config.table_size() * f;
    for level in 0..config.levels {
        let base = level as usize * level_len;
        let feats = &mut out[level as usize * f..(level as usize + 1) * f];
        feats.iter_mut().for_each(|v| *v = S::zero());
        for (entry, w) in config.level_taps(level, surface, uv) {
            let row = &tables[base + entry * f..base + (entry + 1) * f];
            for (o, t) in feats.iter_mut().zip(row) {
                *o += w * *t;
            }
        }
    }
}

/// Hash-grid encoding plus MLP with sigmoid RGB output.
#[derive(Debug, Clone, PartialEq)]
pub struct HashGridField<S> {
    pub grid: HashGridConfig,
    pub mlp: MlpConfig,
    /// Hash tables first, then the MLP block.
    pub params: Vec<S>,
}

pub struct HashGridScratch<S> {
    mlp: MlpScratch<S>,
}

impl<S: Scalar> HashGridField<S> {
    /// All parameters zero.
    pub fn zeroed(grid: HashGridConfig, mlp: MlpConfig) -> Result<Self, TextureError> {
        grid.validate()?;
        let n = grid.num_table_params() + mlp.num_params(grid.feature_dim());
        Ok(Self {
            grid,
            mlp,
            params: vec![S::zero(); n],
        })
    }

    /// Tables ~ U(-1e-4, 1e-4); dense weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in));
    /// biases zero.
    pub fn new<R: Rng + ?Sized>(grid: HashGridConfig, mlp: MlpConfig, rng: &mut R) -> Result<Self, TextureError> {
        let mut field = Self::zeroed(grid, mlp)?;
        let n_tables = grid.num_table_params();
        for v in &mut field.params[..n_tables] {
            *v = S::lit(rng.random_range(-TABLE_INIT_SCALE..TABLE_INIT_SCALE));
        }
        let dims = mlp.dims(grid.feature_dim());
        let mut offset = n_tables;
        for w in dims.windows(2) {
            let bound = (6.0 / w[0] as f64).sqrt();
            for v in &mut field.params[offset..offset + w[0] * w[1]] {
                *v = S::lit(rng.random_range(-bound..bound));
            }
            offset += w[0] * w[1] + w[1];
        }
        Ok(field)
    }

    pub fn tables(&self) -> &[S] {
        &self.params[..self.grid.num_table_params()]
    }

    pub fn mlp_params(&self) -> &[S] {
        &self.params[self.grid.num_table_params()..]
    }

    pub fn mlp_params_mut(&mut self) -> &mut [S] {
        let n = self.grid.num_table_params();
        &mut self.params[n..]
    }

    /// Zeroes the output layer so every query evaluates to mid-grey.
    pub fn zero_output_layer(&mut self) {
        let off = self.mlp.output_layer_offset(self.grid.feature_dim());
        self.mlp_params_mut()[off..].iter_mut().for_each(|v| *v = S::zero());
    }

    pub fn cast<T: Scalar>(&self) -> HashGridField<T> {
        HashGridField {
            grid: self.grid,
            mlp: self.mlp,
            params: self.params.iter().map(|&v| crate::scalar::cast(v)).collect(),
        }
    }
}

impl<S: Scalar> TextureModel<S> for HashGridField<S> {
    type Scratch = HashGridScratch<S>;

    fn new_scratch(&self) -> Self::Scratch {
        HashGridScratch {
            mlp: MlpScratch::new(&self.mlp, self.grid.feature_dim()),
        }
    }

    fn num_params(&self) -> usize {
        self.params.len()
    }

    fn params(&self) -> &[S] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [S] {
        &mut self.params
    }

    fn eval_with(&self, hit: &SurfaceHit<S>, scratch: &mut Self::Scratch) -> [S; 3] {
        encode_into(&self.grid, self.tables(), hit.surface_id, hit.uv, scratch.mlp.input_mut());
        mlp::forward(self.mlp_params(), &mut scratch.mlp)
    }

    fn accumulate_grad(&self, hit: &SurfaceHit<S>, upstream: [S; 3], grad: &mut [f64], scratch: &mut Self::Scratch) {
        encode_into(&self.grid, self.tables(), hit.surface_id, hit.uv, scratch.mlp.input_mut());
        mlp::forward(self.mlp_params(), &mut scratch.mlp);
        let n_tables = self.grid.num_table_params();
        let (table_grad, mlp_grad) = grad.split_at_mut(n_tables);
        mlp::backward(self.mlp_params(), &mut scratch.mlp, upstream, mlp_grad);

        let d_features = scratch.mlp.input_grad();
        let f = self.grid.features_per_level as usize;
        let level_len = self.grid.table_size() * f;
        for level in 0..self.grid.levels {
            let base = level as usize * level_len;
            let d = &d_features[level as usize * f..(level as usize + 1) * f];
            for (entry, w) in self.grid.level_taps(level, hit.surface_id, hit.uv) {
                let w = w.as_f64();
                if w == 0.0 {
                    continue;
                }
                let row = base + entry * f;
                for (k, dv) in d.iter().enumerate() {
                    table_grad[row + k] += w * dv.as_f64();
                }
            }
        }
    }
}
