//! Per-surface RGB texel grids with bilinear, clamp-to-edge lookup.
//!
//! Texel `(col, row)` of a `res x res` grid has its center at
//! `((col + 0.5) / res, (row + 0.5) / res)` in uv.

use super::{TextureError, TextureModel};
use crate::geometry::SurfaceHit;
use crate::raster::Image;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct PlainGrid<S> {
    pub surfaces: usize,
    pub resolution: usize,
    /// `[surface][row][col][channel]`.
    pub params: Vec<S>,
}

impl<S: Scalar> PlainGrid<S> {
    pub fn filled(surfaces: usize, resolution: usize, rgb: [S; 3]) -> Result<Self, TextureError> {
        if surfaces == 0 || resolution == 0 {
            return Err(TextureError::InvalidConfig(format!(
                "plain grid needs surfaces >= 1 and resolution >= 1, got {surfaces} x {resolution}"
            )));
        }
        let mut params = Vec::with_capacity(surfaces * resolution * resolution * 3);
        for _ in 0..surfaces * resolution * resolution {
            params.extend_from_slice(&rgb);
        }
        Ok(Self {
            surfaces,
            resolution,
            params,
        })
    }

    #[inline]
    pub fn texel_index(&self, surface: usize, col: usize, row: usize) -> usize {
        (surface * self.resolution + row) * self.resolution + col
    }

    pub fn texel(&self, surface: usize, col: usize, row: usize) -> [S; 3] {
        let i = self.texel_index(surface, col, row) * 3;
        [self.params[i], self.params[i + 1], self.params[i + 2]]
    }

    pub fn set_texel(&mut self, surface: usize, col: usize, row: usize, rgb: [S; 3]) {
        let i = self.texel_index(surface, col, row) * 3;
        self.params[i..i + 3].copy_from_slice(&rgb);
    }

    /// uv of a texel center.
    pub fn texel_center(&self, col: usize, row: usize) -> [S; 2] {
        let r = self.resolution as f64;
        [S::lit((col as f64 + 0.5) / r), S::lit((row as f64 + 0.5) / r)]
    }

    /// Four `(texel index, weight)` taps; weights sum to one.
    #[inline]
    pub fn taps(&self, surface: u32, uv: [S; 2]) -> [(usize, S); 4] {
        let last = S::lit((self.resolution - 1) as f64);
        let r = S::lit(self.resolution as f64);
        let axis = |c: S| {
            let p = (c * r - S::lit(0.5)).max(S::zero()).min(last);
            let i = p.floor();
            let i0 = i.to_usize().unwrap_or(0);
            (i0, (i0 + 1).min(self.resolution - 1), p - i)
        };
        let (x0, x1, fx) = axis(uv[0]);
        let (y0, y1, fy) = axis(uv[1]);
        let s = (surface as usize).min(self.surfaces - 1);
        let one = S::one();
        [
            (self.texel_index(s, x0, y0), (one - fx) * (one - fy)),
            (self.texel_index(s, x1, y0), fx * (one - fy)),
            (self.texel_index(s, x0, y1), (one - fx) * fy),
            (self.texel_index(s, x1, y1), fx * fy),
        ]
    }

    /// One surface as an image, row 0 at `v = 0`.
    pub fn surface_image(&self, surface: usize) -> Image<S> {
        Image::from_fn(self.resolution, self.resolution, |x, y| self.texel(surface, x, y))
    }

    pub fn cast<T: Scalar>(&self) -> PlainGrid<T> {
        PlainGrid {
            surfaces: self.surfaces,
            resolution: self.resolution,
            params: self.params.iter().map(|&v| crate::scalar::cast(v)).collect(),
        }
    }
}

impl<S: Scalar> TextureModel<S> for PlainGrid<S> {
    type Scratch = ();

    fn new_scratch(&self) {}

    fn num_params(&self) -> usize {
        self.params.len()
    }

    fn params(&self) -> &[S] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [S] {
        &mut self.params
    }

    fn eval_with(&self, hit: &SurfaceHit<S>, _: &mut ()) -> [S; 3] {
        let mut out = [S::zero(); 3];
        for (texel, w) in self.taps(hit.surface_id, hit.uv) {
            for (o, p) in out.iter_mut().zip(&self.params[texel * 3..texel * 3 + 3]) {
                *o += w * *p;
            }
        }
        out
    }

    fn accumulate_grad(&self, hit: &SurfaceHit<S>, upstream: [S; 3], grad: &mut [f64], _: &mut ()) {
        for (texel, w) in self.taps(hit.surface_id, hit.uv) {
            let w = w.as_f64();
            for c in 0..3 {
                grad[texel * 3 + c] += w * upstream[c].as_f64();
            }
        }
    }

    /// Texels are kept in `[0,1]` so bilinear blends stay in range.
    fn project(&mut self) {
        for v in &mut self.params {
            *v = v.max(S::zero()).min(S::one());
        }
    }
}
