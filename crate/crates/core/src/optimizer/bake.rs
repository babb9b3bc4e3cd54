//! Closed-form texture baking by inverse projection.

use super::OptimizeError;
use crate::geometry::{build_uv_query_map, SceneSpec, ViewSpec};
use crate::raster::RgbImage;
use crate::scalar::Scalar;
use crate::texture::PlainGrid;

/// Value of texels no view sees.
pub const BAKE_DEFAULT: [f64; 3] = [0.5; 3];

/// Bakes `targets[i]` (seen from `views[i].base_camera`) onto a plain grid.
///
/// Every hit pixel is splatted onto the four texels around its uv with the bilinear
/// lookup weights, and each texel becomes the weighted average of what landed on it.
/// When pixel centers land on texel centers this is a plain average of the pixels
/// mapping to each texel.
pub fn inverse_project<S: Scalar>(
    scene: &SceneSpec<S>,
    views: &[ViewSpec<S>],
    targets: &[RgbImage<S>],
    resolution: usize,
) -> Result<PlainGrid<S>, OptimizeError> {
    if views.len() != targets.len() {
        return Err(OptimizeError::Config(format!(
            "{} views but {} target images",
            views.len(),
            targets.len()
        )));
    }
    let mut grid = PlainGrid::filled(scene.num_surfaces(), resolution, BAKE_DEFAULT.map(S::lit))?;
    let texels = grid.surfaces * resolution * resolution;
    let mut sum = vec![[0.0f64; 3]; texels];
    let mut weight = vec![0.0f64; texels];
    for (view, target) in views.iter().zip(targets) {
        let map = build_uv_query_map(scene, &view.base_camera, target.width, target.height);
        for (hit, px) in map.entries.iter().zip(&target.pixels) {
            let Some(hit) = hit else { continue };
            for (texel, w) in grid.taps(hit.surface_id, hit.uv) {
                let w = w.as_f64();
                if w == 0.0 {
                    continue;
                }
                for c in 0..3 {
                    sum[texel][c] += w * px[c].as_f64();
                }
                weight[texel] += w;
            }
        }
    }
    for (i, (s, w)) in sum.iter().zip(&weight).enumerate() {
        if *w > 0.0 {
            grid.params[i * 3..i * 3 + 3].copy_from_slice(&s.map(|v| S::lit(v / w)));
        }
    }
    Ok(grid)
}
