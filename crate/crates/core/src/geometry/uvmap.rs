use rayon::prelude::*;

use super::camera::CameraPose;
use super::intersect::{intersect, SurfaceHit};
use super::scene::SceneSpec;
use crate::scalar::Scalar;

/// Per-pixel ray-cast result, row-major with row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct UVQueryMap<S> {
    pub width: usize,
    pub height: usize,
    pub entries: Vec<Option<SurfaceHit<S>>>,
}

impl<S: Scalar> UVQueryMap<S> {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<&SurfaceHit<S>> {
        self.entries[y * self.width + x].as_ref()
    }

    pub fn hit_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    /// Distinct surface ids present, ascending.
    pub fn surface_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.entries.iter().flatten().map(|h| h.surface_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Sub-rectangle copy. Panics if the rectangle leaves the map.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self {
        assert!(x0 + width <= self.width && y0 + height <= self.height, "crop out of bounds");
        let mut entries = Vec::with_capacity(width * height);
        for y in y0..y0 + height {
            let row = y * self.width;
            entries.extend_from_slice(&self.entries[row + x0..row + x0 + width]);
        }
        Self {
            width,
            height,
            entries,
        }
    }
}

/// Ray-casts every pixel of a `width x height` render.
pub fn build_uv_query_map<S: Scalar>(
    scene: &SceneSpec<S>,
    camera: &CameraPose<S>,
    width: usize,
    height: usize,
) -> UVQueryMap<S> {
    build_uv_query_map_region(scene, camera, width, height, 0, 0, width, height)
}

/// Ray-casts the `region_w x region_h` window at `(x0, y0)` of a `width x height`
/// render. Entries equal the corresponding entries of the full map.
#[allow(clippy::too_many_arguments)]
pub fn build_uv_query_map_region<S: Scalar>(
    scene: &SceneSpec<S>,
    camera: &CameraPose<S>,
    width: usize,
    height: usize,
    x0: usize,
    y0: usize,
    region_w: usize,
    region_h: usize,
) -> UVQueryMap<S> {
    assert!(x0 + region_w <= width && y0 + region_h <= height, "region out of bounds");
    let entries = (0..region_w * region_h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (x0 + i % region_w, y0 + i / region_w);
            intersect(scene, &camera.pixel_ray(x, y, width, height))
        })
        .collect();
    UVQueryMap {
        width: region_w,
        height: region_h,
        entries,
    }
}
