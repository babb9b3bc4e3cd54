//! Canonical camera arrangements.

use serde::{Deserialize, Serialize};

use super::camera::CameraPose;
use super::vec3::Vec3;
use super::GeometryError;
use crate::scalar::Scalar;

/// Vertical field of view of preset cameras, degrees.
pub const PRESET_FOV_DEG: f64 = 40.0;
/// Preset cameras sit this many scene diagonals from the origin.
pub const PRESET_DISTANCE_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ViewSpec<S> {
    pub id: u32,
    pub base_camera: CameraPose<S>,
    pub prompt_id: u32,
    /// The view's content is read through a reflector.
    #[serde(default)]
    pub reflective: bool,
}

fn preset_distance<S: Scalar>(diagonal: S) -> S {
    diagonal * S::lit(PRESET_DISTANCE_FACTOR)
}

/// Cameras around the corners of a cube of the given half extent.
///
/// Three views sit around the `(1,1,1)` corner, one per edge, each seeing the two
/// faces that meet there. Eight views look in along the body diagonals
/// `(+-1, +-1, +-1)` and see three faces each.
pub fn cube_corner_views<S: Scalar>(half_extent: S, n_views: usize) -> Result<Vec<ViewSpec<S>>, GeometryError> {
    let diagonal = S::lit(2.0 * 3f64.sqrt()) * half_extent;
    let distance = preset_distance(diagonal);
    let dirs: Vec<[f64; 3]> = match n_views {
        3 => vec![[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 1.0]],
        8 => {
            let mut v = Vec::with_capacity(8);
            for sx in [1.0, -1.0] {
                for sy in [1.0, -1.0] {
                    for sz in [1.0, -1.0] {
                        v.push([sx, sy, sz]);
                    }
                }
            }
            v
        }
        n => return Err(GeometryError::UnsupportedPreset(format!("cube preset needs 3 or 8 views, got {n}"))),
    };
    Ok(dirs
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let eye = Vec3::<S>::from_f64(d[0], d[1], d[2]).normalized() * distance;
            ViewSpec {
                id: i as u32,
                base_camera: CameraPose::look_at(eye, Vec3::zero(), S::lit(PRESET_FOV_DEG)),
                prompt_id: i as u32,
                reflective: false,
            }
        })
        .collect())
}

/// Cameras on the sphere's equator at azimuths `0, separation, 2 * separation, ...` degrees.
pub fn sphere_views<S: Scalar>(radius: S, n_views: usize, separation_deg: S) -> Result<Vec<ViewSpec<S>>, GeometryError> {
    if n_views < 2 {
        return Err(GeometryError::UnsupportedPreset(format!("sphere preset needs at least 2 views, got {n_views}")));
    }
    let sep = separation_deg.as_f64();
    if !(sep > 0.0 && sep <= 120.0) {
        return Err(GeometryError::UnsupportedPreset(format!("separation {sep} outside (0, 120] degrees")));
    }
    let distance = preset_distance(S::lit(2.0 * 3f64.sqrt()) * radius);
    Ok((0..n_views)
        .map(|i| {
            let azimuth = S::lit((i as f64 * sep).to_radians());
            ViewSpec {
                id: i as u32,
                base_camera: CameraPose::orbit(Vec3::zero(), distance, azimuth, S::zero(), S::lit(PRESET_FOV_DEG)),
                prompt_id: i as u32,
                reflective: false,
            }
        })
        .collect())
}
