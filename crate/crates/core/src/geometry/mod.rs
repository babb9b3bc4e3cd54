//! Ray casting, scene description and camera presets.

pub mod camera;
pub mod intersect;
pub mod presets;
pub mod scene;
pub mod uvmap;
pub mod vec3;

use thiserror::Error;

pub use camera::{generate_rays, CameraPose, Ray};
pub use intersect::{intersect, reflect, SurfaceHit};
pub use presets::{cube_corner_views, sphere_views, ViewSpec};
pub use scene::{CylinderSpec, MirrorSpec, Reflector, SceneShape, SceneSpec};
pub use uvmap::{build_uv_query_map, build_uv_query_map_region, UVQueryMap};
pub use vec3::{Mat3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("unsupported preset: {0}")]
    UnsupportedPreset(String),
}
