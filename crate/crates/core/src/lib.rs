//! Multi-view illusion texture optimization: scene geometry and ray casting, texture
//! fields, training schedules, patch sampling, score providers and the training loop.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod optimizer;
pub mod patching;
pub mod raster;
pub mod scalar;
pub mod schedules;
pub mod scoring;
pub mod texture;

pub use scalar::Scalar;

pub type Vec3f = geometry::Vec3<f32>;
pub type Vec3d = geometry::Vec3<f64>;
pub type CameraPose32 = geometry::CameraPose<f32>;
pub type CameraPose64 = geometry::CameraPose<f64>;
pub type SceneSpec32 = geometry::SceneSpec<f32>;
pub type SceneSpec64 = geometry::SceneSpec<f64>;
pub type SurfaceHit32 = geometry::SurfaceHit<f32>;
pub type SurfaceHit64 = geometry::SurfaceHit<f64>;
pub type ViewSpec32 = geometry::ViewSpec<f32>;
pub type ViewSpec64 = geometry::ViewSpec<f64>;
pub type UVQueryMap32 = geometry::UVQueryMap<f32>;
pub type UVQueryMap64 = geometry::UVQueryMap<f64>;
pub type Image32 = raster::Image<f32>;
pub type Image64 = raster::Image<f64>;
pub type HashGridField32 = texture::HashGridField<f32>;
pub type HashGridField64 = texture::HashGridField<f64>;
pub type PlainGrid32 = texture::PlainGrid<f32>;
pub type PlainGrid64 = texture::PlainGrid<f64>;
pub type Texture32 = texture::AnyTexture<f32>;
pub type Texture64 = texture::AnyTexture<f64>;
pub type ScoreRequest32 = scoring::ScoreRequest<f32>;
pub type ScoreResponse32 = scoring::ScoreResponse<f32>;
pub type Trainer32 = optimizer::Trainer<f32>;
pub type Trainer64 = optimizer::Trainer<f64>;
