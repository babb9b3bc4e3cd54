//! Manifest parsing, image I/O and the commands behind the `illusion` binary.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod imageio;
pub mod manifest;

use std::path::Path;

pub use manifest::{ProviderSpec, RunManifest, TargetEntry};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("manifest parse error: {0}")]
    Parse(String),
    #[error("manifest error at {field}: {message}")]
    Semantic { field: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("image error: {0}")]
    Image(String),
    #[error("checkpoint incompatible with scene: {0}")]
    Incompatible(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Optimize(#[from] illusion_core::optimizer::OptimizeError),
    #[error(transparent)]
    Texture(#[from] illusion_core::texture::TextureError),
    #[error("run aborted: {0}")]
    Aborted(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
