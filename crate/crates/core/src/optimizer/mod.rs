//! Training loop, Adam, run configuration, resumable state and the inverse-projection bake.

pub mod adam;
pub mod bake;
pub mod config;
pub mod state;
pub mod train;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::patching::PatchError;
use crate::schedules::ScheduleError;
use crate::scoring::ScoreError;
use crate::texture::TextureError;

pub use adam::{Adam, AdamConfig};
pub use bake::{inverse_project, BAKE_DEFAULT};
pub use config::{ProviderErrorPolicy, RunConfig, TextureSpec, ViewSelection, ViewsPerStep};
pub use train::{run, RunReport, StepRecord, TrainState, Trainer};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("invalid run config: {0}")]
    Config(String),
    #[error("run already finished at k = {0}")]
    Finished(u64),
    #[error("provider failed at step {k}: {source}")]
    Provider { k: u64, source: ScoreError },
    #[error("bad train state: {0}")]
    State(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Texture(#[from] TextureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
