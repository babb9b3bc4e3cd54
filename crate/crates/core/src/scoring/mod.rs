//! The score-provider boundary.
//!
//! A provider receives a rendered patch and returns `dL/dpatch` in pixel space for
//! some scalar loss `L`. Local providers compute simple supervised losses; the remote
//! client delegates to a scorer service over HTTP.

pub mod local;
pub mod remote;
pub mod stub;
pub mod wire;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::patching::PatchRect;
use crate::raster::{PixelGrad, RgbImage};
use crate::scalar::Scalar;

pub use local::{
    l2_score, procedural_score, supersampled_l2_score, L2Provider, ProceduralProvider, RoutedProvider,
    TargetImageSpec,
};
pub use remote::{RemoteConfig, RemoteScorer};
pub use stub::{StubHandle, StubServer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("score provider unavailable: {0}")]
    Unavailable(String),
    #[error("scorer returned {status} {code}: {message}")]
    Server { status: u16, code: String, message: String },
    #[error("invalid score response: {0}")]
    Validation(String),
    #[error("score request rejected: {0}")]
    BadRequest(String),
}

/// Text prompt a view is steered toward.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub id: u32,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRequest<S> {
    pub run_id: String,
    pub view_id: u32,
    pub prompt_id: u32,
    pub step: u64,
    /// Diffusion timestep in `(0, 1)`.
    pub timestep: f64,
    pub patch: RgbImage<S>,
    pub patch_rect: PatchRect,
    /// Side length of the full render the patch was cut from.
    pub full_resolution: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreResponse<S> {
    pub pixel_gradient: PixelGrad<S>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl<S: Scalar> ScoreRequest<S> {
    pub fn validate(&self) -> Result<(), ScoreError> {
        let size = self.patch_rect.size;
        if self.patch.width != size || self.patch.height != size {
            return Err(ScoreError::BadRequest(format!(
                "patch is {}x{}, rect size {size}",
                self.patch.width, self.patch.height
            )));
        }
        self.patch_rect
            .check(self.full_resolution, self.full_resolution)
            .map_err(|e| ScoreError::BadRequest(e.to_string()))?;
        if !(self.timestep > 0.0 && self.timestep < 1.0) {
            return Err(ScoreError::BadRequest(format!("timestep {} outside (0,1)", self.timestep)));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.patch.width * self.patch.height
    }
}

impl<S: Scalar> ScoreResponse<S> {
    /// Checks the response against the contract: patch-shaped and finite.
    pub fn validate_for(&self, req: &ScoreRequest<S>) -> Result<(), ScoreError> {
        let g = &self.pixel_gradient;
        if !g.same_shape(&req.patch) {
            return Err(ScoreError::Validation(format!(
                "gradient is {}x{}, patch is {}x{}",
                g.width, g.height, req.patch.width, req.patch.height
            )));
        }
        if !g.is_finite() {
            return Err(ScoreError::Validation("non-finite gradient".into()));
        }
        Ok(())
    }
}

/// Anything that maps a rendered patch to a pixel-space gradient.
pub trait ScoreProvider<S: Scalar>: Send {
    fn score(&mut self, req: &ScoreRequest<S>) -> Result<ScoreResponse<S>, ScoreError>;

    fn name(&self) -> &str;
}

impl<S: Scalar> ScoreProvider<S> for Box<dyn ScoreProvider<S>> {
    fn score(&mut self, req: &ScoreRequest<S>) -> Result<ScoreResponse<S>, ScoreError> {
        (**self).score(req)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Calls a provider and enforces the response contract.
pub fn score_checked<S: Scalar, P: ScoreProvider<S> + ?Sized>(
    provider: &mut P,
    req: &ScoreRequest<S>,
) -> Result<ScoreResponse<S>, ScoreError> {
    req.validate()?;
    let resp = provider.score(req)?;
    resp.validate_for(req)?;
    Ok(resp)
}
