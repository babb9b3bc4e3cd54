//! JSON wire forms shared by the remote client and scorer services.
//!
//! Tensors travel as `{"shape": [h, w, 3], "dtype": "f32", "data": <base64>}` where
//! `data` holds little-endian `f32` values in row-major order.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{PromptSpec, ScoreError, ScoreRequest, ScoreResponse};
use crate::patching::PatchRect;
use crate::raster::RgbImage;
use crate::scalar::{self, Scalar};

pub const DTYPE_F32: &str = "f32";
pub const DEFAULT_LORA_LEARNING_RATE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireTensor {
    pub shape: Vec<usize>,
    pub dtype: String,
    pub data: String,
}

impl WireTensor {
    pub fn from_image<S: Scalar>(img: &RgbImage<S>) -> Self {
        let values: Vec<f32> = img.pixels.iter().flatten().map(|&v| scalar::cast(v)).collect();
        Self {
            shape: vec![img.height, img.width, 3],
            dtype: DTYPE_F32.into(),
            data: STANDARD.encode(scalar::to_le_bytes(&values)),
        }
    }

    pub fn to_image<S: Scalar>(&self) -> Result<RgbImage<S>, String> {
        if self.dtype != DTYPE_F32 {
            return Err(format!("unsupported dtype {:?}", self.dtype));
        }
        let [h, w, c] = self.shape[..] else {
            return Err(format!("expected shape [h, w, 3], got {:?}", self.shape));
        };
        if c != 3 {
            return Err(format!("expected 3 channels, got {c}"));
        }
        let bytes = STANDARD.decode(&self.data).map_err(|e| format!("bad base64: {e}"))?;
        let values: Vec<f32> = scalar::from_le_bytes(&bytes).ok_or("data length not a multiple of 4")?;
        if values.len() != h * w * 3 {
            return Err(format!("shape {:?} needs {} values, got {}", self.shape, h * w * 3, values.len()));
        }
        Ok(RgbImage {
            width: w,
            height: h,
            pixels: values
                .chunks_exact(3)
                .map(|p| [scalar::cast(p[0]), scalar::cast(p[1]), scalar::cast(p[2])])
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRegistration {
    pub run_id: String,
    pub prompts: Vec<PromptSpec>,
    pub guidance_scale: f64,
    pub lora_rank: u32,
    #[serde(default = "default_lora_lr")]
    pub lora_learning_rate: f64,
}

fn default_lora_lr() -> f64 {
    DEFAULT_LORA_LEARNING_RATE
}

impl RunRegistration {
    pub fn validate(&self) -> Result<(), String> {
        let mut ids: Vec<u32> = self.prompts.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err("prompt ids must be unique".into());
        }
        if !(self.guidance_scale >= 1.0) {
            return Err(format!("guidance_scale {} must be >= 1", self.guidance_scale));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireScoreRequest {
    pub run_id: String,
    pub view_id: u32,
    pub prompt_id: u32,
    pub step: u64,
    pub timestep: f64,
    pub patch: WireTensor,
    pub patch_rect: PatchRect,
    pub full_resolution: usize,
}

impl WireScoreRequest {
    pub fn from_request<S: Scalar>(req: &ScoreRequest<S>) -> Self {
        Self {
            run_id: req.run_id.clone(),
            view_id: req.view_id,
            prompt_id: req.prompt_id,
            step: req.step,
            timestep: req.timestep,
            patch: WireTensor::from_image(&req.patch),
            patch_rect: req.patch_rect,
            full_resolution: req.full_resolution,
        }
    }

    pub fn to_request<S: Scalar>(&self) -> Result<ScoreRequest<S>, String> {
        Ok(ScoreRequest {
            run_id: self.run_id.clone(),
            view_id: self.view_id,
            prompt_id: self.prompt_id,
            step: self.step,
            timestep: self.timestep,
            patch: self.patch.to_image()?,
            patch_rect: self.patch_rect,
            full_resolution: self.full_resolution,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireScoreResponse {
    pub pixel_gradient: WireTensor,
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
}

impl WireScoreResponse {
    pub fn from_response<S: Scalar>(resp: &ScoreResponse<S>) -> Self {
        Self {
            pixel_gradient: WireTensor::from_image(&resp.pixel_gradient),
            diagnostics: resp.diagnostics.clone(),
        }
    }

    pub fn to_response<S: Scalar>(&self) -> Result<ScoreResponse<S>, ScoreError> {
        Ok(ScoreResponse {
            pixel_gradient: self.pixel_gradient.to_image().map_err(ScoreError::Validation)?,
            diagnostics: self.diagnostics.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraStepRequest {
    pub run_id: String,
    pub patch: WireTensor,
    pub prompt_id: u32,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraStepResponse {
    pub ok: bool,
    /// LoRA steps taken by this run so far.
    pub step_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OkResponse {
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model_id: String,
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

impl ErrorBody {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            error: ErrorDetail {
                code: code.into(),
                message: message.into(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_layout_is_row_major_le_f32() {
        let img = RgbImage::from_fn(2, 1, |x, _| [x as f64, 0.5, -1.0]);
        let t = WireTensor::from_image(&img);
        assert_eq!(t.shape, vec![1, 2, 3]);
        let bytes = STANDARD.decode(&t.data).unwrap();
        assert_eq!(bytes.len(), 24);
        assert_eq!(f32::from_le_bytes(bytes[12..16].try_into().unwrap()), 1.0);
        assert_eq!(f32::from_le_bytes(bytes[20..24].try_into().unwrap()), -1.0);
        assert_eq!(t.to_image::<f64>().unwrap(), img);
    }

    #[test]
    fn malformed_tensors_rejected() {
        let good = WireTensor::from_image(&RgbImage::<f32>::zeros(2, 2));
        let wrong_shape = WireTensor { shape: vec![2, 3, 3], ..good.clone() };
        assert!(wrong_shape.to_image::<f32>().is_err());
        let wrong_dtype = WireTensor { dtype: "f16".into(), ..good.clone() };
        assert!(wrong_dtype.to_image::<f32>().is_err());
        let bad_data = WireTensor { data: "!!".into(), ..good };
        assert!(bad_data.to_image::<f32>().is_err());
    }

    #[test]
    fn registration_defaults_and_checks() {
        let json = r#"{"run_id":"a","prompts":[{"id":0,"text":"x"}],"guidance_scale":7.5,"lora_rank":4}"#;
        let reg: RunRegistration = serde_json::from_str(json).unwrap();
        assert_eq!(reg.lora_learning_rate, 1e-4);
        assert!(reg.validate().is_ok());
        let mut dup = reg.clone();
        dup.prompts.push(dup.prompts[0].clone());
        assert!(dup.validate().is_err());
        assert!(RunRegistration { guidance_scale: 0.5, ..reg }.validate().is_err());
    }
}
