//! HTTP client for a remote scorer service.
//!
//! Each `score` call posts `/score` and then `/lora_step` for the same patch, so the
//! service's adapter is updated once per texture step. A run is registered the first
//! time a request carries its id.

use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::wire::{
    ErrorBody, HealthResponse, LoraStepRequest, LoraStepResponse, RunRegistration, WireScoreRequest,
    WireScoreResponse, WireTensor, DEFAULT_LORA_LEARNING_RATE,
};
use super::{PromptSpec, ScoreError, ScoreProvider, ScoreRequest, ScoreResponse};
use crate::scalar::Scalar;

/// Responses larger than this are refused.
const MAX_RESPONSE_BYTES: u64 = 256 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub url: String,
    pub prompts: Vec<PromptSpec>,
    pub guidance_scale: f64,
    pub lora_rank: u32,
    pub lora_learning_rate: f64,
    pub timeout_secs: f64,
    /// Attempts per request on transport failure.
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub initial_backoff_ms: u64,
    /// Alternate each `/score` with a `/lora_step`.
    pub lora_steps: bool,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            url: "http://127.0.0.1:8765".into(),
            prompts: Vec::new(),
            guidance_scale: 7.5,
            lora_rank: 4,
            lora_learning_rate: DEFAULT_LORA_LEARNING_RATE,
            timeout_secs: 120.0,
            max_attempts: 3,
            initial_backoff_ms: 200,
            lora_steps: true,
        }
    }
}

pub struct RemoteScorer {
    config: RemoteConfig,
    agent: Agent,
    /// Run id the service knows about.
    registered: Option<String>,
}

impl RemoteScorer {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs.max(0.001))))
            .build()
            .new_agent();
        Self {
            config,
            agent,
            registered: None,
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.url.trim_end_matches('/'), path)
    }

    /// Runs `send` up to `max_attempts` times, backing off exponentially between
    /// transport failures. HTTP error statuses are not retried.
    fn with_retry<T: DeserializeOwned>(
        &self,
        path: &str,
        send: impl Fn(&str) -> Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<T, ScoreError> {
        let url = self.url(path);
        let attempts = self.config.max_attempts.max(1);
        let mut delay = Duration::from_millis(self.config.initial_backoff_ms);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match send(&url) {
                Ok(resp) => return decode(resp),
                Err(e) => {
                    log::warn!("{path} attempt {attempt}/{attempts} failed: {e}");
                    last = e.to_string();
                }
            }
            if attempt < attempts {
                thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(ScoreError::Unavailable(format!("{url}: {last} after {attempts} attempts")))
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ScoreError> {
        self.with_retry(path, |url| self.agent.post(url).send_json(body))
    }

    pub fn health(&self) -> Result<HealthResponse, ScoreError> {
        self.with_retry("/health", |url| self.agent.get(url).call())
    }

    /// Registers the run. A run id the service already knows counts as registered,
    /// which lets a resumed run keep its adapter state.
    pub fn register(&mut self, run_id: &str) -> Result<(), ScoreError> {
        let reg = RunRegistration {
            run_id: run_id.to_string(),
            prompts: self.config.prompts.clone(),
            guidance_scale: self.config.guidance_scale,
            lora_rank: self.config.lora_rank,
            lora_learning_rate: self.config.lora_learning_rate,
        };
        match self.post::<_, serde_json::Value>("/register", &reg) {
            Ok(_) => {}
            Err(ScoreError::Server { status: 409, .. }) => {
                log::info!("run {} already registered, reusing it", reg.run_id);
            }
            Err(e) => return Err(e),
        }
        self.registered = Some(reg.run_id);
        Ok(())
    }

    pub fn lora_step<S: Scalar>(&self, req: &ScoreRequest<S>) -> Result<LoraStepResponse, ScoreError> {
        let body = LoraStepRequest {
            run_id: req.run_id.clone(),
            patch: WireTensor::from_image(&req.patch),
            prompt_id: req.prompt_id,
            t: req.timestep,
        };
        self.post("/lora_step", &body)
    }
}

fn decode<T: DeserializeOwned>(mut resp: ureq::http::Response<ureq::Body>) -> Result<T, ScoreError> {
    let status = resp.status().as_u16();
    let bytes = resp
        .body_mut()
        .with_config()
        .limit(MAX_RESPONSE_BYTES)
        .read_to_vec()
        .map_err(|e| ScoreError::Unavailable(format!("reading response body: {e}")))?;
    if !(200..300).contains(&status) {
        let (code, message) = match serde_json::from_slice::<ErrorBody>(&bytes) {
            Ok(b) => (b.error.code, b.error.message),
            Err(_) => ("unknown".into(), String::from_utf8_lossy(&bytes).into_owned()),
        };
        return Err(ScoreError::Server { status, code, message });
    }
    serde_json::from_slice(&bytes).map_err(|e| ScoreError::Validation(format!("undecodable response: {e}")))
}

impl<S: Scalar> ScoreProvider<S> for RemoteScorer {
    fn score(&mut self, req: &ScoreRequest<S>) -> Result<ScoreResponse<S>, ScoreError> {
        if self.registered.as_deref() != Some(req.run_id.as_str()) {
            self.register(&req.run_id)?;
        }
        let wire: WireScoreResponse = self.post("/score", &WireScoreRequest::from_request(req))?;
        let resp = wire.to_response()?;
        resp.validate_for(req)?;
        if self.config.lora_steps {
            self.lora_step(req)?;
        }
        Ok(resp)
    }

    fn name(&self) -> &str {
        "remote"
    }
}
