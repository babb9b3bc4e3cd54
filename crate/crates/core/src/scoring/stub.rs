//! Loopback scorer service that wraps a local provider behind the scorer wire protocol.
//!
//! `/lora_step` only counts calls; the wrapped provider answers `/score`. Used for
//! protocol tests and for running the remote client without a diffusion model.

#![allow(clippy::result_large_err)]

use std::collections::HashMap;
use std::net::{SocketAddr, TcpListener};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use tokio::sync::oneshot;

use super::wire::{
    ErrorBody, HealthResponse, LoraStepRequest, LoraStepResponse, OkResponse, RunRegistration, WireScoreRequest,
    WireScoreResponse,
};
use super::{score_checked, ScoreError, ScoreProvider};

const MAX_REQUEST_BYTES: usize = 256 << 20;

struct StubState {
    provider: Box<dyn ScoreProvider<f32>>,
    /// LoRA step count per registered run.
    runs: HashMap<String, u64>,
    model_id: String,
}

type Shared = Arc<Mutex<StubState>>;

pub struct StubServer {
    provider: Box<dyn ScoreProvider<f32>>,
    model_id: String,
}

pub struct StubHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

fn error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (status, Json(ErrorBody::new(code, message))).into_response()
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, Response> {
    serde_json::from_slice(body).map_err(|e| error(StatusCode::BAD_REQUEST, "malformed_request", e.to_string()))
}

fn require_run(state: &StubState, run_id: &str) -> Result<(), Response> {
    if state.runs.contains_key(run_id) {
        Ok(())
    } else {
        Err(error(StatusCode::NOT_FOUND, "unknown_run", format!("run {run_id:?} is not registered")))
    }
}

async fn health(State(state): State<Shared>) -> Response {
    let s = state.lock().expect("stub state poisoned");
    Json(HealthResponse {
        status: "ok".into(),
        model_id: s.model_id.clone(),
        deterministic: true,
    })
    .into_response()
}

async fn register(State(state): State<Shared>, body: Bytes) -> Response {
    let reg: RunRegistration = match parse(&body) {
        Ok(r) => r,
        Err(e) => return e,
    };
    if let Err(msg) = reg.validate() {
        return error(StatusCode::BAD_REQUEST, "invalid_registration", msg);
    }
    let mut s = state.lock().expect("stub state poisoned");
    if s.runs.contains_key(&reg.run_id) {
        return error(StatusCode::CONFLICT, "duplicate_run", format!("run {:?} already registered", reg.run_id));
    }
    s.runs.insert(reg.run_id, 0);
    Json(OkResponse { ok: true }).into_response()
}

async fn score(State(state): State<Shared>, body: Bytes) -> Response {
    let wire: WireScoreRequest = match parse(&body) {
        Ok(r) => r,
        Err(e) => return e,
    };
    let mut s = state.lock().expect("stub state poisoned");
    if let Err(e) = require_run(&s, &wire.run_id) {
        return e;
    }
    let req = match wire.to_request::<f32>() {
        Ok(r) => r,
        Err(msg) => return error(StatusCode::BAD_REQUEST, "malformed_tensor", msg),
    };
    if req.patch.width % 8 != 0 {
        return error(StatusCode::BAD_REQUEST, "bad_patch", format!("patch side {} not divisible by 8", req.patch.width));
    }
    match score_checked(&mut s.provider, &req) {
        Ok(resp) => Json(WireScoreResponse::from_response(&resp)).into_response(),
        Err(ScoreError::BadRequest(msg)) => error(StatusCode::BAD_REQUEST, "bad_request", msg),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "score_failed", e.to_string()),
    }
}

async fn lora_step(State(state): State<Shared>, body: Bytes) -> Response {
    let req: LoraStepRequest = match parse(&body) {
        Ok(r) => r,
        Err(e) => return e,
    };
    let mut s = state.lock().expect("stub state poisoned");
    if let Err(e) = require_run(&s, &req.run_id) {
        return e;
    }
    if let Err(msg) = req.patch.to_image::<f32>() {
        return error(StatusCode::BAD_REQUEST, "malformed_tensor", msg);
    }
    let count = s.runs.get_mut(&req.run_id).expect("checked above");
    *count += 1;
    Json(LoraStepResponse {
        ok: true,
        step_count: *count,
    })
    .into_response()
}

impl StubServer {
    pub fn new(provider: Box<dyn ScoreProvider<f32>>) -> Self {
        Self {
            provider,
            model_id: "stub".into(),
        }
    }

    pub fn with_model_id(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }

    fn router(self) -> Router {
        let state = Arc::new(Mutex::new(StubState {
            provider: self.provider,
            runs: HashMap::new(),
            model_id: self.model_id,
        }));
        Router::new()
            .route("/health", get(health))
            .route("/register", post(register))
            .route("/score", post(score))
            .route("/lora_step", post(lora_step))
            .layer(DefaultBodyLimit::max(MAX_REQUEST_BYTES))
            .with_state(state)
    }

    /// Binds `addr` (port 0 picks a free port) and serves on a background thread.
    pub fn spawn(self, addr: SocketAddr) -> std::io::Result<StubHandle> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let router = self.router();
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new().name("scorer-stub".into()).spawn(move || {
            let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener)?;
                axum::serve(listener, router)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
            })
        })?;
        Ok(StubHandle {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }
}

impl StubHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server stops on its own.
    pub fn wait(mut self) -> std::io::Result<()> {
        // dropping the sender would trigger shutdown
        let _keep = self.shutdown.take();
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(std::io::Error::other("stub thread panicked"))),
            None => Ok(()),
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for StubHandle {
    fn drop(&mut self) {
        self.stop();
    }
}
