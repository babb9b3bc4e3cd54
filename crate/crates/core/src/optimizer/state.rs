//! JSON sidecar holding everything a checkpoint needs to resume bit-exactly: step,
//! Adam moments, full-precision parameters and the generator position.

use std::fs;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::train::Trainer;
use super::OptimizeError;
use crate::scalar::{self, Scalar};
use crate::texture::TextureModel;

const STATE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StateFile {
    version: u32,
    run_id: String,
    scalar: String,
    k: u64,
    adam_t: u64,
    /// base64 little-endian f64.
    adam_m: String,
    adam_v: String,
    params: String,
    rng_seed: String,
    rng_stream: u64,
    /// Decimal u128.
    rng_word_pos: String,
    recent_losses: Vec<f64>,
}

/// `ckpt.bin` -> `ckpt.state.json`.
pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("state.json")
}

fn encode_f64(values: impl Iterator<Item = f64>) -> String {
    STANDARD.encode(scalar::to_le_bytes(&values.collect::<Vec<f64>>()))
}

fn decode_f64(field: &str, text: &str, expected: usize) -> Result<Vec<f64>, OptimizeError> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| OptimizeError::State(format!("{field}: {e}")))?;
    let values: Vec<f64> =
        scalar::from_le_bytes(&bytes).ok_or_else(|| OptimizeError::State(format!("{field}: ragged byte length")))?;
    if values.len() != expected {
        return Err(OptimizeError::State(format!(
            "{field} holds {} values, texture has {expected} parameters",
            values.len()
        )));
    }
    Ok(values)
}

pub fn save<S: Scalar>(path: &Path, trainer: &Trainer<S>) -> Result<(), OptimizeError> {
    let st = &trainer.state;
    let file = StateFile {
        version: STATE_VERSION,
        run_id: trainer.run_id.clone(),
        scalar: S::NAME.into(),
        k: st.k,
        adam_t: st.adam.t,
        adam_m: encode_f64(st.adam.m.iter().copied()),
        adam_v: encode_f64(st.adam.v.iter().copied()),
        params: encode_f64(trainer.model.params().iter().map(|v| v.as_f64())),
        rng_seed: STANDARD.encode(st.rng.get_seed()),
        rng_stream: st.rng.get_stream(),
        rng_word_pos: st.rng.get_word_pos().to_string(),
        recent_losses: st.recent_losses.iter().copied().collect(),
    };
    fs::write(path, serde_json::to_vec_pretty(&file)?)?;
    Ok(())
}

/// Overwrites the trainer's state and parameters with the sidecar's.
pub fn load_into<S: Scalar>(path: &Path, trainer: &mut Trainer<S>) -> Result<(), OptimizeError> {
    let file: StateFile = serde_json::from_slice(&fs::read(path)?)?;
    if file.version != STATE_VERSION {
        return Err(OptimizeError::State(format!("unsupported state version {}", file.version)));
    }
    if file.k > trainer.config.k_total {
        return Err(OptimizeError::State(format!(
            "state is at step {} beyond k_total {}",
            file.k, trainer.config.k_total
        )));
    }
    let n = trainer.model.num_params();
    let m = decode_f64("adam_m", &file.adam_m, n)?;
    let v = decode_f64("adam_v", &file.adam_v, n)?;
    let params = decode_f64("params", &file.params, n)?;
    let seed: [u8; 32] = STANDARD
        .decode(&file.rng_seed)
        .ok()
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| OptimizeError::State("rng_seed must be 32 base64 bytes".into()))?;
    let word_pos: u128 = file
        .rng_word_pos
        .parse()
        .map_err(|e| OptimizeError::State(format!("rng_word_pos: {e}")))?;
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(file.rng_stream);
    rng.set_word_pos(word_pos);

    for (p, x) in trainer.model.params_mut().iter_mut().zip(&params) {
        *p = S::lit(*x);
    }
    let st = &mut trainer.state;
    st.k = file.k;
    st.adam.t = file.adam_t;
    st.adam.m = m;
    st.adam.v = v;
    st.rng = rng;
    st.recent_losses = file.recent_losses.into();
    trainer.run_id = file.run_id;
    Ok(())
}
