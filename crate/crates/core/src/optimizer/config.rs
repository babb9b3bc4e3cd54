use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamConfig;
use super::OptimizeError;
use crate::patching::DEFAULT_PATCH_SIZE;
use crate::scalar::Scalar;
use crate::schedules::{JitterConfig, ResolutionSchedule, TimestepSchedule};
use crate::texture::{AnyTexture, HashGridConfig, HashGridField, MlpConfig, PlainGrid, Reduction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewSelection {
    RoundRobin,
    #[default]
    UniformRandom,
}

/// How many views contribute to one parameter update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewsPerStep {
    #[default]
    One,
    /// Every view is scored and the gradients are summed.
    All,
}

/// What to do when a provider call fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderErrorPolicy {
    /// Log, skip the update and advance `k`.
    Skip,
    /// Flush a checkpoint and stop the run.
    #[default]
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TextureSpec {
    HashGrid {
        #[serde(default)]
        grid: HashGridConfig,
        #[serde(default)]
        mlp: MlpConfig,
    },
    PlainGrid {
        resolution: usize,
        #[serde(default = "neutral_grey")]
        init: [f64; 3],
    },
}

fn neutral_grey() -> [f64; 3] {
    [0.5; 3]
}

impl Default for TextureSpec {
    fn default() -> Self {
        TextureSpec::HashGrid {
            grid: HashGridConfig::default(),
            mlp: MlpConfig::default(),
        }
    }
}

/// Stream of the texture-initialization generator, kept apart from the training stream.
const INIT_STREAM: u64 = 0x7e47;

impl TextureSpec {
    /// Fresh texture for a scene with `surfaces` surfaces, initialized from `seed`.
    pub fn build<S: Scalar>(&self, surfaces: usize, seed: u64) -> Result<AnyTexture<S>, OptimizeError> {
        Ok(match self {
            TextureSpec::HashGrid { grid, mlp } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(INIT_STREAM);
                AnyTexture::HashGrid(HashGridField::new(*grid, *mlp, &mut rng)?)
            }
            TextureSpec::PlainGrid { resolution, init } => {
                AnyTexture::PlainGrid(PlainGrid::filled(surfaces, *resolution, init.map(S::lit))?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub k_total: u64,
    pub jitter: JitterConfig,
    pub resolution: ResolutionSchedule,
    pub timestep: TimestepSchedule,
    pub patch_size: usize,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub seed: u64,
    /// Steps between checkpoints; 0 writes only the final one.
    pub checkpoint_every: u64,
    pub view_selection: ViewSelection,
    pub views_per_step: ViewsPerStep,
    pub on_provider_error: ProviderErrorPolicy,
    pub reduction: Reduction,
    pub texture: TextureSpec,
    /// Capacity of the recent-loss ring buffer.
    pub loss_window: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k_total: 2000,
            jitter: JitterConfig::default(),
            resolution: ResolutionSchedule::default(),
            timestep: TimestepSchedule::default(),
            patch_size: DEFAULT_PATCH_SIZE,
            learning_rate: 1e-3,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            seed: 0,
            checkpoint_every: 500,
            view_selection: ViewSelection::UniformRandom,
            views_per_step: ViewsPerStep::One,
            on_provider_error: ProviderErrorPolicy::Abort,
            reduction: Reduction::Deterministic,
            texture: TextureSpec::default(),
            loss_window: 100,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |m: String| Err(OptimizeError::Config(m));
        if self.k_total < 1 {
            return bad("k_total must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        let (b1, b2) = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return bad(format!("adam_betas must lie in [0, 1), got ({b1}, {b2})"));
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be > 0".into());
        }
        if self.patch_size == 0 || self.patch_size > self.resolution.a as usize {
            return bad(format!(
                "patch_size {} must be in 1..={} (the smallest render size)",
                self.patch_size, self.resolution.a
            ));
        }
        self.jitter.validate()?;
        self.resolution.validate()?;
        self.timestep.validate()?;
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_betas.0,
            beta2: self.adam_betas.1,
            eps: self.adam_eps,
        }
    }
}
