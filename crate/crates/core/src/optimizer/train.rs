use std::collections::VecDeque;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::config::{ProviderErrorPolicy, RunConfig, ViewSelection, ViewsPerStep};
use super::state;
use super::OptimizeError;
use crate::geometry::{build_uv_query_map_region, SceneSpec, ViewSpec};
use crate::patching::{sample_patch, PatchRect};
use crate::scalar::Scalar;
use crate::schedules::{jitter_camera, jitter_scale, render_resolution, sample_timestep};
use crate::scoring::{score_checked, ScoreError, ScoreProvider, ScoreRequest};
use crate::texture::{backward, eval_map, AnyTexture, ParamGradient, TextureModel};

/// Everything that changes from step to step besides the parameters.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub k: u64,
    pub adam: Adam,
    pub rng: ChaCha8Rng,
    pub recent_losses: VecDeque<f64>,
}

/// One scored view within a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: u64,
    pub view: u32,
    /// Jitter scale `C(k)`.
    pub c: f64,
    /// Render side `R(k)`.
    pub r: u32,
    pub t: f64,
    pub patch: PatchRect,
    /// Norm of the parameter gradient of the whole step.
    pub grad_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    /// Why the update was not applied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub records: Vec<StepRecord>,
    /// Set when the run stopped early.
    pub aborted: Option<String>,
}

impl RunReport {
    /// Mean reported loss over the last `n` records that have one.
    pub fn tail_loss(&self, n: usize) -> Option<f64> {
        let tail: Vec<f64> = self.records.iter().rev().filter_map(|r| r.loss).take(n).collect();
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    }
}

pub struct Trainer<S: Scalar> {
    pub config: RunConfig,
    pub scene: SceneSpec<S>,
    pub views: Vec<ViewSpec<S>>,
    pub model: AnyTexture<S>,
    pub state: TrainState,
    pub run_id: String,
}

/// Checkpoint file stem for step `k`.
pub fn checkpoint_stem(k: u64) -> String {
    format!("ckpt_{k:06}")
}

impl<S: Scalar> Trainer<S> {
    pub fn new(
        config: RunConfig,
        scene: SceneSpec<S>,
        views: Vec<ViewSpec<S>>,
        model: AnyTexture<S>,
    ) -> Result<Self, OptimizeError> {
        config.validate()?;
        scene.validate()?;
        if views.is_empty() {
            return Err(OptimizeError::Config("at least one view is required".into()));
        }
        for v in &views {
            v.base_camera.validate()?;
        }
        if !model.covers_surfaces(scene.num_surfaces()) {
            return Err(OptimizeError::Config(format!(
                "{} texture does not cover the scene's {} surfaces",
                model.kind_name(),
                scene.num_surfaces()
            )));
        }
        let state = TrainState {
            k: 0,
            adam: Adam::new(config.adam(), model.num_params()),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            recent_losses: VecDeque::with_capacity(config.loss_window),
        };
        Ok(Self {
            run_id: format!("run-{}", config.seed),
            config,
            scene,
            views,
            model,
            state,
        })
    }

    /// Fresh texture built from `config.texture`.
    pub fn from_config(config: RunConfig, scene: SceneSpec<S>, views: Vec<ViewSpec<S>>) -> Result<Self, OptimizeError> {
        let model = config.texture.build(scene.num_surfaces(), config.seed)?;
        Self::new(config, scene, views, model)
    }

    /// Restores a trainer from a checkpoint and its state sidecar.
    pub fn resume(
        config: RunConfig,
        scene: SceneSpec<S>,
        views: Vec<ViewSpec<S>>,
        checkpoint: &Path,
    ) -> Result<Self, OptimizeError> {
        let model = AnyTexture::load(checkpoint)?;
        let mut trainer = Self::new(config, scene, views, model)?;
        state::load_into(&state::sidecar_path(checkpoint), &mut trainer)?;
        Ok(trainer)
    }

    pub fn is_finished(&self) -> bool {
        self.state.k >= self.config.k_total
    }

    fn select_views(&mut self) -> Vec<usize> {
        let n = self.views.len();
        match self.config.views_per_step {
            ViewsPerStep::All => (0..n).collect(),
            ViewsPerStep::One => vec![match self.config.view_selection {
                ViewSelection::RoundRobin => (self.state.k % n as u64) as usize,
                ViewSelection::UniformRandom => self.state.rng.random_range(0..n),
            }],
        }
    }

    /// One optimization step: render, score and backpropagate the selected view(s),
    /// then one Adam update. Provider failures follow `config.on_provider_error`;
    /// non-finite gradients always skip the update.
    pub fn step(&mut self, provider: &mut dyn ScoreProvider<S>) -> Result<Vec<StepRecord>, OptimizeError> {
        let k = self.state.k;
        let k_total = self.config.k_total;
        if k >= k_total {
            return Err(OptimizeError::Finished(k));
        }
        let c = jitter_scale(k, k_total, &self.config.jitter)?;
        let r = render_resolution(k, k_total, &self.config.resolution)?;
        let side = r as usize;
        let mut total = ParamGradient::<S>::zeros(self.model.num_params());
        let mut records = Vec::new();
        let mut skip: Option<String> = None;

        for vi in self.select_views() {
            let view = &self.views[vi];
            let camera = jitter_camera(&view.base_camera, c, &self.config.jitter, &mut self.state.rng);
            let rect = sample_patch(side, side, self.config.patch_size, &mut self.state.rng)?;
            let t = sample_timestep(k, &self.config.timestep, &mut self.state.rng);
            let map = build_uv_query_map_region(&self.scene, &camera, side, side, rect.x0, rect.y0, rect.size, rect.size);
            let patch = eval_map(&self.model, &map, self.scene.background_color);
            let req = ScoreRequest {
                run_id: self.run_id.clone(),
                view_id: view.id,
                prompt_id: view.prompt_id,
                step: k,
                timestep: t,
                patch,
                patch_rect: rect,
                full_resolution: side,
            };
            let mut record = StepRecord {
                k,
                view: view.id,
                c,
                r,
                t,
                patch: rect,
                grad_norm: 0.0,
                loss: None,
                skipped: None,
            };
            match score_checked(provider, &req) {
                Ok(resp) => {
                    record.loss = resp.diagnostics.get("loss").copied();
                    let g = backward(&self.model, &map, &resp.pixel_gradient, self.config.reduction)?;
                    total.add_assign(&g);
                }
                Err(e @ ScoreError::Validation(_)) => {
                    log::warn!("step {k}: rejected provider response: {e}");
                    skip = Some(e.to_string());
                }
                Err(e) => match self.config.on_provider_error {
                    ProviderErrorPolicy::Skip => {
                        log::warn!("step {k}: provider failed, skipping: {e}");
                        skip = Some(e.to_string());
                    }
                    ProviderErrorPolicy::Abort => return Err(OptimizeError::Provider { k, source: e }),
                },
            }
            records.push(record);
            if skip.is_some() {
                break;
            }
        }

        let grad_norm = total.norm();
        if skip.is_none() {
            if self.state.adam.step(self.model.params_mut(), &total.values) {
                self.model.project();
            } else {
                log::warn!("step {k}: non-finite update rejected");
                skip = Some("non-finite update".into());
            }
        }
        for rec in &mut records {
            rec.grad_norm = grad_norm;
            rec.skipped = skip.clone();
            if let Some(l) = rec.loss {
                if self.state.recent_losses.len() == self.config.loss_window.max(1) {
                    self.state.recent_losses.pop_front();
                }
                self.state.recent_losses.push_back(l);
            }
        }
        self.state.k += 1;
        Ok(records)
    }

    /// Writes `<stem>.bin` and its state sidecar into `dir`.
    pub fn save_checkpoint(&self, dir: &Path, stem: &str) -> Result<PathBuf, OptimizeError> {
        let path = dir.join(format!("{stem}.bin"));
        self.model.save(&path)?;
        state::save(&state::sidecar_path(&path), self)?;
        Ok(path)
    }

    /// Runs to `k_total`. With an output directory, appends one JSON line per record
    /// to `report.jsonl` and writes checkpoints every `checkpoint_every` steps and at
    /// the end. A provider failure under the abort policy flushes a checkpoint and
    /// returns the partial report with `aborted` set.
    pub fn run(&mut self, provider: &mut dyn ScoreProvider<S>, out_dir: Option<&Path>) -> Result<RunReport, OptimizeError> {
        let mut report = RunReport::default();
        let mut sink = match out_dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                Some(BufWriter::new(
                    File::options().create(true).append(true).open(dir.join("report.jsonl"))?,
                ))
            }
            None => None,
        };
        while !self.is_finished() {
            match self.step(provider) {
                Ok(records) => {
                    if let Some(w) = sink.as_mut() {
                        for rec in &records {
                            serde_json::to_writer(&mut *w, rec)?;
                            w.write_all(b"\n")?;
                        }
                    }
                    report.records.extend(records);
                }
                Err(e @ OptimizeError::Provider { .. }) => {
                    log::error!("{e}; aborting");
                    report.aborted = Some(e.to_string());
                    break;
                }
                Err(e) => {
                    if let Some(dir) = out_dir {
                        self.save_checkpoint(dir, &checkpoint_stem(self.state.k))?;
                    }
                    return Err(e);
                }
            }
            let every = self.config.checkpoint_every;
            if let Some(dir) = out_dir {
                if every > 0 && self.state.k.is_multiple_of(every) && !self.is_finished() {
                    self.save_checkpoint(dir, &checkpoint_stem(self.state.k))?;
                }
            }
        }
        if let Some(w) = sink.as_mut() {
            w.flush()?;
        }
        if let Some(dir) = out_dir {
            let stem = if report.aborted.is_some() { checkpoint_stem(self.state.k) } else { "final".into() };
            self.save_checkpoint(dir, &stem)?;
        }
        Ok(report)
    }
}

/// Trains a fresh texture from `config.texture` and returns it with the report.
pub fn run<S: Scalar>(
    config: RunConfig,
    scene: SceneSpec<S>,
    views: Vec<ViewSpec<S>>,
    provider: &mut dyn ScoreProvider<S>,
) -> Result<(AnyTexture<S>, RunReport), OptimizeError> {
    let mut trainer = Trainer::from_config(config, scene, views)?;
    let report = trainer.run(provider, None)?;
    Ok((trainer.model, report))
}
