//! Run manifest: a TOML document describing scene, views, prompts, provider and run.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use illusion_core::geometry::{cube_corner_views, sphere_views, SceneShape, SceneSpec, ViewSpec};
use illusion_core::optimizer::RunConfig;
use illusion_core::scoring::{
    L2Provider, ProceduralProvider, PromptSpec, RemoteConfig, RemoteScorer, ScoreProvider, TargetImageSpec,
};
use serde::{Deserialize, Serialize};

use crate::imageio;
use crate::CliError;

/// Environment variable overriding the remote scorer endpoint.
pub const SCORER_URL_ENV: &str = "ILLUSION_SCORER_URL";

/// Angular spacing of default sphere views, degrees.
const SPHERE_PRESET_SEPARATION_DEG: f32 = 90.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub scene: SceneSpec<f32>,
    /// When absent, cube and sphere scenes get a preset with one view per prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub views: Option<Vec<ViewSpec<f32>>>,
    #[serde(default)]
    pub prompts: Vec<PromptSpec>,
    pub provider: ProviderSpec,
    #[serde(default)]
    pub run: RunConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEntry {
    pub view: u32,
    /// PNG path, relative to the manifest's directory.
    pub path: PathBuf,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderSpec {
    /// Pixel-wise L2 against per-view target images.
    L2 {
        targets: Vec<TargetEntry>,
        #[serde(default = "one_sample")]
        samples_per_pixel: usize,
    },
    /// Pulls every pixel toward one color.
    Procedural { color: [f32; 3] },
    /// HTTP scorer service.
    Remote(RemoteConfig),
}

fn one_sample() -> usize {
    1
}

impl RunManifest {
    /// Parses and validates a manifest, filling preset views when none are given.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut m: RunManifest = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        m.fill_views()?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut m = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let ProviderSpec::L2 { targets, .. } = &mut m.provider {
            for t in targets {
                if t.path.is_relative() {
                    t.path = base.join(&t.path);
                }
            }
        }
        Ok(m)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Parse(e.to_string()))
    }

    fn fill_views(&mut self) -> Result<(), CliError> {
        if self.views.is_some() {
            return Ok(());
        }
        let n = self.prompts.len();
        let views = match self.scene.shape {
            SceneShape::Cube { half_extent } => cube_corner_views(half_extent, n),
            SceneShape::Sphere { radius } => sphere_views(radius, n, SPHERE_PRESET_SEPARATION_DEG),
            SceneShape::ReflectivePlane { .. } => {
                return Err(CliError::Semantic {
                    field: "views".into(),
                    message: "reflective plane scenes need explicit views".into(),
                })
            }
        }
        .map_err(|e| CliError::Semantic {
            field: "views".into(),
            message: format!("no preset for {n} prompts: {e}"),
        })?;
        self.views = Some(views);
        Ok(())
    }

    /// The views; always present after parsing.
    pub fn views(&self) -> &[ViewSpec<f32>] {
        self.views.as_deref().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let sem = |field: String, message: String| CliError::Semantic { field, message };
        self.scene.validate().map_err(|e| sem("scene".into(), e.to_string()))?;
        let views = self.views();
        if views.is_empty() {
            return Err(sem("views".into(), "at least one view is required".into()));
        }
        let mut prompt_ids = std::collections::HashSet::new();
        for (i, p) in self.prompts.iter().enumerate() {
            if !prompt_ids.insert(p.id) {
                return Err(sem(format!("prompts[{i}].id"), format!("duplicate prompt id {}", p.id)));
            }
        }
        let mut view_ids = std::collections::HashSet::new();
        for (i, v) in views.iter().enumerate() {
            if !view_ids.insert(v.id) {
                return Err(sem(format!("views[{i}].id"), format!("duplicate view id {}", v.id)));
            }
            if !prompt_ids.contains(&v.prompt_id) {
                return Err(sem(
                    format!("views[{i}].prompt_id"),
                    format!("view {} refers to prompt {} which is not defined", v.id, v.prompt_id),
                ));
            }
            v.base_camera
                .validate()
                .map_err(|e| sem(format!("views[{i}].base_camera"), e.to_string()))?;
        }
        self.run.validate().map_err(|e| sem("run".into(), e.to_string()))?;
        match &self.provider {
            ProviderSpec::L2 { targets, samples_per_pixel } => {
                if *samples_per_pixel == 0 {
                    return Err(sem("provider.samples_per_pixel".into(), "must be at least 1".into()));
                }
                for (i, t) in targets.iter().enumerate() {
                    if !view_ids.contains(&t.view) {
                        return Err(sem(format!("provider.targets[{i}].view"), format!("unknown view {}", t.view)));
                    }
                    if !(t.weight.is_finite() && t.weight > 0.0) {
                        return Err(sem(format!("provider.targets[{i}].weight"), "must be > 0".into()));
                    }
                }
            }
            ProviderSpec::Procedural { color } => {
                if !color.iter().all(|c| (0.0..=1.0).contains(c)) {
                    return Err(sem("provider.color".into(), "components must lie in [0, 1]".into()));
                }
            }
            ProviderSpec::Remote(_) => {}
        }
        Ok(())
    }

    pub fn view(&self, id: u32) -> Result<&ViewSpec<f32>, CliError> {
        self.views()
            .iter()
            .find(|v| v.id == id)
            .ok_or_else(|| CliError::Semantic { field: "view".into(), message: format!("no view with id {id}") })
    }

    /// Loads the L2 targets as `(view, image, weight)`.
    pub fn load_targets(&self) -> Result<Vec<(u32, illusion_core::Image32, f64)>, CliError> {
        match &self.provider {
            ProviderSpec::L2 { targets, .. } => targets
                .iter()
                .map(|t| Ok((t.view, imageio::load_png(&t.path)?, t.weight)))
                .collect(),
            _ => Err(CliError::Semantic {
                field: "provider.kind".into(),
                message: "this command needs an l2 provider with target images".into(),
            }),
        }
    }

    /// Builds the score provider. The scorer URL environment variable, when set,
    /// overrides a remote provider's endpoint.
    pub fn build_provider(&self) -> Result<Box<dyn ScoreProvider<f32>>, CliError> {
        Ok(match &self.provider {
            ProviderSpec::L2 { samples_per_pixel, .. } => {
                let targets: HashMap<u32, TargetImageSpec<f32>> = self
                    .load_targets()?
                    .into_iter()
                    .map(|(view, target, weight)| (view, TargetImageSpec { target, weight }))
                    .collect();
                Box::new(L2Provider::new(targets).with_supersampling(*samples_per_pixel))
            }
            ProviderSpec::Procedural { color } => Box::new(ProceduralProvider { color: *color }),
            ProviderSpec::Remote(cfg) => {
                let mut cfg = cfg.clone();
                if let Ok(url) = std::env::var(SCORER_URL_ENV) {
                    cfg.url = url;
                }
                if cfg.prompts.is_empty() {
                    cfg.prompts = self.prompts.clone();
                }
                Box::new(RemoteScorer::new(cfg))
            }
        })
    }
}
