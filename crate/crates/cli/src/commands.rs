use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use illusion_core::geometry::{build_uv_query_map, CameraPose};
use illusion_core::optimizer::{inverse_project, RunReport};
use illusion_core::raster::{masked_mse, psnr_from_mse};
use illusion_core::scoring::{ProceduralProvider, ScoreProvider, StubServer};
use illusion_core::texture::{eval_map, AnyTexture, Reduction};
use illusion_core::{Image32, SceneSpec32, Texture32, Trainer32};
use serde::Serialize;

use crate::imageio::save_png;
use crate::manifest::{ProviderSpec, RunManifest};
use crate::CliError;

/// Overrides applied on top of a manifest's run section.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub deterministic: bool,
}

impl RunOverrides {
    pub fn apply(&self, manifest: &mut RunManifest) {
        if let Some(out) = &self.out {
            manifest.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            manifest.run.seed = seed;
        }
        if self.deterministic {
            manifest.run.reduction = Reduction::Deterministic;
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Renders `camera` at `size x size`; also returns which pixels hit the scene.
pub fn render(scene: &SceneSpec32, model: &Texture32, camera: &CameraPose<f32>, size: usize) -> (Image32, Vec<bool>) {
    let map = build_uv_query_map(scene, camera, size, size);
    let mask = map.entries.iter().map(Option::is_some).collect();
    (eval_map(model, &map, scene.background_color), mask)
}

/// Loads a checkpoint and checks it covers the scene's surfaces.
pub fn load_checkpoint(path: &Path, scene: &SceneSpec32) -> Result<Texture32, CliError> {
    let model = AnyTexture::load(path)?;
    if !model.covers_surfaces(scene.num_surfaces()) {
        return Err(CliError::Incompatible(format!(
            "{} {} does not cover {} surfaces",
            model.kind_name(),
            path.display(),
            scene.num_surfaces()
        )));
    }
    Ok(model)
}

fn write_view_renders(manifest: &RunManifest, model: &Texture32, dir: &Path, size: usize) -> Result<(), CliError> {
    for v in manifest.views() {
        let (img, _) = render(&manifest.scene, model, &v.base_camera, size);
        save_png(&dir.join(format!("view_{}.png", v.id)), &img)?;
    }
    Ok(())
}

/// Optimizes the manifest's texture, or continues from `checkpoint`. Writes the
/// report, checkpoints, the resolved manifest and one render per view into the
/// output directory. An aborted run still writes its outputs, then errors.
pub fn run(manifest: &RunManifest, checkpoint: Option<&Path>) -> Result<RunReport, CliError> {
    if let ProviderSpec::L2 { targets, .. } = &manifest.provider {
        if let Some(v) = manifest.views().iter().find(|v| !targets.iter().any(|t| t.view == v.id)) {
            return Err(CliError::Semantic {
                field: "provider.targets".into(),
                message: format!("view {} has no target image", v.id),
            });
        }
    }
    let dir = manifest.output_dir.as_path();
    create_dir(dir)?;
    fs::write(dir.join("manifest.resolved.toml"), manifest.to_toml()?).map_err(|e| CliError::io(dir, e))?;
    let (scene, views) = (manifest.scene.clone(), manifest.views().to_vec());
    let mut trainer = match checkpoint {
        Some(ckpt) => Trainer32::resume(manifest.run.clone(), scene, views, ckpt)?,
        None => Trainer32::from_config(manifest.run.clone(), scene, views)?,
    };
    let mut provider = manifest.build_provider()?;
    let report = trainer.run(provider.as_mut(), Some(dir))?;
    write_view_renders(manifest, &trainer.model, dir, manifest.run.resolution.b as usize)?;
    match report.aborted {
        Some(msg) => Err(CliError::Aborted(msg)),
        None => Ok(report),
    }
}

/// Turntable around the `y` axis starting from a view's base camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Turntable {
    pub view: u32,
    pub frames: usize,
    /// Azimuth offsets from the base camera, degrees; frame `i` sits at
    /// `start + (end - start) * i / frames`.
    pub azimuth_start: f32,
    pub azimuth_end: f32,
    pub size: usize,
}

impl Turntable {
    pub fn azimuths(&self) -> Result<Vec<f32>, CliError> {
        if self.frames == 0 {
            return Err(CliError::Argument("frame count must be at least 1".into()));
        }
        if !(self.azimuth_end > self.azimuth_start) {
            return Err(CliError::Argument("azimuth end must exceed azimuth start".into()));
        }
        if self.size == 0 {
            return Err(CliError::Argument("render size must be at least 1".into()));
        }
        let span = self.azimuth_end - self.azimuth_start;
        Ok((0..self.frames)
            .map(|i| self.azimuth_start + span * i as f32 / self.frames as f32)
            .collect())
    }
}

/// Writes `frame_0000.png, ...` into `out`; returns the paths.
pub fn render_turntable(
    manifest: &RunManifest,
    checkpoint: &Path,
    spec: &Turntable,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let azimuths = spec.azimuths()?;
    let model = load_checkpoint(checkpoint, &manifest.scene)?;
    let base = manifest.view(spec.view)?.base_camera;
    create_dir(out)?;
    let mut paths = Vec::with_capacity(azimuths.len());
    for (i, az) in azimuths.iter().enumerate() {
        let camera = base.rotated_about_y(az.to_radians());
        let (img, _) = render(&manifest.scene, &model, &camera, spec.size);
        let path = out.join(format!("frame_{i:04}.png"));
        save_png(&path, &img)?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Capped at 99 dB for a perfect match.
    pub psnr_db: f64,
    pub mse: f64,
    pub hit_pixels: usize,
}

/// PSNR of `render` against `target` over the pixels where `mask` holds.
pub fn evaluate(render: &Image32, target: &Image32, mask: &[bool]) -> Result<EvalReport, CliError> {
    if !render.same_shape(target) {
        return Err(CliError::Argument(format!(
            "target is {}x{}, render is {}x{}",
            target.width, target.height, render.width, render.height
        )));
    }
    let mse = masked_mse(render, target, Some(mask))
        .ok_or_else(|| CliError::Argument("view sees no surface".into()))?;
    Ok(EvalReport {
        psnr_db: psnr_from_mse(mse),
        mse,
        hit_pixels: mask.iter().filter(|m| **m).count(),
    })
}

/// Absolute per-channel error on hit pixels, black elsewhere.
pub fn error_image(render: &Image32, target: &Image32, mask: &[bool]) -> Image32 {
    Image32::from_fn(render.width, render.height, |x, y| {
        if !mask[y * render.width + x] {
            return [0.0; 3];
        }
        let (a, b) = (render.get(x, y), target.get(x, y));
        [0, 1, 2].map(|c| (a[c] - b[c]).abs())
    })
}

/// Renders `view` at the target's size and compares. With `out`, writes the render
/// and the error image there.
pub fn eval(
    manifest: &RunManifest,
    checkpoint: &Path,
    view: u32,
    target: &Image32,
    out: Option<&Path>,
) -> Result<EvalReport, CliError> {
    if target.width != target.height {
        return Err(CliError::Argument(format!("target must be square, got {}x{}", target.width, target.height)));
    }
    let model = load_checkpoint(checkpoint, &manifest.scene)?;
    let camera = manifest.view(view)?.base_camera;
    let (img, mask) = render(&manifest.scene, &model, &camera, target.width);
    let report = evaluate(&img, target, &mask)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        save_png(&dir.join(format!("render_{view}.png")), &img)?;
        save_png(&dir.join(format!("error_{view}.png")), &error_image(&img, target, &mask))?;
    }
    Ok(report)
}

/// Bakes the l2 targets onto a plain grid by inverse projection; writes `bake.bin`
/// and one render per view into `out`.
pub fn bake(manifest: &RunManifest, resolution: usize, out: &Path) -> Result<PathBuf, CliError> {
    let mut views = Vec::new();
    let mut images = Vec::new();
    for (view, img, _) in manifest.load_targets()? {
        views.push(manifest.view(view)?.clone());
        images.push(img);
    }
    let grid = inverse_project(&manifest.scene, &views, &images, resolution)?;
    let model = AnyTexture::from(grid);
    create_dir(out)?;
    let path = out.join("bake.bin");
    model.save(&path)?;
    let size = images.iter().map(|i| i.width.max(i.height)).max().unwrap_or(512);
    write_view_renders(manifest, &model, out, size)?;
    Ok(path)
}

/// Starts the loopback scorer stub backed by the manifest's provider, or a
/// procedural grey one without a manifest. Blocks until the server stops.
pub fn serve_stub(manifest: Option<&RunManifest>, addr: SocketAddr) -> Result<(), CliError> {
    let provider: Box<dyn ScoreProvider<f32>> = match manifest {
        Some(m) => m.build_provider()?,
        None => Box::new(ProceduralProvider { color: [0.5; 3] }),
    };
    let handle = StubServer::new(provider).spawn(addr).map_err(|e| CliError::Io {
        path: addr.to_string(),
        source: e,
    })?;
    println!("{}", handle.url());
    log::info!("scorer stub listening on {}", handle.url());
    handle.wait().map_err(|e| CliError::Io { path: addr.to_string(), source: e })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grey_against_black_is_six_db() {
        let render = Image32::filled(4, 4, [0.5; 3]);
        let target = Image32::filled(4, 4, [0.0; 3]);
        let r = evaluate(&render, &target, &[true; 16]).unwrap();
        assert_eq!(r.mse, 0.25);
        // 10 log10(4), by hand: 6.0206 dB
        assert!((r.psnr_db - 6.0206).abs() < 1e-3, "{}", r.psnr_db);
    }

    #[test]
    fn identical_images_hit_the_cap() {
        let img = Image32::filled(3, 3, [0.3, 0.6, 0.9]);
        assert_eq!(evaluate(&img, &img, &[true; 9]).unwrap().psnr_db, 99.0);
    }

    #[test]
    fn misses_do_not_count() {
        let render = Image32::from_fn(2, 1, |x, _| [x as f32; 3]);
        let target = Image32::filled(2, 1, [0.0; 3]);
        let r = evaluate(&render, &target, &[true, false]).unwrap();
        assert_eq!((r.mse, r.hit_pixels), (0.0, 1));
        assert!(error_image(&render, &target, &[true, false]).is_zero());
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let a = Image32::zeros(2, 2);
        let b = Image32::zeros(3, 2);
        assert!(matches!(evaluate(&a, &b, &[true; 4]), Err(CliError::Argument(_))));
    }

    #[test]
    fn turntable_azimuths() {
        let mut t = Turntable { view: 0, frames: 36, azimuth_start: 0.0, azimuth_end: 360.0, size: 8 };
        let az = t.azimuths().unwrap();
        assert_eq!(az.len(), 36);
        assert!(az.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(az[0], 0.0);
        t.frames = 0;
        assert!(t.azimuths().is_err());
    }
}
