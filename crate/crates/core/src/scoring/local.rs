//! In-process score providers with closed-form gradients.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ScoreError, ScoreProvider, ScoreRequest, ScoreResponse};
use crate::raster::{Image, RgbImage};
use crate::scalar::Scalar;

/// Pixel-wise supervision of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetImageSpec<S> {
    pub target: RgbImage<S>,
    pub weight: f64,
}

fn target_at_resolution<S: Scalar>(spec: &TargetImageSpec<S>, side: usize) -> RgbImage<S> {
    spec.target.resample_bilinear(side, side)
}

fn crop_target<S: Scalar>(full: &RgbImage<S>, req: &ScoreRequest<S>) -> Result<RgbImage<S>, ScoreError> {
    crate::patching::extract(full, &req.patch_rect)
        .map_err(|e| ScoreError::BadRequest(format!("target does not cover patch: {e}")))
}

/// `2 w (patch - reference) / n` and the loss `w |patch - reference|^2 / n`, where
/// `reference` yields the per-pixel reference color.
fn l2_against<S: Scalar>(
    patch: &RgbImage<S>,
    weight: f64,
    mut reference: impl FnMut(usize, usize) -> [f64; 3],
    mut spread: impl FnMut(usize, usize) -> f64,
) -> ScoreResponse<S> {
    let n = (patch.width * patch.height) as f64;
    let mut loss = 0.0;
    let grad = Image::from_fn(patch.width, patch.height, |x, y| {
        let p = patch.get(x, y);
        let r = reference(x, y);
        let mut g = [S::zero(); 3];
        for c in 0..3 {
            let d = p[c].as_f64() - r[c];
            loss += d * d;
            g[c] = S::lit(2.0 * weight * d / n);
        }
        loss += spread(x, y);
        g
    });
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("loss".to_string(), weight * loss / n);
    diagnostics.insert("grad_norm".to_string(), grad.norm());
    ScoreResponse {
        pixel_gradient: grad,
        diagnostics,
    }
}

fn l2_with_full_target<S: Scalar>(
    full: &RgbImage<S>,
    weight: f64,
    req: &ScoreRequest<S>,
) -> Result<ScoreResponse<S>, ScoreError> {
    let crop = crop_target(full, req)?;
    Ok(l2_against(
        &req.patch,
        weight,
        |x, y| crop.get(x, y).map(|v| v.as_f64()),
        |_, _| 0.0,
    ))
}

/// Gradient of `weight * |patch - target_crop|^2 / n`, `n` the patch pixel count.
/// The target is resampled bilinearly to the request's full resolution first.
pub fn l2_score<S: Scalar>(spec: &TargetImageSpec<S>, req: &ScoreRequest<S>) -> Result<ScoreResponse<S>, ScoreError> {
    let full = target_at_resolution(spec, req.full_resolution);
    l2_with_full_target(&full, spec.weight, req)
}

/// Gradient of `|patch - color|^2 / n`.
pub fn procedural_score<S: Scalar>(color: [S; 3], req: &ScoreRequest<S>) -> ScoreResponse<S> {
    let c = color.map(|v| v.as_f64());
    l2_against(&req.patch, 1.0, |_, _| c, |_, _| 0.0)
}

/// Sub-pixel sample positions (fractions of a pixel) for one pixel. One sample sits
/// at the pixel center. Otherwise the pixel is split into a `g x g` grid,
/// `g = ceil(sqrt(samples))`, with one jittered sample per cell. Jitter is antithetic
/// across point-mirrored cells, so the sample mean is always the pixel center.
fn subpixel_offsets(samples: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    if samples <= 1 {
        return vec![(0.5, 0.5)];
    }
    let g = (samples as f64).sqrt().ceil() as usize;
    let total = g * g;
    let mut jitter = vec![(0.5, 0.5); total];
    for idx in 0..total {
        let partner = total - 1 - idx;
        if idx < partner {
            jitter[idx] = (rng.random::<f64>(), rng.random::<f64>());
        } else if idx > partner {
            let (jx, jy) = jitter[partner];
            jitter[idx] = (1.0 - jx, 1.0 - jy);
        }
    }
    jitter
        .iter()
        .enumerate()
        .map(|(i, (jx, jy))| (((i % g) as f64 + jx) / g as f64, ((i / g) as f64 + jy) / g as f64))
        .collect()
}

fn supersample_seed(req_step: u64, view: u32, x0: usize, y0: usize) -> u64 {
    req_step
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ u64::from(view).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ ((x0 as u64) << 32 | y0 as u64)
}

/// L2 gradient averaged over jittered sub-pixel target samples, at least
/// `samples_per_pixel` per pixel (rounded up to a square grid). Reduces to [`l2_score`] for one sample. Jitter is seeded from the request,
/// so repeated calls agree.
pub fn supersampled_l2_score<S: Scalar>(
    spec: &TargetImageSpec<S>,
    req: &ScoreRequest<S>,
    samples_per_pixel: usize,
) -> Result<ScoreResponse<S>, ScoreError> {
    let full = target_at_resolution(spec, req.full_resolution);
    supersampled_with_full_target(&full, spec.weight, req, samples_per_pixel)
}

fn supersampled_with_full_target<S: Scalar>(
    full: &RgbImage<S>,
    weight: f64,
    req: &ScoreRequest<S>,
    samples_per_pixel: usize,
) -> Result<ScoreResponse<S>, ScoreError> {
    if samples_per_pixel <= 1 {
        return l2_with_full_target(full, weight, req);
    }
    crop_target(full, req)?;
    let rect = req.patch_rect;
    let mut rng = ChaCha8Rng::seed_from_u64(supersample_seed(req.step, req.view_id, rect.x0, rect.y0));
    let size = rect.size;
    let mut means = Vec::with_capacity(size * size);
    let mut spreads = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let offsets = subpixel_offsets(samples_per_pixel, &mut rng);
            let k = offsets.len() as f64;
            let samples: Vec<[S; 3]> = offsets
                .iter()
                .map(|(ox, oy)| full.sample_bilinear((rect.x0 + x) as f64 + ox, (rect.y0 + y) as f64 + oy))
                .collect();
            let mut mean = [0.0; 3];
            for s in &samples {
                for c in 0..3 {
                    mean[c] += s[c].as_f64();
                }
            }
            mean = mean.map(|m| m / k);
            // mean over samples of (p - t_s)^2 = (p - mean)^2 + var(t_s)
            let var: f64 = samples
                .iter()
                .map(|s| (0..3).map(|c| (s[c].as_f64() - mean[c]).powi(2)).sum::<f64>() / k)
                .sum();
            means.push(mean);
            spreads.push(var);
        }
    }
    Ok(l2_against(&req.patch, weight, |x, y| means[y * size + x], |x, y| spreads[y * size + x]))
}

/// Pixel-wise targets for some views, keyed by view id.
#[derive(Debug, Clone)]
pub struct L2Provider<S> {
    targets: HashMap<u32, TargetImageSpec<S>>,
    samples_per_pixel: usize,
    /// Targets resampled to render resolutions already seen, keyed by `(view, side)`.
    cache: HashMap<(u32, usize), RgbImage<S>>,
}

impl<S: Scalar> L2Provider<S> {
    pub fn new(targets: HashMap<u32, TargetImageSpec<S>>) -> Self {
        Self {
            targets,
            samples_per_pixel: 1,
            cache: HashMap::new(),
        }
    }

    pub fn single(view: u32, spec: TargetImageSpec<S>) -> Self {
        Self::new(HashMap::from([(view, spec)]))
    }

    pub fn with_supersampling(mut self, samples_per_pixel: usize) -> Self {
        self.samples_per_pixel = samples_per_pixel.max(1);
        self
    }

    pub fn has_target(&self, view: u32) -> bool {
        self.targets.contains_key(&view)
    }
}

impl<S: Scalar> ScoreProvider<S> for L2Provider<S> {
    fn score(&mut self, req: &ScoreRequest<S>) -> Result<ScoreResponse<S>, ScoreError> {
        let spec = self
            .targets
            .get(&req.view_id)
            .ok_or_else(|| ScoreError::BadRequest(format!("no L2 target for view {}", req.view_id)))?;
        let full = self
            .cache
            .entry((req.view_id, req.full_resolution))
            .or_insert_with(|| target_at_resolution(spec, req.full_resolution));
        supersampled_with_full_target(full, spec.weight, req, self.samples_per_pixel)
    }

    fn name(&self) -> &str {
        "l2"
    }
}

/// Pulls every patch toward one constant color.
#[derive(Debug, Clone)]
pub struct ProceduralProvider<S> {
    pub color: [S; 3],
}

impl<S: Scalar> ScoreProvider<S> for ProceduralProvider<S> {
    fn score(&mut self, req: &ScoreRequest<S>) -> Result<ScoreResponse<S>, ScoreError> {
        Ok(procedural_score(self.color, req))
    }

    fn name(&self) -> &str {
        "procedural"
    }
}

/// Sends some views to dedicated providers and everything else to a default one.
pub struct RoutedProvider<S> {
    default: Box<dyn ScoreProvider<S>>,
    per_view: HashMap<u32, usize>,
    routes: Vec<Box<dyn ScoreProvider<S>>>,
}

impl<S: Scalar> RoutedProvider<S> {
    pub fn new(default: Box<dyn ScoreProvider<S>>) -> Self {
        Self {
            default,
            per_view: HashMap::new(),
            routes: Vec::new(),
        }
    }

    /// Routes all of `views` to `provider`.
    pub fn route(mut self, views: &[u32], provider: Box<dyn ScoreProvider<S>>) -> Self {
        let idx = self.routes.len();
        self.routes.push(provider);
        for v in views {
            self.per_view.insert(*v, idx);
        }
        self
    }
}

impl<S: Scalar> ScoreProvider<S> for RoutedProvider<S> {
    fn score(&mut self, req: &ScoreRequest<S>) -> Result<ScoreResponse<S>, ScoreError> {
        match self.per_view.get(&req.view_id) {
            Some(&i) => self.routes[i].score(req),
            None => self.default.score(req),
        }
    }

    fn name(&self) -> &str {
        "routed"
    }
}
