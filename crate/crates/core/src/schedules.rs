//! Training-time schedules: camera jitter magnitude and perturbation, render
//! resolution, and diffusion timestep annealing.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::CameraPose;
use crate::scalar::Scalar;

/// Steepness of the logistic ramp `1 / (1 + exp(-10 (k / k_total - 0.5)))`.
pub const SIGMOID_STEEPNESS: f64 = 10.0;
pub const SIGMOID_MIDPOINT: f64 = 0.5;

/// Jittered fields of view are clamped to this range, degrees.
pub const FOV_CLAMP_DEG: (f64, f64) = (1.0, 179.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("step {k} outside [0, {k_total}]")]
    StepOutOfRange { k: u64, k_total: u64 },
    #[error("invalid schedule: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampMode {
    #[default]
    Linear,
    Sigmoid,
}

/// Camera jitter settings. Rotation and fov deviations are in degrees, translation
/// in scene units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JitterConfig {
    pub c_max: f64,
    pub sigma_rotation: f64,
    pub sigma_translation: f64,
    pub sigma_fov: f64,
    pub mode: RampMode,
}

impl Default for JitterConfig {
    fn default() -> Self {
        Self {
            c_max: 0.3,
            sigma_rotation: 1.0,
            sigma_translation: 1.0,
            sigma_fov: 1.0,
            mode: RampMode::Linear,
        }
    }
}

impl JitterConfig {
    pub fn disabled() -> Self {
        Self {
            c_max: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        let all = [self.c_max, self.sigma_rotation, self.sigma_translation, self.sigma_fov];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ScheduleError::Invalid(
                "jitter c_max and sigmas must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolutionSchedule {
    /// Initial render side length, pixels.
    pub a: u32,
    /// Final render side length, pixels.
    pub b: u32,
    pub mode: RampMode,
}

impl Default for ResolutionSchedule {
    fn default() -> Self {
        Self {
            a: 512,
            b: 1024,
            mode: RampMode::Sigmoid,
        }
    }
}

impl ResolutionSchedule {
    pub fn fixed(side: u32) -> Self {
        Self {
            a: side,
            b: side,
            mode: RampMode::Linear,
        }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.a < 64 || self.b < 64 {
            return Err(ScheduleError::Invalid(format!(
                "resolutions must be >= 64, got a={} b={}",
                self.a, self.b
            )));
        }
        if self.a > self.b {
            return Err(ScheduleError::Invalid(format!("a={} exceeds b={}", self.a, self.b)));
        }
        if !self.a.is_multiple_of(8) || !self.b.is_multiple_of(8) {
            return Err(ScheduleError::Invalid(format!(
                "a={} and b={} must be multiples of 8",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimestepSchedule {
    pub range_early: (f64, f64),
    pub range_late: (f64, f64),
    /// First step (counted from 0) that samples from `range_late`.
    pub anneal_step: u64,
}

impl Default for TimestepSchedule {
    fn default() -> Self {
        Self {
            range_early: (0.02, 0.98),
            range_late: (0.02, 0.5),
            anneal_step: 1000,
        }
    }
}

impl TimestepSchedule {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        for (lo, hi) in [self.range_early, self.range_late] {
            if !(0.0 < lo && lo < hi && hi < 1.0) {
                return Err(ScheduleError::Invalid(format!(
                    "timestep range ({lo}, {hi}) must satisfy 0 < lo < hi < 1"
                )));
            }
        }
        Ok(())
    }

    pub fn range_at(&self, k: u64) -> (f64, f64) {
        if k < self.anneal_step {
            self.range_early
        } else {
            self.range_late
        }
    }
}

fn check_step(k: u64, k_total: u64) -> Result<f64, ScheduleError> {
    if k_total == 0 || k > k_total {
        return Err(ScheduleError::StepOutOfRange { k, k_total });
    }
    Ok(k as f64 / k_total as f64)
}

/// The raw logistic ramp at training fraction `x`.
pub fn sigmoid_ramp(x: f64) -> f64 {
    1.0 / (1.0 + (-SIGMOID_STEEPNESS * (x - SIGMOID_MIDPOINT)).exp())
}

/// Jitter magnitude `C(k)`.
///
/// Linear: `C_max * k / k_total`. Sigmoid: the logistic ramp rescaled so that it
/// starts at exactly 0 and ends at exactly `C_max`.
pub fn jitter_scale(k: u64, k_total: u64, cfg: &JitterConfig) -> Result<f64, ScheduleError> {
    let x = check_step(k, k_total)?;
    let ramp = match cfg.mode {
        RampMode::Linear => x,
        RampMode::Sigmoid => {
            let (lo, hi) = (sigmoid_ramp(0.0), sigmoid_ramp(1.0));
            ((sigmoid_ramp(x) - lo) / (hi - lo)).clamp(0.0, 1.0)
        }
    };
    Ok(cfg.c_max * ramp)
}

fn gaussian<R: Rng + ?Sized>(std: f64, rng: &mut R) -> f64 {
    Normal::new(0.0, std).expect("finite non-negative std").sample(rng)
}

/// Adds independent `N(0, scale * sigma)` noise to each Euler angle, translation
/// component and the fov, then clamps the fov.
pub fn jitter_camera<S: Scalar, R: Rng + ?Sized>(
    base: &CameraPose<S>,
    scale: f64,
    cfg: &JitterConfig,
    rng: &mut R,
) -> CameraPose<S> {
    let scale = scale.max(0.0);
    let rot_std = (scale * cfg.sigma_rotation).to_radians();
    let trans_std = scale * cfg.sigma_translation;
    let fov_std = scale * cfg.sigma_fov;
    let rotation = base.rotation.map(|a| S::lit(a.as_f64() + gaussian(rot_std, rng)));
    let translation = base.translation.map(|t| S::lit(t.as_f64() + gaussian(trans_std, rng)));
    let fov = (base.fov.as_f64() + gaussian(fov_std, rng)).clamp(FOV_CLAMP_DEG.0, FOV_CLAMP_DEG.1);
    CameraPose {
        rotation,
        translation,
        fov: S::lit(fov),
    }
}

/// Render side length `R(k)`, rounded to the nearest multiple of 8 and clamped to `[a, b]`.
pub fn render_resolution(k: u64, k_total: u64, sched: &ResolutionSchedule) -> Result<u32, ScheduleError> {
    let x = check_step(k, k_total)?;
    let ramp = match sched.mode {
        RampMode::Linear => x,
        RampMode::Sigmoid => sigmoid_ramp(x),
    };
    let (a, b) = (f64::from(sched.a), f64::from(sched.b));
    let raw = a + ramp * (b - a);
    let rounded = ((raw / 8.0).round() * 8.0) as u32;
    Ok(rounded.clamp(sched.a, sched.b))
}

/// Diffusion timestep `t ~ U(range)` for step `k`.
pub fn sample_timestep<R: Rng + ?Sized>(k: u64, sched: &TimestepSchedule, rng: &mut R) -> f64 {
    let (lo, hi) = sched.range_at(k);
    rng.random_range(lo..=hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn jitter_endpoints_and_midpoint() {
        let cfg = JitterConfig::default();
        assert_eq!(jitter_scale(0, 2000, &cfg).unwrap(), 0.0);
        assert_eq!(jitter_scale(2000, 2000, &cfg).unwrap(), 0.3);
        assert!((jitter_scale(1000, 2000, &cfg).unwrap() - 0.15).abs() < 1e-15);
        let sig = JitterConfig {
            mode: RampMode::Sigmoid,
            ..cfg
        };
        assert_eq!(jitter_scale(0, 2000, &sig).unwrap(), 0.0);
        assert_eq!(jitter_scale(2000, 2000, &sig).unwrap(), 0.3);
        assert!((jitter_scale(1000, 2000, &sig).unwrap() - 0.15).abs() < 1e-12);
        assert!(jitter_scale(2001, 2000, &cfg).is_err());
        assert!(jitter_scale(0, 0, &cfg).is_err());
    }

    #[test]
    fn resolution_examples() {
        let s = ResolutionSchedule::default();
        assert_eq!(render_resolution(1000, 2000, &s).unwrap(), 768);
        // raw 512 + 512 / (1 + e^5) = 515.43 rounds to 512
        let raw = 512.0 + 512.0 / (1.0 + 5f64.exp());
        assert!((raw - 515.43).abs() < 0.01);
        assert_eq!(render_resolution(0, 2000, &s).unwrap(), 512);
        assert_eq!(render_resolution(2000, 2000, &s).unwrap(), 1024);
        let lin = ResolutionSchedule {
            mode: RampMode::Linear,
            ..s
        };
        assert_eq!(render_resolution(2000, 2000, &lin).unwrap(), 1024);
        assert_eq!(render_resolution(0, 2000, &lin).unwrap(), 512);
        assert!(render_resolution(3, 2, &s).is_err());
    }

    #[test]
    fn schedule_validation() {
        assert!(ResolutionSchedule { a: 1024, b: 512, mode: RampMode::Linear }.validate().is_err());
        assert!(ResolutionSchedule { a: 32, b: 512, mode: RampMode::Linear }.validate().is_err());
        assert!(ResolutionSchedule { a: 100, b: 512, mode: RampMode::Linear }.validate().is_err());
        assert!(ResolutionSchedule::default().validate().is_ok());
        let bad = TimestepSchedule {
            range_late: (0.6, 0.5),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(JitterConfig { c_max: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn zero_scale_is_identity_and_seeded_draws_repeat() {
        let base = CameraPose::orbit(Vec3::<f32>::zero(), 10.0, 0.4, 0.2, 40.0);
        let cfg = JitterConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(jitter_camera(&base, 0.0, &cfg, &mut rng), base);
        let a = jitter_camera(&base, 0.3, &cfg, &mut ChaCha8Rng::seed_from_u64(11));
        let b = jitter_camera(&base, 0.3, &cfg, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
        assert_ne!(a, base);
    }

    #[test]
    fn timestep_boundary() {
        let s = TimestepSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(s.range_at(999), (0.02, 0.98));
        assert_eq!(s.range_at(1000), (0.02, 0.5));
        for _ in 0..1000 {
            let t = sample_timestep(1000, &s, &mut rng);
            assert!((0.02..=0.5).contains(&t));
        }
    }
}
