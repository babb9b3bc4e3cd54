//! Fixed-size square crops of larger renders and the adjoint scatter of their gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Image, PixelGrad};
use crate::scalar::Scalar;

pub const DEFAULT_PATCH_SIZE: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PatchError {
    #[error("image {width}x{height} smaller than patch {size}")]
    ImageTooSmall { width: usize, height: usize, size: usize },
    #[error("patch at ({x0},{y0}) size {size} leaves {width}x{height} image")]
    OutOfBounds {
        x0: usize,
        y0: usize,
        size: usize,
        width: usize,
        height: usize,
    },
    #[error("patch gradient is {got_w}x{got_h}, patch is {size}x{size}")]
    ShapeMismatch { got_w: usize, got_h: usize, size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchRect {
    pub x0: usize,
    pub y0: usize,
    pub size: usize,
}

impl PatchRect {
    pub fn full(size: usize) -> Self {
        Self { x0: 0, y0: 0, size }
    }

    pub fn check(&self, width: usize, height: usize) -> Result<(), PatchError> {
        if self.x0 + self.size > width || self.y0 + self.size > height {
            return Err(PatchError::OutOfBounds {
                x0: self.x0,
                y0: self.y0,
                size: self.size,
                width,
                height,
            });
        }
        Ok(())
    }
}

/// Offsets uniform over `0..=img_w - size` and `0..=img_h - size`.
pub fn sample_patch<R: Rng + ?Sized>(
    img_w: usize,
    img_h: usize,
    patch_size: usize,
    rng: &mut R,
) -> Result<PatchRect, PatchError> {
    if img_w < patch_size || img_h < patch_size || patch_size == 0 {
        return Err(PatchError::ImageTooSmall {
            width: img_w,
            height: img_h,
            size: patch_size,
        });
    }
    Ok(PatchRect {
        x0: rng.random_range(0..=img_w - patch_size),
        y0: rng.random_range(0..=img_h - patch_size),
        size: patch_size,
    })
}

/// Exact pixel copy of the patch.
pub fn extract<S: Scalar>(img: &Image<S>, rect: &PatchRect) -> Result<Image<S>, PatchError> {
    rect.check(img.width, img.height)?;
    Ok(Image::from_fn(rect.size, rect.size, |x, y| img.get(rect.x0 + x, rect.y0 + y)))
}

/// Adjoint of [`extract`]: the patch gradient placed at `rect`, zeros elsewhere.
pub fn scatter_gradient<S: Scalar>(
    full_w: usize,
    full_h: usize,
    rect: &PatchRect,
    patch_grad: &PixelGrad<S>,
) -> Result<PixelGrad<S>, PatchError> {
    if patch_grad.width != rect.size || patch_grad.height != rect.size {
        return Err(PatchError::ShapeMismatch {
            got_w: patch_grad.width,
            got_h: patch_grad.height,
            size: rect.size,
        });
    }
    rect.check(full_w, full_h)?;
    let mut out = Image::zeros(full_w, full_h);
    for y in 0..rect.size {
        for x in 0..rect.size {
            out.set(rect.x0 + x, rect.y0 + y, patch_grad.get(x, y));
        }
    }
    Ok(out)
}
