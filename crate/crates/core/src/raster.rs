//! Dense RGB images. Used for renders, targets and per-pixel gradients alike.

use crate::scalar::Scalar;

/// Reported PSNR when the error is exactly zero.
pub const PSNR_CAP_DB: f64 = 99.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Image<S> {
    pub width: usize,
    pub height: usize,
    /// Row-major, row 0 at the top.
    pub pixels: Vec<[S; 3]>,
}

/// Image whose channels lie in `[0,1]`.
pub type RgbImage<S> = Image<S>;
/// Per-pixel `dL/dRGB`.
pub type PixelGrad<S> = Image<S>;

impl<S: Scalar> Image<S> {
    pub fn filled(width: usize, height: usize, rgb: [S; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![rgb; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, [S::zero(); 3])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [S; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [S; 3] {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [S; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn is_finite(&self) -> bool {
        self.pixels.iter().flatten().all(|v| v.is_finite())
    }

    pub fn in_unit_range(&self) -> bool {
        self.pixels
            .iter()
            .flatten()
            .all(|v| *v >= S::zero() && *v <= S::one())
    }

    pub fn is_zero(&self) -> bool {
        self.pixels.iter().flatten().all(|v| *v == S::zero())
    }

    /// Sum over pixels and channels of `self * other`, accumulated in f64.
    pub fn dot(&self, other: &Self) -> f64 {
        assert!(self.same_shape(other), "shape mismatch in dot");
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (0..3).map(|c| a[c].as_f64() * b[c].as_f64()).sum::<f64>())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, k: S) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|p| p.map(|v| v * k)).collect(),
        }
    }

    pub fn cast<T: Scalar>(&self) -> Image<T> {
        Image {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .map(|p| p.map(crate::scalar::cast))
                .collect(),
        }
    }

    /// Bilinear sample at continuous pixel coordinates, where pixel `(i, j)` has its
    /// center at `(i + 0.5, j + 0.5)`. Clamps to the edge.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> [S; 3] {
        let fx = (x - 0.5).clamp(0.0, (self.width - 1) as f64);
        let fy = (y - 0.5).clamp(0.0, (self.height - 1) as f64);
        let x0 = (fx.floor() as usize).min(self.width - 1);
        let y0 = (fy.floor() as usize).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let (a, b, c, d) = (self.get(x0, y0), self.get(x1, y0), self.get(x0, y1), self.get(x1, y1));
        let mut out = [S::zero(); 3];
        for ch in 0..3 {
            let top = a[ch].as_f64() * (1.0 - tx) + b[ch].as_f64() * tx;
            let bottom = c[ch].as_f64() * (1.0 - tx) + d[ch].as_f64() * tx;
            out[ch] = S::lit(top * (1.0 - ty) + bottom * ty);
        }
        out
    }

    /// Bilinear resample to a new size; identity when the size already matches.
    pub fn resample_bilinear(&self, width: usize, height: usize) -> Self {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        Self::from_fn(width, height, |x, y| {
            self.sample_bilinear((x as f64 + 0.5) * sx, (y as f64 + 0.5) * sy)
        })
    }
}

/// Mean squared error over pixels where `mask` is true (all pixels when `None`),
/// averaged over channels. `None` when no pixel is selected.
pub fn masked_mse<S: Scalar>(a: &Image<S>, b: &Image<S>, mask: Option<&[bool]>) -> Option<f64> {
    assert!(a.same_shape(b), "shape mismatch in mse");
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, (pa, pb)) in a.pixels.iter().zip(&b.pixels).enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        for c in 0..3 {
            let d = pa[c].as_f64() - pb[c].as_f64();
            sum += d * d;
        }
        count += 1;
    }
    (count > 0).then(|| sum / (3 * count) as f64)
}

/// `10 log10(1 / mse)` for unit-range images, capped at [`PSNR_CAP_DB`].
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
    }
}

pub fn masked_psnr<S: Scalar>(a: &Image<S>, b: &Image<S>, mask: Option<&[bool]>) -> Option<f64> {
    masked_mse(a, b, mask).map(psnr_from_mse)
}
