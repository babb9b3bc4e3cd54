//! 8-bit PNG at the file boundary, unit-range floats inside.

use std::path::Path;

use illusion_core::Image32;

use crate::CliError;

pub fn load_png(path: &Path) -> Result<Image32, CliError> {
    let img = image::open(path)
        .map_err(|e| CliError::Image(format!("{}: {e}", path.display())))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    Ok(Image32::from_fn(w as usize, h as usize, |x, y| {
        img.get_pixel(x as u32, y as u32).0.map(|c| c as f32 / 255.0)
    }))
}

pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn save_png(path: &Path, img: &Image32) -> Result<(), CliError> {
    let buf = image::RgbImage::from_fn(img.width as u32, img.height as u32, |x, y| {
        image::Rgb(img.get(x as usize, y as usize).map(quantize))
    });
    buf.save(path).map_err(|e| CliError::Image(format!("{}: {e}", path.display())))
}
