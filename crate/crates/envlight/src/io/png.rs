//! LDR image export/import with gamma conversion, for previews and figures.

use crate::error::{Error, Result};
use crate::image::Image;
use std::path::Path;

pub const DEFAULT_GAMMA: f64 = 2.2;

/// Write a linear RGB image as an 8-bit PNG, applying gamma and clamping to
/// [0, 1].
pub fn write_png(path: impl AsRef<Path>, img: &Image, gamma: f64) -> Result<()> {
    let path = path.as_ref();
    if img.channels != 3 {
        return Err(Error::contract("PNG export expects a 3-channel image"));
    }
    if gamma <= 0.0 {
        return Err(Error::contract("gamma must be positive"));
    }
    let inv = 1.0 / gamma;
    let mut bytes = Vec::with_capacity(img.data.len());
    for &v in &img.data {
        let lin = (v as f64).clamp(0.0, 1.0);
        bytes.push((255.0 * lin.powf(inv)).round() as u8);
    }
    let buf: image::RgbImage =
        image::ImageBuffer::from_vec(img.width as u32, img.height as u32, bytes)
            .expect("buffer length matches dimensions");
    buf.save(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}

/// Read an 8-bit PNG into linear RGB.
pub fn read_png(path: impl AsRef<Path>, gamma: f64) -> Result<Image> {
    let path = path.as_ref();
    if gamma <= 0.0 {
        return Err(Error::contract("gamma must be positive"));
    }
    let decoded = image::open(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let data = rgb
        .into_raw()
        .into_iter()
        .map(|b| ((b as f64 / 255.0).powf(gamma)) as f32)
        .collect();
    Image::from_data(w, h, 3, data)
}
