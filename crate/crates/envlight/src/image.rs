//! Dense float image buffers used for frames, shading maps and masks.

use crate::error::{Error, Result};
use crate::linalg::Vec3;

/// Row-major float image with an arbitrary channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Image {
        Image {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Image> {
        if data.len() != width * height * channels {
            return Err(Error::contract(format!(
                "image data length {} does not match {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, channels: usize, value: f32) -> Image {
        Image {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = self.index(x, y);
        &mut self.data[i..i + self.channels]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.width, self.height, self.channels)
    }

    /// Sum of all samples, accumulated in f64.
    pub fn total(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().cloned().fold(f32::NEG_INFINITY, f32::max)
    }

    /// Area-average downsample to `(out_w, out_h)`. Source dimensions must be
    /// integer multiples of the target dimensions.
    pub fn downsample_area(&self, out_w: usize, out_h: usize) -> Result<Image> {
        if out_w == 0 || out_h == 0 || self.width % out_w != 0 || self.height % out_h != 0 {
            return Err(Error::contract(format!(
                "cannot area-downsample {}x{} to {}x{}",
                self.width, self.height, out_w, out_h
            )));
        }
        let bx = self.width / out_w;
        let by = self.height / out_h;
        let inv = 1.0 / (bx * by) as f64;
        let mut out = Image::new(out_w, out_h, self.channels);
        for oy in 0..out_h {
            for ox in 0..out_w {
                for c in 0..self.channels {
                    let mut acc = 0.0f64;
                    for sy in 0..by {
                        for sx in 0..bx {
                            acc += self.pixel(ox * bx + sx, oy * by + sy)[c] as f64;
                        }
                    }
                    out.pixel_mut(ox, oy)[c] = (acc * inv) as f32;
                }
            }
        }
        Ok(out)
    }
}

/// Per-pixel unit normals in camera space with a validity mask.
#[derive(Debug, Clone)]
pub struct NormalMap {
    pub width: usize,
    pub height: usize,
    pub normals: Vec<[f32; 3]>,
    pub valid: Vec<bool>,
}

impl NormalMap {
    pub fn new(width: usize, height: usize) -> NormalMap {
        NormalMap {
            width,
            height,
            normals: vec![[0.0; 3]; width * height],
            valid: vec![false; width * height],
        }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn set(&mut self, x: usize, y: usize, n: Vec3) {
        let i = self.index(x, y);
        self.normals[i] = [n.x as f32, n.y as f32, n.z as f32];
        self.valid[i] = true;
    }

    pub fn get(&self, x: usize, y: usize) -> Option<Vec3> {
        let i = self.index(x, y);
        if self.valid[i] {
            let n = self.normals[i];
            Some(Vec3::new(n[0] as f64, n[1] as f64, n[2] as f64))
        } else {
            None
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsample_preserves_mean() {
        let mut img = Image::new(8, 8, 1);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = i as f32;
        }
        let mean_before = img.total() / 64.0;
        let small = img.downsample_area(2, 2).unwrap();
        let mean_after = small.total() / 4.0;
        assert!((mean_before - mean_after).abs() < 1e-4);
    }

    #[test]
    fn downsample_rejects_non_divisible() {
        let img = Image::new(10, 10, 1);
        assert!(img.downsample_area(3, 3).is_err());
    }
}
