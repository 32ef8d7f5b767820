//! Depth-image processing: bilateral filtering, unprojection, normal
//! estimation, mirror reflection, and ray-marched visibility against the
//! depth-derived surface. Everything works in camera space: x right, y down,
//! z forward, depth = z in meters, depth 0 = invalid.

use crate::error::{Error, Result};
use crate::image::NormalMap;
use crate::linalg::Vec3;
use crate::radiometry::Direction;
use serde::{Deserialize, Serialize};

/// Pinhole camera intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn validate(&self) -> Result<()> {
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::contract("focal lengths must be positive"));
        }
        if self.cx < 0.0
            || self.cx >= self.width as f64
            || self.cy < 0.0
            || self.cy >= self.height as f64
        {
            return Err(Error::contract("principal point outside the image"));
        }
        Ok(())
    }

    /// Intrinsics for a square image with the given horizontal field of view.
    pub fn from_fov(resolution: usize, fov_radians: f64) -> Intrinsics {
        let f = resolution as f64 / (2.0 * (fov_radians / 2.0).tan());
        Intrinsics {
            fx: f,
            fy: f,
            cx: (resolution as f64 - 1.0) / 2.0,
            cy: (resolution as f64 - 1.0) / 2.0,
            width: resolution,
            height: resolution,
        }
    }

    /// Camera-space ray direction through pixel center (u, v), unnormalized z = 1.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Project a camera-space point to pixel coordinates.
    pub fn project(&self, p: Vec3) -> (f64, f64) {
        (
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        )
    }
}

/// Metric depth image. Zero marks invalid measurements.
#[derive(Debug, Clone)]
pub struct DepthFrame {
    pub intrinsics: Intrinsics,
    pub depth: Vec<f32>,
}

impl DepthFrame {
    pub fn new(intrinsics: Intrinsics, depth: Vec<f32>) -> Result<DepthFrame> {
        intrinsics.validate()?;
        if depth.len() != intrinsics.width * intrinsics.height {
            return Err(Error::contract(format!(
                "depth buffer length {} does not match {}x{}",
                depth.len(),
                intrinsics.width,
                intrinsics.height
            )));
        }
        for (i, &d) in depth.iter().enumerate() {
            if !d.is_finite() || d < 0.0 {
                return Err(Error::NonFinite {
                    value: d,
                    index: i,
                    context: "depth (must be finite and >= 0)".into(),
                });
            }
        }
        Ok(DepthFrame { intrinsics, depth })
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> f32 {
        self.depth[v * self.intrinsics.width + u]
    }

    #[inline]
    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.at(u, v) > 0.0
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    /// Smallest valid depth, or None when the frame is empty.
    pub fn min_valid_depth(&self) -> Option<f64> {
        self.depth
            .iter()
            .filter(|&&d| d > 0.0)
            .map(|&d| d as f64)
            .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.min(d))))
    }

    /// Bilinear depth at continuous pixel coordinates, ignoring invalid taps.
    /// Returns None if all contributing taps are invalid.
    pub fn interp_depth(&self, u: f64, v: f64) -> Option<f64> {
        self.interp_depth_spread(u, v).map(|(d, _)| d)
    }

    /// Bilinear depth plus the spread (max - min) of the contributing taps.
    /// A large spread marks a depth discontinuity, where the blended value
    /// belongs to no real surface.
    pub fn interp_depth_spread(&self, u: f64, v: f64) -> Option<(f64, f64)> {
        let w = self.width() as isize;
        let h = self.height() as isize;
        let x0 = u.floor() as isize;
        let y0 = v.floor() as isize;
        let fx = u - x0 as f64;
        let fy = v - y0 as f64;
        let mut acc = 0.0f64;
        let mut wacc = 0.0f64;
        let mut min_tap = f64::MAX;
        let mut max_tap = f64::MIN;
        for (dx, dy, wgt) in [
            (0, 0, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ] {
            let x = x0 + dx;
            let y = y0 + dy;
            if x < 0 || y < 0 || x >= w || y >= h {
                continue;
            }
            let d = self.at(x as usize, y as usize);
            if d > 0.0 {
                acc += d as f64 * wgt;
                wacc += wgt;
                min_tap = min_tap.min(d as f64);
                max_tap = max_tap.max(d as f64);
            }
        }
        if wacc <= 1e-9 {
            return None;
        }
        Some((acc / wacc, max_tap - min_tap))
    }
}

/// Edge-preserving depth smoothing. Invalid pixels are excluded from kernels
/// and remain invalid.
pub fn bilateral_depth(frame: &DepthFrame, sigma_space: f64, sigma_range: f64) -> Result<DepthFrame> {
    if sigma_space <= 0.0 || sigma_range <= 0.0 {
        return Err(Error::contract("bilateral sigmas must be positive"));
    }
    let radius = (2.5 * sigma_space).ceil().max(1.0) as isize;
    let inv_2ss = 1.0 / (2.0 * sigma_space * sigma_space);
    let inv_2sr = 1.0 / (2.0 * sigma_range * sigma_range);
    let w = frame.width() as isize;
    let h = frame.height() as isize;
    let span = (2 * radius + 1) as usize;
    let spatial: Vec<f64> = (0..span * span)
        .map(|i| {
            let dx = (i % span) as isize - radius;
            let dy = (i / span) as isize - radius;
            (-((dx * dx + dy * dy) as f64) * inv_2ss).exp()
        })
        .collect();

    use rayon::prelude::*;
    let out: Vec<f32> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            let frame = &frame;
            let spatial = &spatial;
            (0..w).map(move |x| {
                let center = frame.at(x as usize, y as usize);
                if center <= 0.0 {
                    return 0.0f32;
                }
                let mut acc = 0.0f64;
                let mut wacc = 0.0f64;
                for dy in -radius..=radius {
                    let yy = y + dy;
                    if yy < 0 || yy >= h {
                        continue;
                    }
                    for dx in -radius..=radius {
                        let xx = x + dx;
                        if xx < 0 || xx >= w {
                            continue;
                        }
                        let d = frame.at(xx as usize, yy as usize);
                        if d <= 0.0 {
                            continue;
                        }
                        let sw = spatial[(dy + radius) as usize * span + (dx + radius) as usize];
                        let dr = d as f64 - center as f64;
                        let wgt = sw * (-dr * dr * inv_2sr).exp();
                        acc += wgt * d as f64;
                        wacc += wgt;
                    }
                }
                (acc / wacc) as f32
            })
        })
        .collect();
    DepthFrame::new(frame.intrinsics, out)
}

/// Camera-space 3D point of a valid depth pixel.
pub fn unproject(u: usize, v: usize, frame: &DepthFrame) -> Result<Vec3> {
    if u >= frame.width() || v >= frame.height() {
        return Err(Error::contract(format!(
            "pixel ({u}, {v}) outside {}x{}",
            frame.width(),
            frame.height()
        )));
    }
    let d = frame.at(u, v) as f64;
    if d <= 0.0 {
        return Err(Error::contract(format!("invalid depth at ({u}, {v})")));
    }
    Ok(frame.intrinsics.ray(u as f64, v as f64) * d)
}

/// Normal estimation from central differences of unprojected points,
/// oriented toward the camera. Border pixels and pixels with invalid
/// neighbors are marked invalid.
pub fn normals_from_depth(frame: &DepthFrame) -> NormalMap {
    let w = frame.width();
    let h = frame.height();
    let mut map = NormalMap::new(w, h);
    for v in 1..h.saturating_sub(1) {
        for u in 1..w.saturating_sub(1) {
            if !frame.is_valid(u, v)
                || !frame.is_valid(u - 1, v)
                || !frame.is_valid(u + 1, v)
                || !frame.is_valid(u, v - 1)
                || !frame.is_valid(u, v + 1)
            {
                continue;
            }
            let px0 = unproject(u - 1, v, frame).unwrap();
            let px1 = unproject(u + 1, v, frame).unwrap();
            let py0 = unproject(u, v - 1, frame).unwrap();
            let py1 = unproject(u, v + 1, frame).unwrap();
            let n = (px1 - px0).cross(py1 - py0);
            let norm = n.norm();
            if norm < 1e-12 {
                continue;
            }
            let mut n = n * (1.0 / norm);
            let p = unproject(u, v, frame).unwrap();
            // Orient toward the camera: n . (-p) > 0.
            if n.dot(p) > 0.0 {
                n = -n;
            }
            map.set(u, v, n);
        }
    }
    map
}

/// Mirror direction of `view` about `n`: o = 2 (n.v) n - v.
/// Both the incident and reflected directions point away from the surface.
pub fn mirror_direction(n: Direction, view: Direction) -> Result<Direction> {
    let ndotv = n.dot(view);
    if ndotv <= 0.0 {
        return Err(Error::BackFacing { ndotv });
    }
    let o = n.vec() * (2.0 * ndotv) - view.vec();
    Ok(Direction::from_unit(o.normalized()))
}

/// Initial image-space march step, pixels.
pub const MARCH_STEP_PX: f64 = 0.5;
/// Per-step growth of the march step. Shadow contacts need fine sampling near
/// the ray origin; far from it the surface features span many pixels and the
/// step can widen without missing occluders.
pub const MARCH_STEP_GROWTH: f64 = 1.04;
/// Upper bound on the image-space march step, pixels.
pub const MARCH_MAX_STEP_PX: f64 = 3.0;
/// Offset along the normal applied to the ray origin, meters.
pub const MARCH_EPS_OFFSET: f64 = 1e-3;
/// Depth-comparison bias, meters.
pub const MARCH_DEPTH_BIAS: f64 = 1e-3;
/// Largest depth spread (meters) across the interpolation taps for a sample
/// to count as a smooth surface. Occlusion is only decided on smooth samples;
/// blended depths straddling a silhouette are ambiguous and skipped.
pub const MARCH_SMOOTH_SPREAD: f64 = 0.05;

/// Reusable visibility context for one depth frame. Precomputes the frame's
/// minimum depth so rays that move in front of everything can exit early.
pub struct ShadowMarcher<'a> {
    frame: &'a DepthFrame,
    min_depth: f64,
}

impl<'a> ShadowMarcher<'a> {
    pub fn new(frame: &'a DepthFrame) -> ShadowMarcher<'a> {
        ShadowMarcher {
            frame,
            min_depth: frame.min_valid_depth().unwrap_or(0.0),
        }
    }

    /// 1 if a ray from the surface point at (u, v) toward `l` (camera space)
    /// escapes the depth-derived surface, 0 if occluded.
    pub fn visible(&self, u: usize, v: usize, l: Direction) -> Result<u8> {
        let frame = self.frame;
        if u >= frame.width() || v >= frame.height() || !frame.is_valid(u, v) {
            return Err(Error::contract(format!(
                "visibility query at invalid pixel ({u}, {v})"
            )));
        }
        let p = unproject(u, v, frame)?;
        // Offset along the local normal when it exists, else toward the camera.
        let offset_dir = local_normal(frame, u, v).unwrap_or_else(|| (-p).normalized());
        let origin = p + offset_dir * MARCH_EPS_OFFSET;
        Ok(self.march(origin, l.vec()))
    }

    fn march(&self, origin: Vec3, l: Vec3) -> u8 {
        let frame = self.frame;
        let intr = &frame.intrinsics;
        let w = frame.width() as f64;
        let h = frame.height() as f64;
        let diag = (w * w + h * h).sqrt();
        let max_steps = (diag / MARCH_STEP_PX) as usize * 2 + 16;

        let mut t = 0.0f64;
        let mut step_px = MARCH_STEP_PX;
        for _ in 0..max_steps {
            // Image-space velocity at the current point decides the step in t.
            let x = origin + l * t;
            if x.z <= 1e-6 {
                // Crossed the camera plane; nothing in the frame is in front.
                return 1;
            }
            let inv_z = 1.0 / x.z;
            let du = (intr.fx * (l.x - x.x * inv_z * l.z)) * inv_z;
            let dv = (intr.fy * (l.y - x.y * inv_z * l.z)) * inv_z;
            let speed = (du * du + dv * dv).sqrt();
            let dt = if speed > 1e-9 {
                step_px / speed
            } else {
                // Ray is aligned with the view ray; depth changes but the
                // pixel does not. Step in depth instead.
                0.05 * x.z / l.z.abs().max(1e-6)
            };
            step_px = (step_px * MARCH_STEP_GROWTH).min(MARCH_MAX_STEP_PX);
            t += dt;
            let x = origin + l * t;
            if x.z <= 1e-6 {
                return 1;
            }
            if x.z < self.min_depth - MARCH_DEPTH_BIAS && l.z <= 0.0 {
                // In front of everything and moving toward the camera.
                return 1;
            }
            let (pu, pv) = intr.project(x);
            if pu < 0.0 || pv < 0.0 || pu > w - 1.0 || pv > h - 1.0 {
                // Rays leaving the image count as unoccluded.
                return 1;
            }
            if let Some((scene_z, spread)) = frame.interp_depth_spread(pu, pv) {
                let behind = x.z - scene_z;
                if spread <= MARCH_SMOOTH_SPREAD && behind > MARCH_DEPTH_BIAS {
                    return 0;
                }
            }
        }
        1
    }
}

fn local_normal(frame: &DepthFrame, u: usize, v: usize) -> Option<Vec3> {
    if u == 0 || v == 0 || u + 1 >= frame.width() || v + 1 >= frame.height() {
        return None;
    }
    for (uu, vv) in [(u - 1, v), (u + 1, v), (u, v - 1), (u, v + 1)] {
        if !frame.is_valid(uu, vv) {
            return None;
        }
    }
    let px0 = unproject(u - 1, v, frame).ok()?;
    let px1 = unproject(u + 1, v, frame).ok()?;
    let py0 = unproject(u, v - 1, frame).ok()?;
    let py1 = unproject(u, v + 1, frame).ok()?;
    let n = (px1 - px0).cross(py1 - py0);
    if n.norm() < 1e-12 {
        return None;
    }
    let mut n = n.normalized();
    let p = unproject(u, v, frame).ok()?;
    if n.dot(p) > 0.0 {
        n = -n;
    }
    Some(n)
}

/// One-off visibility query. For batch work build a [`ShadowMarcher`] once.
pub fn visibility(u: usize, v: usize, l: Direction, frame: &DepthFrame) -> Result<u8> {
    ShadowMarcher::new(frame).visible(u, v, l)
}
