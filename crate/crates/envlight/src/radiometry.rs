//! Spherical-domain representations shared by the whole pipeline: equirectangular
//! radiance maps, the cube grid of sampled light directions, and the conversions
//! between image coordinates and directions.
//!
//! Conventions, used everywhere in this crate:
//! - World up axis is +Z.
//! - Azimuth phi is measured from +X toward +Y, phi = 2*pi*(u+0.5)/width.
//! - Polar angle theta is measured from +Z, theta = pi*(v+0.5)/height.
//! - d = (sin(theta)cos(phi), sin(theta)sin(phi), cos(theta)).

use crate::error::{Error, Result};
use crate::image::Image;
use crate::linalg::{Rot3, Vec3};
use std::f64::consts::PI;

const TAU: f64 = 2.0 * PI;

/// Unit-length 3D direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction(Vec3);

impl Direction {
    /// Wraps a vector, normalizing it. Errors on zero-length input.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Direction> {
        let v = Vec3::new(x, y, z);
        let n = v.norm();
        if n < 1e-12 || !n.is_finite() {
            return Err(Error::contract("direction must be a nonzero finite vector"));
        }
        Ok(Direction(v * (1.0 / n)))
    }

    /// Wraps a vector that is already unit length (debug-checked).
    pub fn from_unit(v: Vec3) -> Direction {
        debug_assert!((v.norm() - 1.0).abs() < 1e-6);
        Direction(v)
    }

    pub fn vec(self) -> Vec3 {
        self.0
    }

    pub fn x(self) -> f64 {
        self.0.x
    }
    pub fn y(self) -> f64 {
        self.0.y
    }
    pub fn z(self) -> f64 {
        self.0.z
    }

    pub fn dot(self, o: Direction) -> f64 {
        self.0.dot(o.0)
    }

    /// Angle between two directions, radians.
    pub fn angle_to(self, o: Direction) -> f64 {
        self.dot(o).clamp(-1.0, 1.0).acos()
    }

    pub fn rotated(self, r: &Rot3) -> Direction {
        Direction(r.apply(self.0).normalized())
    }
}

/// HDR radiance over the sphere in equirectangular layout, linear RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct LatLongMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl LatLongMap {
    pub const CHANNELS: usize = 3;

    /// All-zero map. `width` must equal `2 * height`.
    pub fn zeros(width: usize, height: usize) -> Result<LatLongMap> {
        Self::from_data(width, height, vec![0.0; width * height * Self::CHANNELS])
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Result<LatLongMap> {
        Self::from_data(width, height, vec![value; width * height * Self::CHANNELS])
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f32>) -> Result<LatLongMap> {
        if height == 0 || width != 2 * height {
            return Err(Error::contract(format!(
                "lat-long map must be 2:1, got {}x{}",
                width, height
            )));
        }
        if data.len() != width * height * Self::CHANNELS {
            return Err(Error::contract(format!(
                "lat-long data length {} does not match {}x{}x3",
                data.len(),
                width,
                height
            )));
        }
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NonFinite {
                    value: v,
                    index: i,
                    context: "lat-long radiance (must be finite and >= 0)".into(),
                });
            }
        }
        Ok(LatLongMap {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * Self::CHANNELS
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = self.index(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = self.index(x, y);
        self.data[i] = rgb[0];
        self.data[i + 1] = rgb[1];
        self.data[i + 2] = rgb[2];
    }

    /// Direction at the center of pixel (x, y).
    pub fn pixel_dir(&self, x: usize, y: usize) -> Direction {
        latlong_to_dir(x as f64, y as f64, self.width, self.height)
            .expect("pixel indices are in range")
    }

    /// Nearest-texel radiance lookup for a direction.
    pub fn sample_nearest(&self, d: Direction) -> [f32; 3] {
        let (u, v) = dir_to_latlong(d, self.width, self.height);
        let (x, y) = containing_bin(u, v, self.width, self.height);
        self.pixel(x, y)
    }

    /// Bilinear radiance lookup with horizontal wrap and vertical clamp.
    pub fn sample_bilinear(&self, d: Direction) -> [f32; 3] {
        let (u, v) = dir_to_latlong(d, self.width, self.height);
        self.sample_bilinear_uv(u, v)
    }

    fn sample_bilinear_uv(&self, u: f64, v: f64) -> [f32; 3] {
        let w = self.width as isize;
        let x0 = u.floor() as isize;
        let fx = u - x0 as f64;
        let y0f = v.floor();
        let fy = v - y0f;
        let y0 = (y0f as isize).clamp(0, self.height as isize - 1) as usize;
        let y1 = (y0f as isize + 1).clamp(0, self.height as isize - 1) as usize;
        let xa = x0.rem_euclid(w) as usize;
        let xb = (x0 + 1).rem_euclid(w) as usize;
        let mut out = [0.0f32; 3];
        let p00 = self.pixel(xa, y0);
        let p10 = self.pixel(xb, y0);
        let p01 = self.pixel(xa, y1);
        let p11 = self.pixel(xb, y1);
        for c in 0..3 {
            let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
            let bot = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
            out[c] = (top * (1.0 - fy) + bot * fy) as f32;
        }
        out
    }

    /// Total energy: sum of radiance times per-pixel solid angle, per channel summed.
    pub fn energy(&self) -> f64 {
        let table = solid_angles(self.width, self.height).expect("2:1 map");
        let mut acc = 0.0f64;
        for y in 0..self.height {
            let w = table.row_weights[y];
            for x in 0..self.width {
                let p = self.pixel(x, y);
                acc += (p[0] as f64 + p[1] as f64 + p[2] as f64) * w;
            }
        }
        acc
    }

    pub fn as_image(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: 3,
            data: self.data.clone(),
        }
    }

    /// Area-downsample to another 2:1 resolution (e.g. for coarse quadrature).
    pub fn downsample(&self, out_w: usize, out_h: usize) -> Result<LatLongMap> {
        let img = self.as_image().downsample_area(out_w, out_h)?;
        LatLongMap::from_data(out_w, out_h, img.data)
    }

    /// Index of the brightest pixel by channel sum.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0usize, 0usize);
        let mut best_v = f64::NEG_INFINITY;
        for y in 0..self.height {
            for x in 0..self.width {
                let p = self.pixel(x, y);
                let s = p[0] as f64 + p[1] as f64 + p[2] as f64;
                if s > best_v {
                    best_v = s;
                    best = (x, y);
                }
            }
        }
        best
    }
}

/// The set of sampled light directions at cube-map texel centers, with optional
/// per-direction RGB intensities and the exact per-texel solid angles.
#[derive(Debug, Clone)]
pub struct CubeGrid {
    pub face_res: usize,
    pub dirs: Vec<Direction>,
    pub solid_angles: Vec<f64>,
    pub values: Option<Vec<[f64; 3]>>,
}

impl CubeGrid {
    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn with_values(&self, values: Vec<[f64; 3]>) -> Result<CubeGrid> {
        if values.len() != self.dirs.len() {
            return Err(Error::contract(format!(
                "cube grid has {} directions but {} values supplied",
                self.dirs.len(),
                values.len()
            )));
        }
        Ok(CubeGrid {
            face_res: self.face_res,
            dirs: self.dirs.clone(),
            solid_angles: self.solid_angles.clone(),
            values: Some(values),
        })
    }
}

/// Per-row solid angle weights of a 2:1 lat-long map.
#[derive(Debug, Clone)]
pub struct SolidAngleTable {
    pub width: usize,
    pub height: usize,
    /// Solid angle of one pixel in each row, steradians.
    pub row_weights: Vec<f64>,
}

impl SolidAngleTable {
    #[inline]
    pub fn pixel_weight(&self, _x: usize, y: usize) -> f64 {
        self.row_weights[y]
    }

    pub fn total(&self) -> f64 {
        self.row_weights
            .iter()
            .map(|w| w * self.width as f64)
            .sum()
    }
}

/// Direction at lat-long pixel coordinates (u, v). Integer values address pixel
/// centers; fractional values interpolate the angular parametrization.
pub fn latlong_to_dir(u: f64, v: f64, width: usize, height: usize) -> Result<Direction> {
    if !(0.0..width as f64).contains(&u) || !(0.0..height as f64).contains(&v) {
        return Err(Error::contract(format!(
            "lat-long coordinates ({}, {}) out of range for {}x{}",
            u, v, width, height
        )));
    }
    let phi = TAU * (u + 0.5) / width as f64;
    let theta = PI * (v + 0.5) / height as f64;
    let (st, ct) = (theta.sin(), theta.cos());
    let (sp, cp) = (phi.sin(), phi.cos());
    Ok(Direction(Vec3::new(st * cp, st * sp, ct).normalized()))
}

/// Continuous lat-long coordinates of a direction, u in [0, width), v in
/// [-0.5, height - 0.5]. Poles map to u = 0.
pub fn dir_to_latlong(d: Direction, width: usize, height: usize) -> (f64, f64) {
    let v3 = d.vec();
    let theta = v3.z.clamp(-1.0, 1.0).acos();
    let v = theta * height as f64 / PI - 0.5;
    if v3.x == 0.0 && v3.y == 0.0 {
        return (0.0, v);
    }
    let mut phi = v3.y.atan2(v3.x);
    if phi < 0.0 {
        phi += TAU;
    }
    let mut u = phi * width as f64 / TAU - 0.5;
    if u < 0.0 {
        u += width as f64;
    }
    (u, v)
}

/// Bin (pixel) containing continuous lat-long coordinates.
pub fn containing_bin(u: f64, v: f64, width: usize, height: usize) -> (usize, usize) {
    let x = ((u + 0.5).floor() as isize).rem_euclid(width as isize) as usize;
    let y = ((v + 0.5).floor() as isize).clamp(0, height as isize - 1) as usize;
    (x, y)
}

// Face order: +X, -X, +Y, -Y, +Z, -Z. The in-face axes follow the cyclic
// pattern X->(Y,Z), Y->(Z,X), Z->(X,Y), which keeps the direction set closed
// under the cube's rotation symmetries.
const FACE_AXES: [(usize, f64, usize, usize); 6] = [
    (0, 1.0, 1, 2),
    (0, -1.0, 1, 2),
    (1, 1.0, 2, 0),
    (1, -1.0, 2, 0),
    (2, 1.0, 0, 1),
    (2, -1.0, 0, 1),
];

/// Directions at the texel centers of a cube map, face-major then row-major,
/// with exact per-texel solid angles.
pub fn cube_dirs(face_res: usize) -> Result<CubeGrid> {
    if face_res == 0 {
        return Err(Error::contract("cube face resolution must be >= 1"));
    }
    let n = face_res;
    let mut dirs = Vec::with_capacity(6 * n * n);
    let mut omegas = Vec::with_capacity(6 * n * n);
    for &(axis, sign, s_axis, t_axis) in FACE_AXES.iter() {
        for row in 0..n {
            for col in 0..n {
                let s = 2.0 * (col as f64 + 0.5) / n as f64 - 1.0;
                let t = 2.0 * (row as f64 + 0.5) / n as f64 - 1.0;
                let mut c = [0.0f64; 3];
                c[axis] = sign;
                c[s_axis] = s;
                c[t_axis] = t;
                dirs.push(Direction(Vec3::new(c[0], c[1], c[2]).normalized()));
                omegas.push(cube_texel_solid_angle(n, col, row));
            }
        }
    }
    Ok(CubeGrid {
        face_res: n,
        dirs,
        solid_angles: omegas,
        values: None,
    })
}

fn sphere_quadrant_area(x: f64, y: f64) -> f64 {
    (x * y).atan2((x * x + y * y + 1.0).sqrt())
}

/// Exact solid angle of cube-face texel (col, row) on an n x n face.
fn cube_texel_solid_angle(n: usize, col: usize, row: usize) -> f64 {
    let inv = 1.0 / n as f64;
    let x0 = 2.0 * col as f64 * inv - 1.0;
    let x1 = 2.0 * (col as f64 + 1.0) * inv - 1.0;
    let y0 = 2.0 * row as f64 * inv - 1.0;
    let y1 = 2.0 * (row as f64 + 1.0) * inv - 1.0;
    sphere_quadrant_area(x0, y0) - sphere_quadrant_area(x0, y1) - sphere_quadrant_area(x1, y0)
        + sphere_quadrant_area(x1, y1)
}

/// Resample cube-grid intensities onto a lat-long map with per-face bilinear
/// interpolation across texel centers.
pub fn cube_to_latlong(grid: &CubeGrid, width: usize, height: usize) -> Result<LatLongMap> {
    let values = grid
        .values
        .as_ref()
        .ok_or_else(|| Error::contract("cube grid has no values to resample"))?;
    if values.len() != grid.dirs.len() {
        return Err(Error::contract("cube grid values/dirs length mismatch"));
    }
    let n = grid.face_res;
    let mut out = LatLongMap::zeros(width, height)?;
    for y in 0..height {
        for x in 0..width {
            let d = latlong_to_dir(x as f64, y as f64, width, height)?.vec();
            let comp = [d.x, d.y, d.z];
            // Containing face: the axis with the largest magnitude.
            let mut axis = 0;
            for i in 1..3 {
                if comp[i].abs() > comp[axis].abs() {
                    axis = i;
                }
            }
            let face = axis * 2 + if comp[axis] >= 0.0 { 0 } else { 1 };
            let (_, _, s_axis, t_axis) = FACE_AXES[face];
            let inv = 1.0 / comp[axis].abs();
            let s = comp[s_axis] * inv;
            let t = comp[t_axis] * inv;
            // Texel-center grid coordinates, clamped at face borders.
            let gx = ((s + 1.0) * 0.5 * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
            let gy = ((t + 1.0) * 0.5 * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
            let x0 = gx.floor() as usize;
            let y0 = gy.floor() as usize;
            let x1 = (x0 + 1).min(n - 1);
            let y1 = (y0 + 1).min(n - 1);
            let fx = gx - x0 as f64;
            let fy = gy - y0 as f64;
            let base = face * n * n;
            let mut rgb = [0.0f32; 3];
            for c in 0..3 {
                let v00 = values[base + y0 * n + x0][c];
                let v10 = values[base + y0 * n + x1][c];
                let v01 = values[base + y1 * n + x0][c];
                let v11 = values[base + y1 * n + x1][c];
                let top = v00 * (1.0 - fx) + v10 * fx;
                let bot = v01 * (1.0 - fx) + v11 * fx;
                rgb[c] = ((top * (1.0 - fy) + bot * fy).max(0.0)) as f32;
            }
            out.set_pixel(x, y, rgb);
        }
    }
    Ok(out)
}

/// Rotate the radiance field about the up axis by `yaw` radians. Yaw values
/// that correspond to a whole number of columns are exact column shifts.
pub fn rotate_env(map: &LatLongMap, yaw: f64) -> LatLongMap {
    let w = map.width;
    let shift = yaw / TAU * w as f64;
    let rounded = shift.round();
    if (shift - rounded).abs() < 1e-9 {
        let k = (rounded as i64).rem_euclid(w as i64) as usize;
        if k == 0 {
            return map.clone();
        }
        let mut out = map.clone();
        for y in 0..map.height {
            for x in 0..w {
                let src = (x + w - k) % w;
                out.set_pixel(x, y, map.pixel(src, y));
            }
        }
        return out;
    }
    let mut out = map.clone();
    for y in 0..map.height {
        for x in 0..w {
            let u = x as f64 - shift;
            let x0 = u.floor();
            let f = u - x0;
            let xa = (x0 as i64).rem_euclid(w as i64) as usize;
            let xb = (x0 as i64 + 1).rem_euclid(w as i64) as usize;
            let a = map.pixel(xa, y);
            let b = map.pixel(xb, y);
            let mut rgb = [0.0f32; 3];
            for c in 0..3 {
                rgb[c] = (a[c] as f64 * (1.0 - f) + b[c] as f64 * f).max(0.0) as f32;
            }
            out.set_pixel(x, y, rgb);
        }
    }
    out
}

/// Per-row pixel solid angles for a 2:1 lat-long map. Uses the exact band
/// integral (2*pi/width) * (cos(theta_lo) - cos(theta_hi)), so the table sums
/// to 4*pi up to rounding.
pub fn solid_angles(width: usize, height: usize) -> Result<SolidAngleTable> {
    if height == 0 || width != 2 * height {
        return Err(Error::contract(format!(
            "solid angle table requires a 2:1 map, got {}x{}",
            width, height
        )));
    }
    let mut row_weights = Vec::with_capacity(height);
    for v in 0..height {
        let t0 = PI * v as f64 / height as f64;
        let t1 = PI * (v as f64 + 1.0) / height as f64;
        row_weights.push(TAU / width as f64 * (t0.cos() - t1.cos()));
    }
    Ok(SolidAngleTable {
        width,
        height,
        row_weights,
    })
}
