//! Shared fixtures for the acceptance suite: an analytic box-on-plane depth
//! scene with its exact shadow oracle.

use envlight::geometry::{unproject, DepthFrame, Intrinsics};
use envlight::linalg::Vec3;

pub struct BoxScene {
    pub frame: DepthFrame,
    pub plane_z: f64,
    pub half: f64,
    pub height: f64,
}

/// Slab-method ray/AABB intersection, entry parameter.
pub fn ray_box(origin: Vec3, dir: Vec3, lo: Vec3, hi: Vec3) -> Option<f64> {
    let mut tmin = f64::NEG_INFINITY;
    let mut tmax = f64::INFINITY;
    for (o, d, l, h) in [
        (origin.x, dir.x, lo.x, hi.x),
        (origin.y, dir.y, lo.y, hi.y),
        (origin.z, dir.z, lo.z, hi.z),
    ] {
        if d.abs() < 1e-12 {
            if o < l || o > h {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d;
        let (t0, t1) = ((l - o) * inv, (h - o) * inv);
        let (t0, t1) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        tmin = tmin.max(t0);
        tmax = tmax.min(t1);
        if tmin > tmax {
            return None;
        }
    }
    if tmax < 0.0 {
        None
    } else {
        Some(tmin.max(0.0))
    }
}

/// Depth frame of a camera looking straight down at a plane carrying an
/// axis-aligned box.
pub fn box_scene(resolution: usize, half: f64, height: f64) -> BoxScene {
    let plane_z = 2.0;
    let intr = Intrinsics::from_fov(resolution, 60f64.to_radians());
    let mut depth = vec![0.0f32; resolution * resolution];
    for v in 0..resolution {
        for u in 0..resolution {
            let ray = intr.ray(u as f64, v as f64).normalized();
            let t = ray_box(
                Vec3::ZERO,
                ray,
                Vec3::new(-half, -half, plane_z - height),
                Vec3::new(half, half, plane_z),
            );
            let z = match t {
                Some(t) if t > 0.0 => (ray * t).z,
                _ => {
                    let t = plane_z / ray.z;
                    (ray * t).z
                }
            };
            depth[v * resolution + u] = z as f32;
        }
    }
    BoxScene {
        frame: DepthFrame::new(intr, depth).unwrap(),
        plane_z,
        half,
        height,
    }
}

impl BoxScene {
    /// Exact surface normal at a valid pixel.
    pub fn analytic_normal(&self, u: usize, v: usize) -> Vec3 {
        let p = unproject(u, v, &self.frame).unwrap();
        let eps = 1e-4;
        if (p.z - self.plane_z).abs() < eps || (p.z - (self.plane_z - self.height)).abs() < eps {
            Vec3::new(0.0, 0.0, -1.0)
        } else if (p.x - self.half).abs() < eps {
            Vec3::new(1.0, 0.0, 0.0)
        } else if (p.x + self.half).abs() < eps {
            Vec3::new(-1.0, 0.0, 0.0)
        } else if (p.y - self.half).abs() < eps {
            Vec3::new(0.0, 1.0, 0.0)
        } else {
            Vec3::new(0.0, -1.0, 0.0)
        }
    }

    /// Exact visibility of a light direction from the surface point of a
    /// pixel: blocked by the box or by the infinite ground plane.
    pub fn analytic_visibility(&self, u: usize, v: usize, l: Vec3) -> u8 {
        let n = self.analytic_normal(u, v);
        let p = unproject(u, v, &self.frame).unwrap() + n * 1e-3;
        let hits_box = matches!(
            ray_box(
                p,
                l,
                Vec3::new(-self.half, -self.half, self.plane_z - self.height),
                Vec3::new(self.half, self.half, self.plane_z - 1e-6),
            ),
            Some(t) if t > 1e-6
        );
        if hits_box || l.z > 1e-6 {
            0
        } else {
            1
        }
    }
}
