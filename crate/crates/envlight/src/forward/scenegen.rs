//! Procedural test scenes: deterministic per (preset, seed).

use super::{Camera, CameraPose, Material, Primitive, SceneDesc, Shape};
use crate::error::Result;
use crate::geometry::Intrinsics;
use crate::linalg::Vec3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub const DEFAULT_SCENE_RESOLUTION: usize = 384;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenePreset {
    SphereOnPlane,
    BoxOnPlane,
    /// 1-6 primitives scattered on the plane.
    Cluster,
    /// A single floating sphere, intended for mirror materials.
    MirrorProbe,
}

impl std::str::FromStr for ScenePreset {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sphere-on-plane" => Ok(ScenePreset::SphereOnPlane),
            "box-on-plane" => Ok(ScenePreset::BoxOnPlane),
            "cluster" => Ok(ScenePreset::Cluster),
            "mirror-probe" => Ok(ScenePreset::MirrorProbe),
            other => Err(format!(
                "unknown preset '{other}' (expected sphere-on-plane, box-on-plane, cluster, mirror-probe)"
            )),
        }
    }
}

fn ground() -> Primitive {
    Primitive {
        shape: Shape::GroundPlane { z: 0.0 },
        material: Material::diffuse([0.5, 0.5, 0.5]),
        checker: None,
    }
}

fn camera_for(rng: &mut ChaCha8Rng, target: Vec3, distance: f64) -> Result<Camera> {
    let azimuth = rng.gen_range(0.0..2.0 * PI);
    let elevation = rng.gen_range(30f64.to_radians()..55f64.to_radians());
    let eye = target
        + Vec3::new(
            distance * elevation.cos() * azimuth.cos(),
            distance * elevation.cos() * azimuth.sin(),
            distance * elevation.sin(),
        );
    Ok(Camera {
        intrinsics: Intrinsics::from_fov(DEFAULT_SCENE_RESOLUTION, 55f64.to_radians()),
        pose: CameraPose::look_at(eye, target)?,
    })
}

/// Deterministic scene per (preset, material, seed). The material is applied
/// to the foreground primitives; the ground plane is a fixed neutral gray.
pub fn gen_test_scene(preset: ScenePreset, material: &Material, seed: u64) -> Result<SceneDesc> {
    material.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5CE9E5_u64);
    let scene = match preset {
        ScenePreset::SphereOnPlane => {
            let radius = rng.gen_range(0.08..0.14);
            let camera = camera_for(&mut rng, Vec3::new(0.0, 0.0, radius * 0.7), 0.65)?;
            SceneDesc {
                primitives: vec![
                    ground(),
                    Primitive {
                        shape: Shape::Sphere {
                            center: Vec3::new(0.0, 0.0, radius),
                            radius,
                        },
                        material: *material,
                        checker: None,
                    },
                ],
                camera,
            }
        }
        ScenePreset::BoxOnPlane => {
            let hx = rng.gen_range(0.06..0.13);
            let hy = rng.gen_range(0.06..0.13);
            let hz = rng.gen_range(0.06..0.13);
            let camera = camera_for(&mut rng, Vec3::new(0.0, 0.0, hz * 0.8), 0.65)?;
            SceneDesc {
                primitives: vec![
                    ground(),
                    Primitive {
                        shape: Shape::Box {
                            min: Vec3::new(-hx, -hy, 0.0),
                            max: Vec3::new(hx, hy, 2.0 * hz),
                        },
                        material: *material,
                        checker: None,
                    },
                ],
                camera,
            }
        }
        ScenePreset::Cluster => {
            let count = rng.gen_range(1..=6usize);
            let mut primitives = vec![ground()];
            let mut placed: Vec<(f64, f64, f64)> = Vec::new();
            for i in 0..count {
                // Rejection placement in a disk, keeping footprints apart.
                let (x, y, size) = loop {
                    let r = rng.gen_range(0.0..0.22);
                    let a = rng.gen_range(0.0..2.0 * PI);
                    let size = rng.gen_range(0.05..0.1);
                    let (x, y) = (r * a.cos(), r * a.sin());
                    if placed
                        .iter()
                        .all(|&(px, py, ps)| ((x - px).powi(2) + (y - py).powi(2)).sqrt() > ps + size)
                    {
                        break (x, y, size);
                    }
                };
                placed.push((x, y, size));
                // Alternate spheres and boxes; jitter the albedo hue of later
                // primitives so clusters are not monochrome.
                let mut mat = *material;
                if i > 0 {
                    for c in mat.rho_d.iter_mut() {
                        *c = (*c * rng.gen_range(0.6..1.0)).clamp(0.02, 1.0 - mat.rho_s);
                    }
                }
                let shape = if i % 2 == 0 {
                    Shape::Sphere {
                        center: Vec3::new(x, y, size),
                        radius: size,
                    }
                } else {
                    Shape::Box {
                        min: Vec3::new(x - size, y - size, 0.0),
                        max: Vec3::new(x + size, y + size, 1.6 * size),
                    }
                };
                primitives.push(Primitive {
                    shape,
                    material: mat,
                    checker: None,
                });
            }
            let camera = camera_for(&mut rng, Vec3::new(0.0, 0.0, 0.06), 0.7)?;
            SceneDesc { primitives, camera }
        }
        ScenePreset::MirrorProbe => {
            let radius = 0.12;
            let center = Vec3::new(0.0, 0.0, 0.3);
            let camera = camera_for(&mut rng, center, 0.28)?;
            SceneDesc {
                primitives: vec![Primitive {
                    shape: Shape::Sphere { center, radius },
                    material: *material,
                    checker: None,
                }],
                camera,
            }
        }
    };
    scene.validate()?;
    Ok(scene)
}
