//! Forward rendering: synthetic-data factory and differential test oracle.
//!
//! Renders diffuse shading, specular shading, shadows, irradiance stacks, and
//! full composite images from analytic scene descriptions and environment
//! maps. World up is +Z; the ground plane lives at constant z; cameras use
//! the camera-space convention of [`crate::geometry`] (x right, y down,
//! z forward).

mod envgen;
mod irradiance;
mod render;
mod scenegen;

pub use envgen::{disk_light_env, gen_random_env, gen_random_env_with_meta, EnvGenConfig, LightDisk};
pub use irradiance::{
    downsample_cells, render_diffuse, render_irradiance_stack, IrradianceStack, StackSampling,
};
pub use render::{render_full, render_specular, RenderOpts, RenderOutput};
pub use scenegen::{gen_test_scene, ScenePreset, DEFAULT_SCENE_RESOLUTION};

use crate::error::{Error, Result};
use crate::geometry::Intrinsics;
use crate::linalg::{Rot3, Vec3};
use serde::{Deserialize, Serialize};

/// Roughness below which the specular lobe is treated as a perfect mirror
/// (single lookup along the mirror direction).
pub const MIRROR_SIGMA: f64 = 0.005;

/// Homogeneous reflectance parameters of one primitive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Diffuse albedo scale per channel, each in [0, 1].
    pub rho_d: [f64; 3],
    /// Specular scale in [0, 1].
    pub rho_s: f64,
    /// Roughness in (0, 1]; the lobe exponent is 2 / sigma^2 - 2.
    pub sigma: f64,
}

impl Material {
    pub fn diffuse(rho_d: [f64; 3]) -> Material {
        Material {
            rho_d,
            rho_s: 0.0,
            sigma: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for &c in &self.rho_d {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::contract("rho_d channels must lie in [0, 1]"));
            }
            if c + self.rho_s > 1.0 + 1e-9 {
                return Err(Error::contract("rho_d + rho_s must be <= 1 per channel"));
            }
        }
        if !(0.0..=1.0).contains(&self.rho_s) {
            return Err(Error::contract("rho_s must lie in [0, 1]"));
        }
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return Err(Error::contract("sigma must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Procedural checkerboard albedo: squares of the material color and a
/// secondary color, in world units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checker {
    pub scale: f64,
    pub secondary: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    Sphere { center: Vec3, radius: f64 },
    Box { min: Vec3, max: Vec3 },
    GroundPlane { z: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    pub material: Material,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checker: Option<Checker>,
}

/// Camera-to-world pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vec3,
    pub rotation: Rot3,
}

impl CameraPose {
    /// Pose looking from `eye` toward `target` with world +Z up. Falls back
    /// to a +X up hint when the view direction is vertical.
    pub fn look_at(eye: Vec3, target: Vec3) -> Result<CameraPose> {
        let forward = (target - eye).normalized();
        if forward.norm() < 0.5 {
            return Err(Error::contract("camera eye and target coincide"));
        }
        let up = Vec3::new(0.0, 0.0, 1.0);
        let up = if forward.dot(up).abs() > 0.999 {
            Vec3::new(1.0, 0.0, 0.0)
        } else {
            up
        };
        let right = forward.cross(up).normalized();
        let down = forward.cross(right);
        Ok(CameraPose {
            position: eye,
            rotation: Rot3::from_cols(right, down, forward),
        })
    }

    pub fn cam_to_world_dir(&self, v: Vec3) -> Vec3 {
        self.rotation.apply(v)
    }

    pub fn world_to_cam_dir(&self, v: Vec3) -> Vec3 {
        self.rotation.transpose().apply(v)
    }

    pub fn world_to_cam_point(&self, p: Vec3) -> Vec3 {
        self.rotation.transpose().apply(p - self.position)
    }

    /// Azimuth of the camera forward axis in the world frame.
    pub fn yaw(&self) -> f64 {
        let f = self.rotation.col(2);
        f.y.atan2(f.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub pose: CameraPose,
}

/// Analytic scene: a list of primitives plus the camera observing them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDesc {
    pub primitives: Vec<Primitive>,
    pub camera: Camera,
}

impl SceneDesc {
    pub fn validate(&self) -> Result<()> {
        if self.primitives.is_empty() {
            return Err(Error::Empty("scene has no primitives"));
        }
        for p in &self.primitives {
            p.material.validate()?;
            match p.shape {
                Shape::Sphere { radius, .. } if radius <= 0.0 => {
                    return Err(Error::contract("sphere radius must be positive"));
                }
                Shape::Box { min, max } => {
                    if min.x >= max.x || min.y >= max.y || min.z >= max.z {
                        return Err(Error::contract("box min must be strictly below max"));
                    }
                }
                _ => {}
            }
        }
        self.camera.intrinsics.validate()
    }

    /// Same scene rendered at a different square resolution.
    pub fn with_resolution(mut self, resolution: usize) -> SceneDesc {
        let old = &self.camera.intrinsics;
        let scale = resolution as f64 / old.width as f64;
        self.camera.intrinsics = Intrinsics {
            fx: old.fx * scale,
            fy: old.fy * scale,
            cx: (old.cx + 0.5) * scale - 0.5,
            cy: (old.cy + 0.5) * scale - 0.5,
            width: resolution,
            height: (old.height as f64 * scale).round() as usize,
        };
        self
    }
}
