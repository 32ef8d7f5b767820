//! Random environment generation: a low ambient floor plus disk-shaped area
//! lights with a raised-cosine profile.

use crate::error::{Error, Result};
use crate::radiometry::{latlong_to_dir, Direction, LatLongMap};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// One generated area light.
#[derive(Debug, Clone, Copy)]
pub struct LightDisk {
    pub center: Direction,
    /// Angular radius, radians.
    pub radius: f64,
    /// Peak radiance per channel.
    pub intensity: [f32; 3],
}

#[derive(Debug, Clone, Copy)]
pub struct EnvGenConfig {
    pub num_lights: usize,
    /// Light footprint range in steradians.
    pub size_range: (f64, f64),
    /// Peak intensity range (scalar; per-channel jitter is applied on top).
    pub intensity_range: (f64, f64),
    /// Ambient floor radiance.
    pub ambient: f32,
    pub width: usize,
    pub height: usize,
}

impl Default for EnvGenConfig {
    fn default() -> Self {
        EnvGenConfig {
            num_lights: 1,
            size_range: (0.15, 0.5),
            intensity_range: (0.3, 1.5),
            ambient: 0.05,
            width: 256,
            height: 128,
        }
    }
}

/// Angular radius of a spherical cap with the given solid angle.
fn cap_radius(solid_angle: f64) -> f64 {
    (1.0 - solid_angle / (2.0 * PI)).clamp(-1.0, 1.0).acos()
}

/// Environment with one raised-cosine disk light over an ambient floor.
pub fn disk_light_env(
    center: Direction,
    solid_angle: f64,
    intensity: [f32; 3],
    ambient: f32,
    width: usize,
    height: usize,
) -> Result<LatLongMap> {
    let lights = [LightDisk {
        center,
        radius: cap_radius(solid_angle),
        intensity,
    }];
    paint_env(&lights, ambient, width, height)
}

fn paint_env(
    lights: &[LightDisk],
    ambient: f32,
    width: usize,
    height: usize,
) -> Result<LatLongMap> {
    let mut map = LatLongMap::constant(width, height, ambient)?;
    for y in 0..height {
        for x in 0..width {
            let d = latlong_to_dir(x as f64, y as f64, width, height)?;
            let mut rgb = [ambient; 3];
            for light in lights {
                let angle = d.angle_to(light.center);
                if angle < light.radius {
                    // Raised-cosine profile: peak at the center, zero at the rim.
                    let w = 0.5 * (1.0 + (PI * angle / light.radius).cos());
                    for c in 0..3 {
                        rgb[c] += light.intensity[c] * w as f32;
                    }
                }
            }
            map.set_pixel(x, y, rgb);
        }
    }
    Ok(map)
}

/// Deterministic-per-seed random environment. See [`gen_random_env_with_meta`]
/// for the sampled light parameters.
pub fn gen_random_env(
    num_lights: usize,
    size_range: (f64, f64),
    intensity_range: (f64, f64),
    seed: u64,
) -> Result<LatLongMap> {
    let cfg = EnvGenConfig {
        num_lights,
        size_range,
        intensity_range,
        ..EnvGenConfig::default()
    };
    gen_random_env_with_meta(&cfg, seed).map(|(map, _)| map)
}

/// Random environment plus the sampled lights. Light centers are rejected
/// until the disks are pairwise disjoint with a small margin, so each light
/// forms its own connected bright component.
pub fn gen_random_env_with_meta(
    cfg: &EnvGenConfig,
    seed: u64,
) -> Result<(LatLongMap, Vec<LightDisk>)> {
    if cfg.num_lights == 0 {
        return Err(Error::contract("need at least one light"));
    }
    if cfg.size_range.0 <= 0.0 || cfg.size_range.1 < cfg.size_range.0 {
        return Err(Error::contract("bad light size range"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = 3.0 * PI / cfg.height as f64;
    let mut lights: Vec<LightDisk> = Vec::with_capacity(cfg.num_lights);
    let mut attempts = 0usize;
    while lights.len() < cfg.num_lights {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::contract(
                "could not place pairwise disjoint lights; shrink sizes or count",
            ));
        }
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        let s = (1.0 - z * z).max(0.0).sqrt();
        let center = Direction::new(s * phi.cos(), s * phi.sin(), z)?;
        let solid_angle = rng.gen_range(cfg.size_range.0..=cfg.size_range.1);
        let radius = cap_radius(solid_angle);
        let base: f64 = rng.gen_range(cfg.intensity_range.0..=cfg.intensity_range.1);
        // Mild chromatic jitter around a white light.
        let mut jitter = [0.0f64; 3];
        for j in jitter.iter_mut() {
            *j = 0.85 + 0.3 * rng.gen::<f64>();
        }
        let mean = (jitter[0] + jitter[1] + jitter[2]) / 3.0;
        let intensity = [
            (base * jitter[0] / mean) as f32,
            (base * jitter[1] / mean) as f32,
            (base * jitter[2] / mean) as f32,
        ];
        let disjoint = lights
            .iter()
            .all(|l| l.center.angle_to(center) > l.radius + radius + margin);
        if !disjoint {
            continue;
        }
        lights.push(LightDisk {
            center,
            radius,
            intensity,
        });
    }
    let map = paint_env(&lights, cfg.ambient, cfg.width, cfg.height)?;
    Ok((map, lights))
}
