//! Evaluation metrics: direct light RMSE, re-render RMSE over a fixed probe
//! set, Huber distance, and a low-order spherical-harmonic baseline.

use crate::error::{Error, Result};
use crate::forward::{
    render_full, Camera, CameraPose, Material, Primitive, RenderOpts, SceneDesc, Shape,
};
use crate::geometry::Intrinsics;
use crate::linalg::Vec3;
use crate::radiometry::{latlong_to_dir, solid_angles, LatLongMap};

/// Fixed set of probe objects re-rendered under estimated and reference
/// lights. Deterministic: identical across evaluations.
#[derive(Debug, Clone)]
pub struct ProbeSet {
    pub scenes: Vec<SceneDesc>,
    pub opts: RenderOpts,
}

impl ProbeSet {
    /// The default probes: a diffuse sphere, a glossy sphere, a mirror sphere
    /// and a small box cluster, each on the ground plane under one camera.
    pub fn standard() -> ProbeSet {
        Self::with_resolution(96)
    }

    /// Smaller renders for quick checks.
    pub fn quick() -> ProbeSet {
        Self::with_resolution(48)
    }

    fn with_resolution(res: usize) -> ProbeSet {
        let camera = Camera {
            intrinsics: Intrinsics::from_fov(res, 55f64.to_radians()),
            pose: CameraPose::look_at(Vec3::new(0.42, 0.3, 0.42), Vec3::new(0.0, 0.0, 0.08))
                .expect("fixed probe camera"),
        };
        let ground = Primitive {
            shape: Shape::GroundPlane { z: 0.0 },
            material: Material::diffuse([0.5, 0.5, 0.5]),
            checker: None,
        };
        let sphere = |material: Material| SceneDesc {
            primitives: vec![
                ground.clone(),
                Primitive {
                    shape: Shape::Sphere {
                        center: Vec3::new(0.0, 0.0, 0.1),
                        radius: 0.1,
                    },
                    material,
                    checker: None,
                },
            ],
            camera,
        };
        let diffuse_sphere = sphere(Material::diffuse([0.8, 0.8, 0.8]));
        let glossy_sphere = sphere(Material {
            rho_d: [0.5, 0.5, 0.5],
            rho_s: 0.5,
            sigma: 0.05,
        });
        // The mirror probe uses a close-up view so its reflection samples the
        // sphere of directions densely enough to sense small light sources.
        let mirror_camera = Camera {
            intrinsics: Intrinsics::from_fov(res, 55f64.to_radians()),
            pose: CameraPose::look_at(Vec3::new(0.16, 0.12, 0.22), Vec3::new(0.0, 0.0, 0.1))
                .expect("fixed probe camera"),
        };
        let mirror_sphere = SceneDesc {
            primitives: vec![
                ground.clone(),
                Primitive {
                    shape: Shape::Sphere {
                        center: Vec3::new(0.0, 0.0, 0.1),
                        radius: 0.1,
                    },
                    material: Material {
                        rho_d: [0.05, 0.05, 0.05],
                        rho_s: 0.9,
                        sigma: 1e-3,
                    },
                    checker: None,
                },
            ],
            camera: mirror_camera,
        };
        let boxes = SceneDesc {
            primitives: vec![
                ground,
                Primitive {
                    shape: Shape::Box {
                        min: Vec3::new(-0.12, -0.09, 0.0),
                        max: Vec3::new(0.0, 0.03, 0.14),
                    },
                    material: Material::diffuse([0.7, 0.3, 0.25]),
                    checker: None,
                },
                Primitive {
                    shape: Shape::Box {
                        min: Vec3::new(0.04, -0.04, 0.0),
                        max: Vec3::new(0.14, 0.08, 0.08),
                    },
                    material: Material::diffuse([0.25, 0.45, 0.7]),
                    checker: None,
                },
            ],
            camera,
        };
        ProbeSet {
            scenes: vec![diffuse_sphere, glossy_sphere, mirror_sphere, boxes],
            opts: RenderOpts::default(),
        }
    }
}

fn check_same_resolution(est: &LatLongMap, gt: &LatLongMap, context: &'static str) -> Result<()> {
    if est.width != gt.width || est.height != gt.height {
        return Err(Error::ResolutionMismatch {
            left: format!("{}x{}", est.width, est.height),
            right: format!("{}x{}", gt.width, gt.height),
            context,
        });
    }
    Ok(())
}

/// Root mean squared difference per pixel and channel, unweighted.
pub fn light_rmse(est: &LatLongMap, gt: &LatLongMap) -> Result<f64> {
    check_same_resolution(est, gt, "light_rmse")?;
    let n = est.data.len();
    let mut acc = 0.0f64;
    for i in 0..n {
        let d = est.data[i] as f64 - gt.data[i] as f64;
        acc += d * d;
    }
    Ok((acc / n as f64).sqrt())
}

/// Solid-angle-weighted variant of [`light_rmse`], for evaluations that
/// should not over-count the poles.
pub fn light_rmse_weighted(est: &LatLongMap, gt: &LatLongMap) -> Result<f64> {
    check_same_resolution(est, gt, "light_rmse_weighted")?;
    let table = solid_angles(est.width, est.height)?;
    let mut acc = 0.0f64;
    let mut wacc = 0.0f64;
    for y in 0..est.height {
        let w = table.row_weights[y];
        for x in 0..est.width {
            let pe = est.pixel(x, y);
            let pg = gt.pixel(x, y);
            for c in 0..3 {
                let d = pe[c] as f64 - pg[c] as f64;
                acc += w * d * d;
                wacc += w;
            }
        }
    }
    Ok((acc / wacc).sqrt())
}

/// RMSE between images of each probe rendered under the estimated and the
/// reference light, averaged over the probe set. Linear radiance units.
pub fn render_rmse(est: &LatLongMap, gt: &LatLongMap, probes: &ProbeSet) -> Result<f64> {
    let mut acc = 0.0f64;
    for scene in &probes.scenes {
        let img_est = render_full(scene, est, &probes.opts)?;
        let img_gt = render_full(scene, gt, &probes.opts)?;
        let n = img_est.rgb.data.len();
        let mut sq = 0.0f64;
        for i in 0..n {
            let d = img_est.rgb.data[i] as f64 - img_gt.rgb.data[i] as f64;
            sq += d * d;
        }
        acc += (sq / n as f64).sqrt();
    }
    Ok(acc / probes.scenes.len() as f64)
}

/// Mean Huber penalty: quadratic below `delta`, linear above.
pub fn huber(est: &LatLongMap, gt: &LatLongMap, delta: f64) -> Result<f64> {
    if delta <= 0.0 {
        return Err(Error::contract("huber delta must be positive"));
    }
    check_same_resolution(est, gt, "huber")?;
    let n = est.data.len();
    let mut acc = 0.0f64;
    for i in 0..n {
        let d = (est.data[i] as f64 - gt.data[i] as f64).abs();
        acc += if d <= delta {
            0.5 * d * d
        } else {
            delta * (d - 0.5 * delta)
        };
    }
    Ok(acc / n as f64)
}

/// Highest supported SH degree.
pub const SH_MAX_ORDER: usize = 10;

fn sh_count(order: usize) -> usize {
    (order + 1) * (order + 1)
}

/// Real spherical harmonics evaluated at a unit direction, degrees 0..=order,
/// ordered (l, m) with m from -l to l.
fn sh_basis(dir: Vec3, order: usize, out: &mut [f64]) {
    let x = dir.x;
    let y = dir.y;
    let z = dir.z;
    let phi = y.atan2(x);
    // Associated Legendre values P_l^m(cos theta) with Condon-Shortley phase.
    let ct = z.clamp(-1.0, 1.0);
    let st = (1.0 - ct * ct).max(0.0).sqrt();
    let lmax = order;
    let mut p = vec![0.0f64; (lmax + 1) * (lmax + 1)];
    let idx = |l: usize, m: usize| l * (lmax + 1) + m;
    p[idx(0, 0)] = 1.0;
    for m in 1..=lmax {
        p[idx(m, m)] = -(2.0 * m as f64 - 1.0) * st * p[idx(m - 1, m - 1)];
    }
    for m in 0..lmax {
        p[idx(m + 1, m)] = ct * (2.0 * m as f64 + 1.0) * p[idx(m, m)];
    }
    for m in 0..=lmax {
        for l in (m + 2)..=lmax {
            p[idx(l, m)] = (ct * (2.0 * l as f64 - 1.0) * p[idx(l - 1, m)]
                - (l + m - 1) as f64 * p[idx(l - 2, m)])
                / (l - m) as f64;
        }
    }
    let norm = |l: usize, m: usize| -> f64 {
        // sqrt((2l+1)/(4 pi) * (l-m)!/(l+m)!), the factorial ratio built as a
        // running product to stay in range.
        let mut ratio = 1.0f64;
        for k in (l - m + 1)..=(l + m) {
            ratio /= k as f64;
        }
        ((2.0 * l as f64 + 1.0) / (4.0 * std::f64::consts::PI) * ratio).sqrt()
    };
    let mut i = 0;
    for l in 0..=order {
        for m in -(l as isize)..=(l as isize) {
            let ma = m.unsigned_abs();
            let k = norm(l, ma);
            out[i] = if m == 0 {
                k * p[idx(l, 0)]
            } else if m > 0 {
                std::f64::consts::SQRT_2 * k * (ma as f64 * phi).cos() * p[idx(l, ma)]
            } else {
                std::f64::consts::SQRT_2 * k * (ma as f64 * phi).sin() * p[idx(l, ma)]
            };
            i += 1;
        }
    }
}

/// Project an environment map onto real spherical harmonics up to `order`
/// (inclusive), with solid-angle quadrature. Returns one coefficient triple
/// per basis function.
pub fn sh_fit(env: &LatLongMap, order: usize) -> Result<Vec<[f64; 3]>> {
    if order > SH_MAX_ORDER {
        return Err(Error::contract(format!(
            "SH order {order} exceeds the supported maximum {SH_MAX_ORDER}"
        )));
    }
    let n = sh_count(order);
    let table = solid_angles(env.width, env.height)?;
    let mut coeffs = vec![[0.0f64; 3]; n];
    let mut basis = vec![0.0f64; n];
    for y in 0..env.height {
        let dw = table.row_weights[y];
        for x in 0..env.width {
            let d = latlong_to_dir(x as f64, y as f64, env.width, env.height)?;
            sh_basis(d.vec(), order, &mut basis);
            let px = env.pixel(x, y);
            for (i, &b) in basis.iter().enumerate() {
                let bw = b * dw;
                coeffs[i][0] += px[0] as f64 * bw;
                coeffs[i][1] += px[1] as f64 * bw;
                coeffs[i][2] += px[2] as f64 * bw;
            }
        }
    }
    Ok(coeffs)
}

/// Evaluate a truncated SH series on a lat-long grid. Negative ringing is
/// clamped to zero so the result is a valid radiance map.
pub fn sh_render(coeffs: &[[f64; 3]], width: usize, height: usize) -> Result<LatLongMap> {
    let order = (coeffs.len() as f64).sqrt() as usize - 1;
    if sh_count(order) != coeffs.len() {
        return Err(Error::contract(format!(
            "coefficient count {} is not a perfect square",
            coeffs.len()
        )));
    }
    let mut data = vec![0.0f32; width * height * 3];
    let mut basis = vec![0.0f64; coeffs.len()];
    for y in 0..height {
        for x in 0..width {
            let d = latlong_to_dir(x as f64, y as f64, width, height)?;
            sh_basis(d.vec(), order, &mut basis);
            let mut rgb = [0.0f64; 3];
            for (i, &b) in basis.iter().enumerate() {
                rgb[0] += coeffs[i][0] * b;
                rgb[1] += coeffs[i][1] * b;
                rgb[2] += coeffs[i][2] * b;
            }
            let o = (y * width + x) * 3;
            data[o] = rgb[0].max(0.0) as f32;
            data[o + 1] = rgb[1].max(0.0) as f32;
            data[o + 2] = rgb[2].max(0.0) as f32;
        }
    }
    LatLongMap::from_data(width, height, data)
}
