//! Single-bounce direct-lighting renderer over analytic primitives.

use super::{Camera, Material, Primitive, SceneDesc, Shape, MIRROR_SIGMA};
use crate::error::{Error, Result};
use crate::geometry::{unproject, DepthFrame};
use crate::image::{Image, NormalMap};
use crate::linalg::Vec3;
use crate::radiometry::{solid_angles, Direction, LatLongMap};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub struct RenderOpts {
    /// Width of the lat-long quadrature the environment is downsampled to for
    /// the diffuse integral (height is width / 2).
    pub diffuse_quad_width: usize,
    /// Lobe samples per pixel for glossy specular.
    pub specular_samples: usize,
    /// Seed for the per-pixel specular sampler.
    pub seed: u64,
}

impl Default for RenderOpts {
    fn default() -> Self {
        RenderOpts {
            diffuse_quad_width: 32,
            specular_samples: 64,
            seed: 0,
        }
    }
}

/// Full render: composite image plus every ground-truth factor.
#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub rgb: Image,
    pub depth: DepthFrame,
    pub albedo: Image,
    pub diffuse: Image,
    pub specular: Image,
    /// Camera-space shading normals.
    pub normals: NormalMap,
    pub camera: Camera,
}

struct Hit {
    t: f64,
    point: Vec3,
    /// Outward normal, oriented toward the ray origin.
    normal: Vec3,
    prim: usize,
}

fn ray_sphere(origin: Vec3, dir: Vec3, center: Vec3, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.dot(oc) - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    if t0 > 1e-9 {
        return Some(t0);
    }
    let t1 = -b + sq;
    if t1 > 1e-9 {
        return Some(t1);
    }
    None
}

fn ray_aabb(origin: Vec3, dir: Vec3, lo: Vec3, hi: Vec3) -> Option<f64> {
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
    if tmax < 1e-9 {
        None
    } else if tmin > 1e-9 {
        Some(tmin)
    } else {
        Some(tmax)
    }
}

fn aabb_normal(p: Vec3, lo: Vec3, hi: Vec3) -> Vec3 {
    // Face with the smallest distance to the hit point.
    let candidates = [
        ((p.x - lo.x).abs(), Vec3::new(-1.0, 0.0, 0.0)),
        ((p.x - hi.x).abs(), Vec3::new(1.0, 0.0, 0.0)),
        ((p.y - lo.y).abs(), Vec3::new(0.0, -1.0, 0.0)),
        ((p.y - hi.y).abs(), Vec3::new(0.0, 1.0, 0.0)),
        ((p.z - lo.z).abs(), Vec3::new(0.0, 0.0, -1.0)),
        ((p.z - hi.z).abs(), Vec3::new(0.0, 0.0, 1.0)),
    ];
    let mut best = candidates[0];
    for c in candidates.iter().skip(1) {
        if c.0 < best.0 {
            best = *c;
        }
    }
    best.1
}

fn intersect_scene(prims: &[Primitive], origin: Vec3, dir: Vec3) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (i, prim) in prims.iter().enumerate() {
        let t = match prim.shape {
            Shape::Sphere { center, radius } => ray_sphere(origin, dir, center, radius),
            Shape::Box { min, max } => ray_aabb(origin, dir, min, max),
            Shape::GroundPlane { z } => {
                if dir.z.abs() < 1e-12 {
                    None
                } else {
                    let t = (z - origin.z) / dir.z;
                    (t > 1e-9).then_some(t)
                }
            }
        };
        let Some(t) = t else { continue };
        if best.as_ref().map_or(true, |b| t < b.t) {
            let point = origin + dir * t;
            let mut normal = match prim.shape {
                Shape::Sphere { center, .. } => (point - center).normalized(),
                Shape::Box { min, max } => aabb_normal(point, min, max),
                Shape::GroundPlane { .. } => Vec3::new(0.0, 0.0, 1.0),
            };
            if normal.dot(dir) > 0.0 {
                normal = -normal;
            }
            best = Some(Hit {
                t,
                point,
                normal,
                prim: i,
            });
        }
    }
    best
}

/// True when the shadow ray from `p` (offset along `n`) toward `l` hits any
/// primitive other than `skip_convex` (convex shapes cannot self-occlude rays
/// above their tangent plane).
fn occluded(prims: &[Primitive], skip: usize, p: Vec3, n: Vec3, l: Vec3) -> bool {
    let origin = p + n * 1e-6;
    for (i, prim) in prims.iter().enumerate() {
        if i == skip {
            continue;
        }
        let hit = match prim.shape {
            Shape::Sphere { center, radius } => ray_sphere(origin, l, center, radius).is_some(),
            Shape::Box { min, max } => ray_aabb(origin, l, min, max).is_some(),
            Shape::GroundPlane { z } => {
                l.z.abs() > 1e-12 && (z - origin.z) / l.z > 1e-9
            }
        };
        if hit {
            return true;
        }
    }
    false
}

fn albedo_at(prim: &Primitive, p: Vec3) -> [f64; 3] {
    match prim.checker {
        None => prim.material.rho_d,
        Some(ch) => {
            let ix = (p.x / ch.scale).floor() as i64;
            let iy = (p.y / ch.scale).floor() as i64;
            if (ix + iy).rem_euclid(2) == 0 {
                prim.material.rho_d
            } else {
                ch.secondary
            }
        }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Specular radiance response at one surface sample. `n`, `view` (surface to
/// eye) in world space; deterministic for a fixed (seed, pixel).
fn specular_at(
    material: &Material,
    n: Vec3,
    view: Vec3,
    env: &LatLongMap,
    seed: u64,
    px: usize,
    py: usize,
    samples: usize,
) -> [f32; 3] {
    if material.rho_s <= 0.0 {
        return [0.0; 3];
    }
    let ndotv = n.dot(view);
    if ndotv <= 1e-4 {
        return [0.0; 3];
    }
    let o = n * (2.0 * ndotv) - view;
    let o = o.normalized();
    if material.sigma <= MIRROR_SIGMA {
        let radiance = env.sample_nearest(Direction::from_unit(o));
        return [
            (material.rho_s * radiance[0] as f64) as f32,
            (material.rho_s * radiance[1] as f64) as f32,
            (material.rho_s * radiance[2] as f64) as f32,
        ];
    }
    let p_exp = 2.0 / (material.sigma * material.sigma) - 2.0;
    // Frame around the mirror direction.
    let helper = if o.x.abs() < 0.7 {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    let t1 = o.cross(helper).normalized();
    let t2 = o.cross(t1);
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(
        seed ^ (px as u64).wrapping_mul(0x9E3779B97F4A7C15) ^ (py as u64) << 32,
    ));
    let mut acc = [0.0f64; 3];
    for _ in 0..samples {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        // Importance sampling of the normalized lobe (p+1)/(2 pi) cos^p.
        let ct = u1.powf(1.0 / (p_exp + 1.0));
        let st = (1.0 - ct * ct).max(0.0).sqrt();
        let phi = 2.0 * std::f64::consts::PI * u2;
        let w = o * ct + t1 * (st * phi.cos()) + t2 * (st * phi.sin());
        if w.dot(n) <= 0.0 {
            continue;
        }
        let radiance = env.sample_bilinear(Direction::from_unit(w.normalized()));
        for c in 0..3 {
            acc[c] += radiance[c] as f64;
        }
    }
    let scale = material.rho_s / samples as f64;
    [
        (acc[0] * scale) as f32,
        (acc[1] * scale) as f32,
        (acc[2] * scale) as f32,
    ]
}

/// Render the composite image and all ground-truth factors for a scene under
/// an environment map. Single light bounce, analytic shadow rays.
pub fn render_full(scene: &SceneDesc, env: &LatLongMap, opts: &RenderOpts) -> Result<RenderOutput> {
    scene.validate()?;
    let intr = scene.camera.intrinsics;
    let pose = scene.camera.pose;
    let (w, h) = (intr.width, intr.height);

    // Coarser quadrature of the environment for the diffuse integral.
    let qw = opts.diffuse_quad_width.max(4);
    let qh = qw / 2;
    let quad = if env.width > qw {
        env.downsample(qw, qh)?
    } else {
        env.clone()
    };
    let table = solid_angles(quad.width, quad.height)?;
    let mut quad_dirs: Vec<(Vec3, f64, [f32; 3])> = Vec::with_capacity(quad.width * quad.height);
    for y in 0..quad.height {
        let dw = table.row_weights[y];
        for x in 0..quad.width {
            let radiance = quad.pixel(x, y);
            if radiance[0] <= 0.0 && radiance[1] <= 0.0 && radiance[2] <= 0.0 {
                continue;
            }
            quad_dirs.push((quad.pixel_dir(x, y).vec(), dw, radiance));
        }
    }

    struct PixelOut {
        depth: f32,
        normal: Option<Vec3>,
        albedo: [f32; 3],
        diffuse: [f32; 3],
        specular: [f32; 3],
    }

    let rows: Vec<Vec<PixelOut>> = (0..h)
        .into_par_iter()
        .map(|py| {
            (0..w)
                .map(|px| {
                    let dir_cam = intr.ray(px as f64, py as f64).normalized();
                    let dir_w = pose.cam_to_world_dir(dir_cam);
                    let Some(hit) = intersect_scene(&scene.primitives, pose.position, dir_w)
                    else {
                        return PixelOut {
                            depth: 0.0,
                            normal: None,
                            albedo: [0.0; 3],
                            diffuse: [0.0; 3],
                            specular: [0.0; 3],
                        };
                    };
                    let prim = &scene.primitives[hit.prim];
                    let albedo = albedo_at(prim, hit.point);
                    let mut diffuse = [0.0f64; 3];
                    for &(l, dw, radiance) in &quad_dirs {
                        let cosine = hit.normal.dot(l);
                        if cosine <= 0.0 {
                            continue;
                        }
                        if occluded(&scene.primitives, hit.prim, hit.point, hit.normal, l) {
                            continue;
                        }
                        let wgt = cosine * dw;
                        diffuse[0] += radiance[0] as f64 * wgt;
                        diffuse[1] += radiance[1] as f64 * wgt;
                        diffuse[2] += radiance[2] as f64 * wgt;
                    }
                    let view_w = -dir_w;
                    let specular = specular_at(
                        &prim.material,
                        hit.normal,
                        view_w,
                        env,
                        opts.seed,
                        px,
                        py,
                        opts.specular_samples,
                    );
                    let n_cam = pose.world_to_cam_dir(hit.normal);
                    PixelOut {
                        depth: (hit.t * dir_cam.z) as f32,
                        normal: Some(n_cam),
                        albedo: [albedo[0] as f32, albedo[1] as f32, albedo[2] as f32],
                        diffuse: [diffuse[0] as f32, diffuse[1] as f32, diffuse[2] as f32],
                        specular,
                    }
                })
                .collect()
        })
        .collect();

    let mut rgb = Image::new(w, h, 3);
    let mut albedo = Image::new(w, h, 3);
    let mut diffuse = Image::new(w, h, 3);
    let mut specular = Image::new(w, h, 3);
    let mut depth = vec![0.0f32; w * h];
    let mut normals = NormalMap::new(w, h);
    for (py, row) in rows.iter().enumerate() {
        for (px, out) in row.iter().enumerate() {
            depth[py * w + px] = out.depth;
            if let Some(n) = out.normal {
                normals.set(px, py, n);
            }
            let a = albedo.pixel_mut(px, py);
            a.copy_from_slice(&out.albedo);
            let d = diffuse.pixel_mut(px, py);
            d.copy_from_slice(&out.diffuse);
            let s = specular.pixel_mut(px, py);
            s.copy_from_slice(&out.specular);
            // Composite from the stored f32 factors so the reconstruction
            // identity holds bitwise.
            let c = rgb.pixel_mut(px, py);
            for i in 0..3 {
                c[i] = out.albedo[i] * out.diffuse[i] + out.specular[i];
            }
        }
    }

    Ok(RenderOutput {
        rgb,
        depth: DepthFrame::new(intr, depth)?,
        albedo,
        diffuse,
        specular,
        normals,
        camera: scene.camera.clone(),
    })
}

/// Specular shading of a measured-style frame: per-pixel mirror lobe of the
/// environment, using depth-derived geometry. Deterministic for a fixed seed.
pub fn render_specular(
    frame: &DepthFrame,
    normals: &NormalMap,
    material: &Material,
    env: &LatLongMap,
    camera: &Camera,
    opts: &RenderOpts,
) -> Result<Image> {
    material.validate()?;
    if normals.width != frame.width() || normals.height != frame.height() {
        return Err(Error::ResolutionMismatch {
            left: format!("{}x{}", frame.width(), frame.height()),
            right: format!("{}x{}", normals.width, normals.height),
            context: "render_specular frame vs normals",
        });
    }
    let (w, h) = (frame.width(), frame.height());
    let rows: Vec<Vec<[f32; 3]>> = (0..h)
        .into_par_iter()
        .map(|py| {
            (0..w)
                .map(|px| {
                    let Some(n_cam) = normals.get(px, py) else {
                        return [0.0; 3];
                    };
                    if !frame.is_valid(px, py) {
                        return [0.0; 3];
                    }
                    let p_cam = unproject(px, py, frame).expect("valid depth");
                    let view_cam = (-p_cam).normalized();
                    let n_w = camera.pose.cam_to_world_dir(n_cam);
                    let v_w = camera.pose.cam_to_world_dir(view_cam);
                    specular_at(
                        material,
                        n_w,
                        v_w,
                        env,
                        opts.seed,
                        px,
                        py,
                        opts.specular_samples,
                    )
                })
                .collect()
        })
        .collect();
    let mut out = Image::new(w, h, 3);
    for (py, row) in rows.iter().enumerate() {
        for (px, rgb) in row.iter().enumerate() {
            out.pixel_mut(px, py).copy_from_slice(rgb);
        }
    }
    Ok(out)
}
