//! End-to-end estimation: decompose the frame, invert diffuse shading into
//! cube-grid intensities, project specular shading along mirror directions,
//! and fuse both angular estimates into one environment map.

use crate::decompose::{decompose_dichromatic, decompose_gt, Decomposition};
use crate::error::{Error, Result};
use crate::forward::{
    render_irradiance_stack, Camera, RenderOutput, StackSampling,
};
use crate::fuse::fuse;
use crate::geometry::{bilateral_depth, normals_from_depth, DepthFrame, Intrinsics};
use crate::image::{Image, NormalMap};
use crate::io::RunConfig;
use crate::radiometry::{cube_dirs, cube_to_latlong, LatLongMap};
use crate::translate::{project_specular, solve_diffuse, DiffuseSolve, SparseAngularMap};

/// Everything the estimator produces for one frame, including the
/// intermediate angular estimates for diagnostics and ablations.
#[derive(Debug, Clone)]
pub struct EstimateOutput {
    /// Fused environment estimate, world frame.
    pub env: LatLongMap,
    /// Diffuse-only estimate (cube inversion upsampled to lat-long).
    pub diffuse_env: LatLongMap,
    /// Specular observation map.
    pub spec: SparseAngularMap,
    /// Solver diagnostics (residuals, objective traces).
    pub solve: DiffuseSolve,
    /// Reconstruction residual reported by the decomposition.
    pub decomposition_residual: f64,
}

fn crop_image(img: &Image, x0: usize, y0: usize, size: usize) -> Image {
    let mut out = Image::new(size, size, img.channels);
    for y in 0..size {
        for x in 0..size {
            let src = img.pixel(x0 + x, y0 + y);
            out.pixel_mut(x, y).copy_from_slice(src);
        }
    }
    out
}

fn crop_normals(n: &NormalMap, x0: usize, y0: usize, size: usize) -> NormalMap {
    let mut out = NormalMap::new(size, size);
    for y in 0..size {
        for x in 0..size {
            let i_src = (y0 + y) * n.width + (x0 + x);
            let i_dst = y * size + x;
            out.normals[i_dst] = n.normals[i_src];
            out.valid[i_dst] = n.valid[i_src];
        }
    }
    out
}

/// Stride-decimate a frame and its normals for the visibility marches. The
/// irradiance maps live at a much coarser grid, so shadowing against a
/// moderate-resolution heightfield loses nothing visible there.
fn decimate_for_stack(
    frame: &DepthFrame,
    normals: &NormalMap,
    max_res: usize,
) -> Result<(DepthFrame, NormalMap)> {
    let size = frame.width();
    if size <= max_res {
        return Ok((frame.clone(), normals.clone()));
    }
    let factor = size.div_ceil(max_res);
    let out_size = size / factor;
    let mut depth = vec![0.0f32; out_size * out_size];
    let mut out_normals = NormalMap::new(out_size, out_size);
    for y in 0..out_size {
        for x in 0..out_size {
            let (sx, sy) = (x * factor, y * factor);
            depth[y * out_size + x] = frame.at(sx, sy);
            let i_src = sy * size + sx;
            let i_dst = y * out_size + x;
            out_normals.normals[i_dst] = normals.normals[i_src];
            out_normals.valid[i_dst] = normals.valid[i_src];
        }
    }
    let old = &frame.intrinsics;
    let f = factor as f64;
    let intr = Intrinsics {
        fx: old.fx / f,
        fy: old.fy / f,
        cx: old.cx / f,
        cy: old.cy / f,
        width: out_size,
        height: out_size,
    };
    Ok((DepthFrame::new(intr, depth)?, out_normals))
}

fn crop_depth(frame: &DepthFrame, x0: usize, y0: usize, size: usize) -> Result<DepthFrame> {
    let mut depth = vec![0.0f32; size * size];
    for y in 0..size {
        for x in 0..size {
            depth[y * size + x] = frame.at(x0 + x, y0 + y);
        }
    }
    let old = &frame.intrinsics;
    let intr = Intrinsics {
        fx: old.fx,
        fy: old.fy,
        cx: old.cx - x0 as f64,
        cy: old.cy - y0 as f64,
        width: size,
        height: size,
        ..*old
    };
    DepthFrame::new(intr, depth)
}

/// Inputs of a single-frame estimate. The camera pose orients the estimate in
/// the world; with ground-truth decomposition attached the decomposition
/// stage becomes a pass-through.
pub struct EstimateInput<'a> {
    pub rgb: &'a Image,
    pub depth: &'a DepthFrame,
    pub camera: &'a Camera,
    pub gt: Option<&'a RenderOutput>,
}

impl<'a> EstimateInput<'a> {
    pub fn from_render(render: &'a RenderOutput) -> EstimateInput<'a> {
        EstimateInput {
            rgb: &render.rgb,
            depth: &render.depth,
            camera: &render.camera,
            gt: Some(render),
        }
    }

    pub fn measured(
        rgb: &'a Image,
        depth: &'a DepthFrame,
        camera: &'a Camera,
    ) -> EstimateInput<'a> {
        EstimateInput {
            rgb,
            depth,
            camera,
            gt: None,
        }
    }
}

/// Full single-frame pipeline: crop, filter, decompose, translate, fuse.
pub fn estimate(input: &EstimateInput, cfg: &RunConfig) -> Result<EstimateOutput> {
    cfg.validate()?;
    let (w, h) = (input.depth.width(), input.depth.height());
    if input.rgb.width != w || input.rgb.height != h {
        return Err(Error::ResolutionMismatch {
            left: input.rgb.shape_string(),
            right: format!("{w}x{h}"),
            context: "estimate rgb vs depth",
        });
    }

    // Central crop of oversized frames. The working size must tile into the
    // irradiance grid.
    let size = cfg.crop.min(w).min(h);
    let size = (size / cfg.irradiance_res) * cfg.irradiance_res;
    if size == 0 {
        return Err(Error::contract(format!(
            "frame {w}x{h} is smaller than one irradiance cell"
        )));
    }
    let x0 = (w - size) / 2;
    let y0 = (h - size) / 2;

    let rgb = crop_image(input.rgb, x0, y0, size);
    let depth_raw = crop_depth(input.depth, x0, y0, size)?;
    let camera = Camera {
        intrinsics: depth_raw.intrinsics,
        pose: input.camera.pose,
    };

    let depth = bilateral_depth(
        &depth_raw,
        cfg.bilateral_sigma_space,
        cfg.bilateral_sigma_range,
    )?;

    let decomp: Decomposition = match input.gt {
        Some(render) => {
            let d = decompose_gt(render);
            let normals = crop_normals(&d.normals, x0, y0, size);
            let valid = normals.valid.clone();
            Decomposition {
                albedo: crop_image(&d.albedo, x0, y0, size),
                diffuse_shading: crop_image(&d.diffuse_shading, x0, y0, size),
                specular_shading: crop_image(&d.specular_shading, x0, y0, size),
                normals,
                valid,
                reconstruction_residual: 0.0,
            }
        }
        None => {
            let normals = normals_from_depth(&depth);
            decompose_dichromatic(&rgb, &normals)?
        }
    };

    let dirs = cube_dirs(cfg.cube_face_res)?;
    let sampling = StackSampling::Stratified(cfg.stack_samples_per_cell);
    let (stack_depth, stack_normals) =
        decimate_for_stack(&depth, &decomp.normals, cfg.stack_frame_res)?;
    let stack = render_irradiance_stack(
        &stack_depth,
        &stack_normals,
        &dirs,
        &camera.pose.rotation,
        cfg.irradiance_res,
        sampling,
    )?;
    let shading = crate::forward::downsample_cells(
        &decomp.diffuse_shading,
        cfg.irradiance_res,
        sampling,
    )?;

    let solve = solve_diffuse(&shading, &stack, &cfg.solver)?;
    let diffuse_env = cube_to_latlong(&solve.light, cfg.env_width, cfg.env_height)?;

    let spec = project_specular(&decomp, &depth, &camera, cfg.env_width, cfg.env_height)?;
    let env = fuse(&diffuse_env, &spec, &cfg.fusion)?;

    Ok(EstimateOutput {
        env,
        diffuse_env,
        spec,
        solve,
        decomposition_residual: decomp.reconstruction_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{
        disk_light_env, gen_test_scene, render_full, Material, RenderOpts, ScenePreset,
    };
    use crate::metrics::{light_rmse, render_rmse, ProbeSet};
    use crate::radiometry::Direction;

    fn small_config() -> RunConfig {
        RunConfig {
            crop: 128,
            ..RunConfig::default()
        }
    }

    #[test]
    fn gt_round_trip_beats_black_estimate() {
        let scene = gen_test_scene(ScenePreset::SphereOnPlane, &Material::diffuse([0.8; 3]), 5)
            .unwrap()
            .with_resolution(128);
        let env = disk_light_env(
            Direction::new(0.3, -0.4, 0.87).unwrap(),
            0.3,
            [1.0, 0.9, 0.8],
            0.05,
            256,
            128,
        )
        .unwrap();
        let render = render_full(&scene, &env, &RenderOpts::default()).unwrap();
        let out = estimate(&EstimateInput::from_render(&render), &small_config()).unwrap();
        let probes = ProbeSet::quick();
        let err_est = render_rmse(&out.env, &env, &probes).unwrap();
        let black = LatLongMap::zeros(256, 128).unwrap();
        let err_black = render_rmse(&black, &env, &probes).unwrap();
        assert!(
            err_est < 0.5 * err_black,
            "estimate {err_est} vs black {err_black}"
        );
    }

    #[test]
    fn estimate_is_deterministic() {
        let scene = gen_test_scene(
            ScenePreset::BoxOnPlane,
            &Material {
                rho_d: [0.5, 0.5, 0.5],
                rho_s: 0.3,
                sigma: 0.06,
            },
            9,
        )
        .unwrap()
        .with_resolution(128);
        let env = disk_light_env(
            Direction::new(-0.2, 0.3, 0.93).unwrap(),
            0.2,
            [1.2, 1.2, 1.2],
            0.05,
            256,
            128,
        )
        .unwrap();
        let render = render_full(&scene, &env, &RenderOpts::default()).unwrap();
        let a = estimate(&EstimateInput::from_render(&render), &small_config()).unwrap();
        let b = estimate(&EstimateInput::from_render(&render), &small_config()).unwrap();
        assert_eq!(a.env.data, b.env.data);
    }

    #[test]
    fn measured_mode_runs_the_dichromatic_path() {
        let scene = gen_test_scene(ScenePreset::SphereOnPlane, &Material::diffuse([0.7, 0.3, 0.2]), 2)
            .unwrap()
            .with_resolution(128);
        let env = disk_light_env(
            Direction::new(0.1, 0.2, 0.97).unwrap(),
            0.25,
            [1.0, 1.0, 1.0],
            0.05,
            256,
            128,
        )
        .unwrap();
        let render = render_full(&scene, &env, &RenderOpts::default()).unwrap();
        let input = EstimateInput::measured(&render.rgb, &render.depth, &render.camera);
        let out = estimate(&input, &small_config()).unwrap();
        // Sanity: the estimate has energy and is not wildly off the GT scale.
        let rmse = light_rmse(&out.env, &env).unwrap();
        assert!(out.env.energy() > 0.0);
        assert!(rmse.is_finite());
    }

    #[test]
    fn mismatched_rgb_depth_is_rejected() {
        let scene = gen_test_scene(ScenePreset::SphereOnPlane, &Material::diffuse([0.5; 3]), 1)
            .unwrap()
            .with_resolution(64);
        let env = LatLongMap::constant(64, 32, 0.5).unwrap();
        let render = render_full(&scene, &env, &RenderOpts::default()).unwrap();
        let bad_rgb = Image::new(32, 32, 3);
        let input = EstimateInput {
            rgb: &bad_rgb,
            depth: &render.depth,
            camera: &render.camera,
            gt: None,
        };
        assert!(estimate(&input, &small_config()).is_err());
    }
}
