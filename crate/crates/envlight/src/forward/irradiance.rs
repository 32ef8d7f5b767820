//! Per-direction irradiance basis maps: the response of the observed geometry
//! to a unit directional light, v * max(n . l, 0), downsampled to the stack
//! resolution. These maps are both the forward model for diffuse shading and
//! the system matrix of the diffuse inverse problem.

use crate::error::{Error, Result};
use crate::geometry::{DepthFrame, ShadowMarcher};
use crate::image::{Image, NormalMap};
use crate::linalg::Rot3;
use crate::radiometry::{CubeGrid, Direction};
use rayon::prelude::*;

/// How frame pixels are reduced to one stack cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StackSampling {
    /// Average every frame pixel in the cell.
    FullArea,
    /// Average an n x n stratified lattice of pixels per cell. Much cheaper
    /// at high frame resolutions; 3 or 4 is plenty for 32x32 stacks.
    Stratified(usize),
}

impl StackSampling {
    /// Pixel coordinates sampled within the cell at (cx, cy), cells of size
    /// (bw, bh) pixels.
    fn cell_pixels(&self, cx: usize, cy: usize, bw: usize, bh: usize) -> Vec<(usize, usize)> {
        match *self {
            StackSampling::FullArea => (0..bh)
                .flat_map(|sy| (0..bw).map(move |sx| (cx * bw + sx, cy * bh + sy)))
                .collect(),
            StackSampling::Stratified(n) => {
                let n = n.max(1);
                (0..n)
                    .flat_map(|sy| {
                        (0..n).map(move |sx| {
                            (
                                cx * bw + (sx * bw + bw / 2) / n,
                                cy * bh + (sy * bh + bh / 2) / n,
                            )
                        })
                    })
                    .collect()
            }
        }
    }
}

/// Stack of single-channel irradiance maps, one per sampled light direction.
#[derive(Debug, Clone)]
pub struct IrradianceStack {
    pub dirs: CubeGrid,
    /// Edge length of each map.
    pub res: usize,
    /// maps[k][y * res + x] in [0, 1].
    pub maps: Vec<Vec<f32>>,
}

impl IrradianceStack {
    pub fn map(&self, k: usize) -> &[f32] {
        &self.maps[k]
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }
}

/// Render the irradiance stack for a depth frame: for every cube-grid
/// direction, visibility times clamped cosine, averaged into `res` x `res`
/// cells. Invalid pixels contribute zero. `cam_to_world` orients the grid's
/// world directions against the camera-space geometry.
pub fn render_irradiance_stack(
    frame: &DepthFrame,
    normals: &NormalMap,
    dirs: &CubeGrid,
    cam_to_world: &Rot3,
    res: usize,
    sampling: StackSampling,
) -> Result<IrradianceStack> {
    if dirs.is_empty() {
        return Err(Error::contract("cube grid has no directions"));
    }
    let (w, h) = (frame.width(), frame.height());
    if normals.width != w || normals.height != h {
        return Err(Error::ResolutionMismatch {
            left: format!("{}x{}", w, h),
            right: format!("{}x{}", normals.width, normals.height),
            context: "irradiance stack frame vs normals",
        });
    }
    if res == 0 || w % res != 0 || h % res != 0 {
        return Err(Error::ResolutionMismatch {
            left: format!("{}x{}", w, h),
            right: format!("{res}x{res}"),
            context: "frame must be divisible by the stack resolution",
        });
    }
    let (bw, bh) = (w / res, h / res);
    let world_to_cam = cam_to_world.transpose();
    let marcher = ShadowMarcher::new(frame);

    // Geometry shared by all directions: per sampled pixel, its normal and
    // whether it is usable.
    let cells: Vec<Vec<(usize, usize)>> = (0..res * res)
        .map(|i| sampling.cell_pixels(i % res, i / res, bw, bh))
        .collect();
    let samples_per_cell = cells[0].len().max(1);

    let maps: Vec<Vec<f32>> = dirs
        .dirs
        .par_iter()
        .map(|dir_w| {
            let l_cam = Direction::from_unit(world_to_cam.apply(dir_w.vec()).normalized());
            let mut map = vec![0.0f32; res * res];
            for (cell, pixels) in cells.iter().enumerate() {
                let mut acc = 0.0f64;
                for &(px, py) in pixels {
                    let Some(n) = normals.get(px, py) else { continue };
                    if !frame.is_valid(px, py) {
                        continue;
                    }
                    let cosine = n.dot(l_cam.vec());
                    if cosine <= 0.0 {
                        continue;
                    }
                    let vis = marcher.visible(px, py, l_cam).unwrap_or(0);
                    if vis == 1 {
                        acc += cosine;
                    }
                }
                map[cell] = (acc / samples_per_cell as f64) as f32;
            }
            map
        })
        .collect();

    Ok(IrradianceStack {
        dirs: dirs.clone(),
        res,
        maps,
    })
}

/// Weighted sum of irradiance maps: S_d(x, y) = sum_k L_k * R_k(x, y) * dw_k
/// per channel. `light` must carry values for the stack's directions.
pub fn render_diffuse(stack: &IrradianceStack, light: &CubeGrid) -> Result<Image> {
    let values = light
        .values
        .as_ref()
        .ok_or_else(|| Error::contract("light grid has no values"))?;
    if values.len() != stack.len() {
        return Err(Error::ResolutionMismatch {
            left: format!("{} stack maps", stack.len()),
            right: format!("{} light values", values.len()),
            context: "render_diffuse",
        });
    }
    let res = stack.res;
    let mut acc = vec![0.0f64; res * res * 3];
    for (k, map) in stack.maps.iter().enumerate() {
        let dw = stack.dirs.solid_angles[k];
        let lv = values[k];
        for (i, &r) in map.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            let r = r as f64 * dw;
            acc[i * 3] += lv[0] * r;
            acc[i * 3 + 1] += lv[1] * r;
            acc[i * 3 + 2] += lv[2] * r;
        }
    }
    Image::from_data(res, res, 3, acc.into_iter().map(|v| v as f32).collect())
}

/// Reduce a frame-resolution image to the stack resolution with the same cell
/// sampling used for [`render_irradiance_stack`], keeping the forward model
/// and the observed shading consistent.
pub fn downsample_cells(img: &Image, res: usize, sampling: StackSampling) -> Result<Image> {
    if res == 0 || img.width % res != 0 || img.height % res != 0 {
        return Err(Error::ResolutionMismatch {
            left: format!("{}x{}", img.width, img.height),
            right: format!("{res}x{res}"),
            context: "image must be divisible by the cell resolution",
        });
    }
    let (bw, bh) = (img.width / res, img.height / res);
    let mut out = Image::new(res, res, img.channels);
    for cy in 0..res {
        for cx in 0..res {
            let pixels = sampling.cell_pixels(cx, cy, bw, bh);
            let inv = 1.0 / pixels.len() as f64;
            for c in 0..img.channels {
                let mut acc = 0.0f64;
                for &(px, py) in &pixels {
                    acc += img.pixel(px, py)[c] as f64;
                }
                out.pixel_mut(cx, cy)[c] = (acc * inv) as f32;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Intrinsics;
    use crate::radiometry::cube_dirs;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn plane_frame(n: usize, depth: f32) -> DepthFrame {
        let intr = Intrinsics::from_fov(n, 60f64.to_radians());
        DepthFrame::new(intr, vec![depth; n * n]).unwrap()
    }

    #[test]
    fn fronto_parallel_plane_toward_camera_is_one() {
        let n = 64;
        let frame = plane_frame(n, 2.0);
        let normals = crate::geometry::normals_from_depth(&frame);
        // Single direction pointing at the camera (camera space -z == world
        // identity here).
        let mut grid = cube_dirs(1).unwrap();
        grid.dirs = vec![Direction::new(0.0, 0.0, -1.0).unwrap()];
        grid.solid_angles = vec![1.0];
        let stack = render_irradiance_stack(
            &frame,
            &normals,
            &grid,
            &Rot3::IDENTITY,
            32,
            StackSampling::Stratified(2),
        )
        .unwrap();
        // Interior cells: all sampled pixels valid, n.l = 1, unoccluded.
        for cy in 2..30 {
            for cx in 2..30 {
                let v = stack.maps[0][cy * 32 + cx];
                assert!((v - 1.0).abs() < 1e-4, "cell ({cx},{cy}) = {v}");
            }
        }
    }

    #[test]
    fn tangent_direction_is_zero() {
        let n = 64;
        let frame = plane_frame(n, 2.0);
        let normals = crate::geometry::normals_from_depth(&frame);
        let mut grid = cube_dirs(1).unwrap();
        grid.dirs = vec![Direction::new(1.0, 0.0, 0.0).unwrap()];
        grid.solid_angles = vec![1.0];
        let stack = render_irradiance_stack(
            &frame,
            &normals,
            &grid,
            &Rot3::IDENTITY,
            32,
            StackSampling::Stratified(2),
        )
        .unwrap();
        assert!(stack.maps[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stack_values_stay_in_unit_interval() {
        let n = 64;
        let frame = plane_frame(n, 1.5);
        let normals = crate::geometry::normals_from_depth(&frame);
        let grid = cube_dirs(4).unwrap();
        let stack = render_irradiance_stack(
            &frame,
            &normals,
            &grid,
            &Rot3::yaw(0.4),
            32,
            StackSampling::Stratified(3),
        )
        .unwrap();
        for map in &stack.maps {
            assert!(map.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn render_diffuse_zero_light_is_zero() {
        let n = 64;
        let frame = plane_frame(n, 2.0);
        let normals = crate::geometry::normals_from_depth(&frame);
        let grid = cube_dirs(2).unwrap();
        let stack = render_irradiance_stack(
            &frame,
            &normals,
            &grid,
            &Rot3::IDENTITY,
            32,
            StackSampling::Stratified(2),
        )
        .unwrap();
        let light = grid.with_values(vec![[0.0; 3]; grid.len()]).unwrap();
        let img = render_diffuse(&stack, &light).unwrap();
        assert!(img.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn render_diffuse_single_basis_response() {
        let n = 64;
        let frame = plane_frame(n, 2.0);
        let normals = crate::geometry::normals_from_depth(&frame);
        let grid = cube_dirs(2).unwrap();
        let stack = render_irradiance_stack(
            &frame,
            &normals,
            &grid,
            &Rot3::IDENTITY,
            32,
            StackSampling::Stratified(2),
        )
        .unwrap();
        let k = 21; // arbitrary
        let c = 2.5f64;
        let mut values = vec![[0.0; 3]; grid.len()];
        values[k] = [c, c, c];
        let light = grid.with_values(values).unwrap();
        let img = render_diffuse(&stack, &light).unwrap();
        for (i, &r) in stack.maps[k].iter().enumerate() {
            let expected = (c * r as f64 * grid.solid_angles[k]) as f32;
            assert_eq!(img.data[i * 3], expected);
        }
    }

    #[test]
    fn render_diffuse_is_linear() {
        let n = 64;
        let frame = plane_frame(n, 2.0);
        let normals = crate::geometry::normals_from_depth(&frame);
        let grid = cube_dirs(3).unwrap();
        let stack = render_irradiance_stack(
            &frame,
            &normals,
            &grid,
            &Rot3::yaw(1.0),
            32,
            StackSampling::Stratified(2),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rand_values = |rng: &mut ChaCha8Rng| {
            (0..grid.len())
                .map(|_| {
                    [
                        rng.gen_range(0.0..1.0),
                        rng.gen_range(0.0..1.0),
                        rng.gen_range(0.0..1.0),
                    ]
                })
                .collect::<Vec<[f64; 3]>>()
        };
        let l1 = rand_values(&mut rng);
        let l2 = rand_values(&mut rng);
        let (alpha, beta) = (0.7f64, 1.3f64);
        let combo: Vec<[f64; 3]> = l1
            .iter()
            .zip(l2.iter())
            .map(|(a, b)| {
                [
                    alpha * a[0] + beta * b[0],
                    alpha * a[1] + beta * b[1],
                    alpha * a[2] + beta * b[2],
                ]
            })
            .collect();
        let img1 = render_diffuse(&stack, &grid.with_values(l1).unwrap()).unwrap();
        let img2 = render_diffuse(&stack, &grid.with_values(l2).unwrap()).unwrap();
        let img_combo = render_diffuse(&stack, &grid.with_values(combo).unwrap()).unwrap();
        for i in 0..img_combo.data.len() {
            let lin = alpha * img1.data[i] as f64 + beta * img2.data[i] as f64;
            assert!(
                (img_combo.data[i] as f64 - lin).abs() < 1e-6,
                "element {i}: {} vs {}",
                img_combo.data[i],
                lin
            );
        }
    }

    #[test]
    fn downsample_cells_matches_full_area_on_constant() {
        let img = Image::constant(64, 64, 3, 0.7);
        let a = downsample_cells(&img, 32, StackSampling::FullArea).unwrap();
        let b = downsample_cells(&img, 32, StackSampling::Stratified(2)).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn resolution_mismatch_is_rejected() {
        let n = 60; // not divisible by 32
        let frame = plane_frame(n, 2.0);
        let normals = crate::geometry::normals_from_depth(&frame);
        let grid = cube_dirs(2).unwrap();
        assert!(render_irradiance_stack(
            &frame,
            &normals,
            &grid,
            &Rot3::IDENTITY,
            32,
            StackSampling::FullArea,
        )
        .is_err());
    }
}
