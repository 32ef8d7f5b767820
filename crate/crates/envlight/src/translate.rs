//! Spatial-to-angular translation: recover cube-grid light intensities from
//! diffuse shading by regularized non-negative least squares, and project
//! specular shading into a sparse lat-long observation map along per-pixel
//! mirror directions.

use crate::decompose::Decomposition;
use crate::error::{Error, Result};
use crate::forward::{Camera, IrradianceStack};
use crate::geometry::{mirror_direction, unproject, DepthFrame};
use crate::image::Image;
use crate::radiometry::{containing_bin, dir_to_latlong, CubeGrid, Direction};

/// Knobs of the diffuse inverse solve.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct DiffuseSolveConfig {
    /// Tikhonov weight, relative to unit-normalized system columns.
    pub lambda: f64,
    pub max_iter: usize,
    /// Relative objective-decrease stopping threshold.
    pub tol: f64,
    /// Project iterates onto the non-negative orthant.
    pub nonneg: bool,
}

impl Default for DiffuseSolveConfig {
    fn default() -> Self {
        DiffuseSolveConfig {
            lambda: 1e-3,
            max_iter: 500,
            tol: 1e-6,
            nonneg: true,
        }
    }
}

/// Solution of one non-negative least-squares instance.
#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    /// Final ||A x - s||.
    pub residual: f64,
    /// Objective ||A x - s||^2 + lambda ||x||^2 per accepted iterate;
    /// non-increasing by construction.
    pub trace: Vec<f64>,
}

/// Result of [`solve_diffuse`]: recovered light plus per-channel diagnostics.
#[derive(Debug, Clone)]
pub struct DiffuseSolve {
    /// The stack's cube grid with recovered RGB intensities.
    pub light: CubeGrid,
    pub residuals: [f64; 3],
    pub traces: [Vec<f64>; 3],
}

/// Dense symmetric matrix in row-major order.
struct Gram {
    n: usize,
    data: Vec<f64>,
}

impl Gram {
    fn from_columns(cols: &[Vec<f64>]) -> Gram {
        use rayon::prelude::*;
        let n = cols.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; n];
                for j in i..n {
                    let dot = cols[i]
                        .iter()
                        .zip(cols[j].iter())
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
                    row[j] = dot;
                }
                row
            })
            .collect();
        let mut data = vec![0.0; n * n];
        for (i, row) in rows.iter().enumerate() {
            for j in i..n {
                data[i * n + j] = row[j];
                data[j * n + i] = row[j];
            }
        }
        Gram { n, data }
    }

    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            out[i] = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        }
    }

    /// Largest eigenvalue by power iteration.
    fn spectral_norm(&self) -> f64 {
        let mut v = vec![1.0 / (self.n as f64).sqrt(); self.n];
        let mut tmp = vec![0.0; self.n];
        let mut lambda = 0.0;
        for _ in 0..64 {
            self.matvec(&v, &mut tmp);
            let norm = tmp.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-300 {
                return 0.0;
            }
            for (vi, ti) in v.iter_mut().zip(tmp.iter()) {
                *vi = ti / norm;
            }
            lambda = norm;
        }
        lambda
    }
}

/// min_x ||A x - s||^2 + lambda_eff ||x||^2, optionally over x >= 0, by
/// monotone accelerated projected gradient. `lambda` is scaled by the mean
/// squared column norm so its meaning is stable across problem scalings.
pub fn nnls(columns: &[Vec<f64>], rhs: &[f64], cfg: &DiffuseSolveConfig) -> Result<NnlsSolution> {
    let n = columns.len();
    if n == 0 {
        return Err(Error::DegenerateSystem("no system columns".into()));
    }
    let m = rhs.len();
    for (k, col) in columns.iter().enumerate() {
        if col.len() != m {
            return Err(Error::contract(format!(
                "column {k} has {} rows, expected {m}",
                col.len()
            )));
        }
    }
    let mean_col_sq = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        / n as f64;
    if mean_col_sq <= 0.0 {
        return Err(Error::DegenerateSystem(
            "all system columns are zero (black irradiance stack)".into(),
        ));
    }
    let lambda = cfg.lambda * mean_col_sq;

    let gram = Gram::from_columns(columns);
    let mut b = vec![0.0; n];
    for (k, col) in columns.iter().enumerate() {
        b[k] = col.iter().zip(rhs.iter()).map(|(a, s)| a * s).sum();
    }
    let s_sq: f64 = rhs.iter().map(|v| v * v).sum();
    let lip = 2.0 * (gram.spectral_norm() + lambda);

    // Objective f(x) = xT G x - 2 xT b + ||s||^2 + lambda ||x||^2.
    let mut gx = vec![0.0; n];
    let objective = |gram: &Gram, x: &[f64], gx: &mut Vec<f64>| -> f64 {
        gram.matvec(x, gx);
        let xgx: f64 = x.iter().zip(gx.iter()).map(|(a, b)| a * b).sum();
        let xb: f64 = x.iter().zip(b.iter()).map(|(a, b)| a * b).sum();
        let xx: f64 = x.iter().map(|v| v * v).sum();
        xgx - 2.0 * xb + s_sq + lambda * xx
    };

    let mut x = vec![0.0; n];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut f_x = objective(&gram, &x, &mut gx);
    let mut trace = vec![f_x];
    let f0 = f_x.max(1e-300);

    let mut gy = vec![0.0; n];
    // A monotone accelerated step can reject its candidate while the momentum
    // point still moves, so convergence is declared only after several
    // consecutive iterations without meaningful progress.
    let mut stall = 0usize;
    for _ in 0..cfg.max_iter {
        gram.matvec(&y, &mut gy);
        // z = proj(y - step * grad(y)), grad = 2 (G y - b + lambda y).
        let step = 1.0 / lip.max(1e-300);
        let mut z = vec![0.0; n];
        for i in 0..n {
            let g = 2.0 * (gy[i] - b[i] + lambda * y[i]);
            let v = y[i] - step * g;
            z[i] = if cfg.nonneg { v.max(0.0) } else { v };
        }
        let f_z = objective(&gram, &z, &mut gx);
        // Monotone step with momentum restart: a rejected candidate means the
        // momentum overshot, so acceleration starts over from the best
        // iterate. Restarting recovers fast convergence on ill-conditioned
        // systems where plain acceleration oscillates.
        let delta;
        if f_z <= f_x {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            for i in 0..n {
                y[i] = z[i] + ((t - 1.0) / t_next) * (z[i] - x[i]);
            }
            delta = f_x - f_z;
            x = z;
            f_x = f_z;
            t = t_next;
        } else {
            y.copy_from_slice(&x);
            t = 1.0;
            delta = 0.0;
        }
        trace.push(f_x);
        if delta <= cfg.tol * f0 {
            stall += 1;
            if stall >= 8 {
                break;
            }
        } else {
            stall = 0;
        }
    }

    let res_sq = (f_x - lambda * x.iter().map(|v| v * v).sum::<f64>()).max(0.0);
    Ok(NnlsSolution {
        x,
        residual: res_sq.sqrt(),
        trace,
    })
}

/// Spectral condition number estimate of the system matrix, via a Jacobi
/// eigenvalue sweep of its Gram matrix. Intended for the modest grid sizes
/// used by the recovery checks.
pub fn gram_condition(columns: &[Vec<f64>]) -> Result<f64> {
    let n = columns.len();
    if n == 0 {
        return Err(Error::DegenerateSystem("no system columns".into()));
    }
    let gram = Gram::from_columns(columns);
    let mut a = gram.data.clone();
    for _ in 0..30 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() < 1e-12 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut min_ev = f64::MAX;
    let mut max_ev = f64::MIN;
    for i in 0..n {
        min_ev = min_ev.min(a[i * n + i]);
        max_ev = max_ev.max(a[i * n + i]);
    }
    if min_ev <= 0.0 {
        return Ok(f64::INFINITY);
    }
    // Condition of A is the square root of the Gram eigenvalue ratio.
    Ok((max_ev / min_ev).sqrt())
}

/// System columns of the diffuse inverse problem: vec(R_k) * dw_k.
pub fn stack_columns(stack: &IrradianceStack) -> Vec<Vec<f64>> {
    stack
        .maps
        .iter()
        .enumerate()
        .map(|(k, map)| {
            let dw = stack.dirs.solid_angles[k];
            map.iter().map(|&r| r as f64 * dw).collect()
        })
        .collect()
}

/// Recover per-direction light intensities from a diffuse shading image at
/// the stack resolution. One solve per color channel.
pub fn solve_diffuse(
    shading: &Image,
    stack: &IrradianceStack,
    cfg: &DiffuseSolveConfig,
) -> Result<DiffuseSolve> {
    if stack.is_empty() {
        return Err(Error::DegenerateSystem("empty irradiance stack".into()));
    }
    if shading.width != stack.res || shading.height != stack.res || shading.channels != 3 {
        return Err(Error::ResolutionMismatch {
            left: shading.shape_string(),
            right: format!("{0}x{0}x3", stack.res),
            context: "solve_diffuse shading vs stack",
        });
    }
    let columns = stack_columns(stack);
    let m = stack.res * stack.res;
    let mut values = vec![[0.0f64; 3]; stack.len()];
    let mut residuals = [0.0f64; 3];
    let mut traces: [Vec<f64>; 3] = Default::default();
    for ch in 0..3 {
        let rhs: Vec<f64> = (0..m).map(|i| shading.data[i * 3 + ch] as f64).collect();
        let sol = nnls(&columns, &rhs, cfg)?;
        for (v, xk) in values.iter_mut().zip(sol.x.iter()) {
            v[ch] = *xk;
        }
        residuals[ch] = sol.residual;
        traces[ch] = sol.trace;
    }
    Ok(DiffuseSolve {
        light: stack.dirs.with_values(values)?,
        residuals,
        traces,
    })
}

/// Lat-long accumulation of specular observations plus a validity mask.
#[derive(Debug, Clone)]
pub struct SparseAngularMap {
    pub width: usize,
    pub height: usize,
    /// Mean observed radiance per bin; zero at invalid bins.
    pub values: Vec<[f64; 3]>,
    /// Contributing pixels per bin.
    pub counts: Vec<u32>,
    /// mask[i] is true exactly when counts[i] > 0.
    pub mask: Vec<bool>,
}

impl SparseAngularMap {
    pub fn empty(width: usize, height: usize) -> SparseAngularMap {
        SparseAngularMap {
            width,
            height,
            values: vec![[0.0; 3]; width * height],
            counts: vec![0; width * height],
            mask: vec![false; width * height],
        }
    }

    pub fn valid_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Brightest valid bin by channel sum, if any bin is valid.
    pub fn argmax_valid(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.values.iter().enumerate() {
            if self.counts[i] == 0 {
                continue;
            }
            let s = v[0] + v[1] + v[2];
            if best.map_or(true, |(_, bv)| s > bv) {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| (i % self.width, i / self.width))
    }
}

/// Minimum n.v for a pixel's mirror direction to be considered reliable.
const MIRROR_NDOTV_MIN: f64 = 1e-4;

/// Map decomposed specular shading into the angular domain: every valid pixel
/// with nonzero specular accumulates its RGB into the lat-long bin containing
/// its world-space mirror direction; bins average their contributions.
/// Accumulation order is row-major, so results are deterministic.
pub fn project_specular(
    decomp: &Decomposition,
    frame: &DepthFrame,
    camera: &Camera,
    out_w: usize,
    out_h: usize,
) -> Result<SparseAngularMap> {
    if out_h == 0 || out_w != 2 * out_h {
        return Err(Error::contract(format!(
            "angular map must be 2:1, got {out_w}x{out_h}"
        )));
    }
    let (w, h) = (frame.width(), frame.height());
    if decomp.specular_shading.width != w || decomp.specular_shading.height != h {
        return Err(Error::ResolutionMismatch {
            left: decomp.specular_shading.shape_string(),
            right: format!("{w}x{h}"),
            context: "project_specular decomposition vs frame",
        });
    }
    let mut sums = vec![[0.0f64; 3]; out_w * out_h];
    let mut counts = vec![0u32; out_w * out_h];
    for py in 0..h {
        for px in 0..w {
            let spec = decomp.specular_shading.pixel(px, py);
            if spec[0] <= 0.0 && spec[1] <= 0.0 && spec[2] <= 0.0 {
                continue;
            }
            let Some(n_cam) = decomp.normals.get(px, py) else {
                continue;
            };
            if !frame.is_valid(px, py) {
                continue;
            }
            let p_cam = unproject(px, py, frame)?;
            let view = (-p_cam).normalized();
            if n_cam.dot(view) <= MIRROR_NDOTV_MIN {
                continue;
            }
            let o_cam = mirror_direction(Direction::from_unit(n_cam), Direction::from_unit(view))?;
            let o_world = camera.pose.cam_to_world_dir(o_cam.vec());
            let (u, v) = dir_to_latlong(Direction::from_unit(o_world.normalized()), out_w, out_h);
            let (bx, by) = containing_bin(u, v, out_w, out_h);
            let i = by * out_w + bx;
            for c in 0..3 {
                sums[i][c] += spec[c] as f64;
            }
            counts[i] += 1;
        }
    }
    let mut values = vec![[0.0f64; 3]; out_w * out_h];
    let mut mask = vec![false; out_w * out_h];
    for i in 0..values.len() {
        if counts[i] > 0 {
            let inv = 1.0 / counts[i] as f64;
            for c in 0..3 {
                values[i][c] = sums[i][c] * inv;
            }
            mask[i] = true;
        }
    }
    Ok(SparseAngularMap {
        width: out_w,
        height: out_h,
        values,
        counts,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::decompose_gt;
    use crate::forward::{
        disk_light_env, gen_test_scene, render_full, render_irradiance_stack, Material,
        RenderOpts, ScenePreset, StackSampling,
    };
    use crate::geometry::{normals_from_depth, Intrinsics};
    use crate::image::NormalMap;
    use crate::linalg::{Rot3, Vec3};
    use crate::radiometry::{cube_dirs, LatLongMap};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_system_closed_form() {
        let cfg = DiffuseSolveConfig {
            lambda: 0.1,
            ..DiffuseSolveConfig::default()
        };
        let cols = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let sol = nnls(&cols, &[3.0, 5.0], &cfg).unwrap();
        // Unit columns make lambda_eff == lambda; ridge solution s/(1+lambda).
        assert!((sol.x[0] - 3.0 / 1.1).abs() < 1e-6, "{:?}", sol.x);
        assert!((sol.x[1] - 5.0 / 1.1).abs() < 1e-6);
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let cols = vec![vec![0.3, 0.1, 0.0], vec![0.2, 0.9, 0.4]];
        let sol = nnls(&cols, &[0.0, 0.0, 0.0], &DiffuseSolveConfig::default()).unwrap();
        assert!(sol.x.iter().all(|&v| v == 0.0));
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn all_zero_columns_are_degenerate() {
        let cols = vec![vec![0.0; 4], vec![0.0; 4]];
        assert!(matches!(
            nnls(&cols, &[1.0; 4], &DiffuseSolveConfig::default()),
            Err(Error::DegenerateSystem(_))
        ));
    }

    #[test]
    fn objective_trace_is_monotone_and_descends() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let m = rng.gen_range(4..16);
            let n = rng.gen_range(2..8);
            let cols: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let rhs: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.2..1.0)).collect();
            let sol = nnls(&cols, &rhs, &DiffuseSolveConfig::default()).unwrap();
            for w in sol.trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "objective increased: {w:?}");
            }
            // Residual never exceeds the zero-solution residual.
            let res0 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(sol.residual <= res0 + 1e-9);
            assert!(sol.x.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn larger_lambda_never_grows_the_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..25 {
            let m = rng.gen_range(6..20);
            let n = rng.gen_range(2..6);
            let cols: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let rhs: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let norm = |cfg_lambda: f64| {
                // Converge tightly; the monotonicity statement is about
                // minimizers, not early-stopped iterates.
                let cfg = DiffuseSolveConfig {
                    lambda: cfg_lambda,
                    max_iter: 4000,
                    tol: 1e-14,
                    nonneg: true,
                };
                let sol = nnls(&cols, &rhs, &cfg).unwrap();
                sol.x.iter().map(|v| v * v).sum::<f64>().sqrt()
            };
            let n1 = norm(1e-4);
            let n2 = norm(1e-2);
            let n3 = norm(1.0);
            assert!(n2 <= n1 + 1e-5, "{n1} -> {n2}");
            assert!(n3 <= n2 + 1e-5, "{n2} -> {n3}");
        }
    }

    #[test]
    fn recovers_sparse_light_from_true_stack() {
        // Forward-render a stack, keep the observable well-conditioned
        // subsystem, synthesize shading from a sparse light, and invert.
        let scene = gen_test_scene(ScenePreset::SphereOnPlane, &Material::diffuse([0.8; 3]), 1)
            .unwrap()
            .with_resolution(64);
        let env = LatLongMap::zeros(32, 16).unwrap();
        let out = render_full(&scene, &env, &RenderOpts::default()).unwrap();
        let normals = normals_from_depth(&out.depth);
        let grid = cube_dirs(3).unwrap();
        let stack = render_irradiance_stack(
            &out.depth,
            &normals,
            &grid,
            &scene.camera.pose.rotation,
            32,
            StackSampling::Stratified(3),
        )
        .unwrap();
        let cols = stack_columns(&stack);
        // Directions the scene barely responds to are not recoverable; the
        // exactness claim concerns the observable full-rank subsystem.
        let max_norm = cols
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max);
        let obs_cols: Vec<Vec<f64>> = cols
            .into_iter()
            .filter(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt() > 0.1 * max_norm)
            .collect();
        let cond = gram_condition(&obs_cols).unwrap();
        assert!(cond < 1e3, "gram condition {cond}");

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = obs_cols[0].len();
        let mut truth = vec![0.0f64; obs_cols.len()];
        for _ in 0..3 {
            truth[rng.gen_range(0..obs_cols.len())] = rng.gen_range(0.5..2.0);
        }
        let mut rhs = vec![0.0f64; m];
        for (k, col) in obs_cols.iter().enumerate() {
            for (r, a) in rhs.iter_mut().zip(col.iter()) {
                *r += truth[k] * a;
            }
        }
        let cfg = DiffuseSolveConfig {
            lambda: 1e-9,
            max_iter: 3000,
            tol: 1e-13,
            nonneg: true,
        };
        let sol = nnls(&obs_cols, &rhs, &cfg).unwrap();
        let max_truth = truth.iter().cloned().fold(0.0f64, f64::max);
        let max_err = sol
            .x
            .iter()
            .zip(truth.iter())
            .map(|(e, t)| (e - t).abs())
            .fold(0.0f64, f64::max);
        assert!(
            max_err / max_truth < 1e-2,
            "sup-norm error {max_err} vs magnitude {max_truth} (cond {cond})"
        );
    }

    #[test]
    fn zero_specular_projects_to_empty_map() {
        let scene = gen_test_scene(ScenePreset::SphereOnPlane, &Material::diffuse([0.6; 3]), 2)
            .unwrap()
            .with_resolution(48);
        let env = disk_light_env(
            Direction::new(0.2, 0.1, 0.97).unwrap(),
            0.1,
            [1.5, 1.5, 1.5],
            0.05,
            64,
            32,
        )
        .unwrap();
        let out = render_full(&scene, &env, &RenderOpts::default()).unwrap();
        let decomp = decompose_gt(&out);
        let map = project_specular(&decomp, &out.depth, &out.camera, 256, 128).unwrap();
        assert_eq!(map.valid_bins(), 0);
        assert!(map.values.iter().all(|v| v == &[0.0; 3]));
    }

    #[test]
    fn mirror_probe_localizes_the_light() {
        let material = Material {
            rho_d: [0.05; 3],
            rho_s: 0.9,
            sigma: 1e-3,
        };
        let scene = gen_test_scene(ScenePreset::MirrorProbe, &material, 4)
            .unwrap()
            .with_resolution(256);
        let light_dir = Direction::new(0.4, 0.3, 0.86).unwrap();
        let env = disk_light_env(light_dir, 0.02, [5.0, 5.0, 5.0], 0.0, 256, 128).unwrap();
        let out = render_full(&scene, &env, &RenderOpts::default()).unwrap();
        let decomp = decompose_gt(&out);
        let map = project_specular(&decomp, &out.depth, &out.camera, 256, 128).unwrap();
        let (bx, by) = map.argmax_valid().expect("some bins must be valid");
        let bin_dir = crate::radiometry::latlong_to_dir(bx as f64, by as f64, 256, 128).unwrap();
        let bin_diag = ((2.0 * std::f64::consts::PI / 256.0).powi(2)
            + (std::f64::consts::PI / 128.0).powi(2))
        .sqrt();
        assert!(
            bin_dir.angle_to(light_dir) < bin_diag,
            "angular error {} rad",
            bin_dir.angle_to(light_dir)
        );
        // The mirror lookup reads the env texel that shares the bin, so the
        // bin mean is rho_s times that texel's radiance.
        let peak = map.values[by * 256 + bx];
        let expected = 0.9 * env.pixel(bx, by)[0] as f64;
        assert!(
            (peak[0] - expected).abs() / expected.max(1e-9) < 1e-3,
            "peak {peak:?} vs {expected}"
        );
    }

    #[test]
    fn identical_mirror_directions_fill_one_bin() {
        // Construct per-pixel normals as the bisector of the view direction
        // and one fixed target, so every mirror direction coincides.
        let n = 32;
        let intr = Intrinsics::from_fov(n, 50f64.to_radians());
        let frame = DepthFrame::new(intr, vec![1.5; n * n]).unwrap();
        let target = Vec3::new(0.2, -0.1, -0.95).normalized();
        let mut normals = NormalMap::new(n, n);
        for y in 0..n {
            for x in 0..n {
                let p = unproject(x, y, &frame).unwrap();
                let view = (-p).normalized();
                normals.set(x, y, (view + target).normalized());
            }
        }
        let spec = Image::constant(n, n, 3, 0.4);
        let decomp = Decomposition {
            albedo: Image::constant(n, n, 3, 0.5),
            diffuse_shading: Image::new(n, n, 3),
            specular_shading: spec,
            normals,
            valid: vec![true; n * n],
            reconstruction_residual: 0.0,
        };
        let camera = Camera {
            intrinsics: intr,
            pose: crate::forward::CameraPose {
                position: Vec3::ZERO,
                rotation: Rot3::IDENTITY,
            },
        };
        let map = project_specular(&decomp, &frame, &camera, 128, 64).unwrap();
        assert_eq!(map.valid_bins(), 1);
        let (bx, by) = map.argmax_valid().unwrap();
        assert_eq!(map.counts[by * 128 + bx] as usize, n * n);
        assert!((map.values[by * 128 + bx][0] - 0.4).abs() < 1e-6);
    }

    #[test]
    fn projection_conserves_evidence() {
        let material = Material {
            rho_d: [0.4, 0.4, 0.4],
            rho_s: 0.5,
            sigma: 0.08,
        };
        let scene = gen_test_scene(ScenePreset::SphereOnPlane, &material, 6)
            .unwrap()
            .with_resolution(64);
        let env = disk_light_env(
            Direction::new(-0.3, 0.2, 0.93).unwrap(),
            0.2,
            [2.0, 1.7, 1.4],
            0.05,
            128,
            64,
        )
        .unwrap();
        let out = render_full(&scene, &env, &RenderOpts::default()).unwrap();
        let decomp = decompose_gt(&out);
        let map = project_specular(&decomp, &out.depth, &out.camera, 256, 128).unwrap();
        for c in 0..3 {
            let binned: f64 = map
                .values
                .iter()
                .zip(map.counts.iter())
                .map(|(v, &n)| v[c] * n as f64)
                .sum();
            let pixels: f64 = out
                .specular
                .data
                .iter()
                .skip(c)
                .step_by(3)
                .map(|&v| v as f64)
                .sum();
            assert!(
                (binned - pixels).abs() <= 1e-6 * pixels.max(1.0),
                "channel {c}: {binned} vs {pixels}"
            );
        }
        // Mask is exactly where counts are positive.
        for i in 0..map.mask.len() {
            assert_eq!(map.mask[i], map.counts[i] > 0);
            if !map.mask[i] {
                assert_eq!(map.values[i], [0.0; 3]);
            }
        }
    }
}
