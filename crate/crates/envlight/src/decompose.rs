//! Reflectance decomposition: split an RGB frame into albedo, diffuse shading
//! and specular shading. Synthetic data uses the ground-truth pass-through;
//! measured-style inputs use a deterministic dichromatic heuristic that
//! assumes white specular highlights.

use crate::error::{Error, Result};
use crate::forward::RenderOutput;
use crate::image::{Image, NormalMap};

/// Albedo / diffuse-shading / specular-shading maps plus refined normals for
/// one frame.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Per-channel albedo in [0, 1].
    pub albedo: Image,
    /// Diffuse shading, >= 0.
    pub diffuse_shading: Image,
    /// Specular shading, >= 0.
    pub specular_shading: Image,
    /// Refined normals (pass-through in the heuristic mode).
    pub normals: NormalMap,
    /// Per-pixel validity: geometry present and division unguarded.
    pub valid: Vec<bool>,
    /// Relative L1 reconstruction residual over valid components.
    pub reconstruction_residual: f64,
}

impl Decomposition {
    /// albedo (.) diffuse + specular, per element.
    pub fn reconstruct(&self) -> Image {
        let mut out = Image::new(self.albedo.width, self.albedo.height, 3);
        for i in 0..out.data.len() {
            out.data[i] =
                self.albedo.data[i] * self.diffuse_shading.data[i] + self.specular_shading.data[i];
        }
        out
    }
}

/// Identity repackaging of the ground-truth factors of a synthetic render.
pub fn decompose_gt(render: &RenderOutput) -> Decomposition {
    let valid = render.normals.valid.clone();
    Decomposition {
        albedo: render.albedo.clone(),
        diffuse_shading: render.diffuse.clone(),
        specular_shading: render.specular.clone(),
        normals: render.normals.clone(),
        valid,
        reconstruction_residual: 0.0,
    }
}

const HUE_SECTORS: usize = 16;
const N_CLUSTERS: usize = HUE_SECTORS + 1;
const ACHROMATIC_CLUSTER: usize = HUE_SECTORS;
const MIN_CLUSTER: usize = 30;
/// Albedo channels below this produce zero shading and an invalid pixel.
const ALBEDO_GUARD: f32 = 0.02;
/// Clusters whose min/sum baseline is this close to 1/3 are treated as
/// achromatic: white specular is indistinguishable from neutral diffuse.
const ACHROMATIC_MARGIN: f64 = 0.02;
/// Chromaticity distance from neutral below which a pixel counts as gray.
const SATURATION_FLOOR: f64 = 0.02;

/// Cluster id from chromaticity. White specular moves chromaticity radially
/// toward neutral, so binning by the hue angle keeps highlight pixels in the
/// same cluster as their body color.
fn chroma_cluster(r: f64, g: f64) -> usize {
    let dr = r - 1.0 / 3.0;
    let dg = g - 1.0 / 3.0;
    if (dr * dr + dg * dg).sqrt() < SATURATION_FLOOR {
        return ACHROMATIC_CLUSTER;
    }
    let angle = dg.atan2(dr) + std::f64::consts::PI;
    let sector = (angle / (2.0 * std::f64::consts::PI) * HUE_SECTORS as f64) as usize;
    sector.min(HUE_SECTORS - 1)
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let idx = ((sorted.len() as f64 - 1.0) * p).floor() as usize;
    sorted[idx]
}

/// Deterministic dichromatic decomposition. Specular is the min-channel
/// residual above each chromaticity cluster's baseline; albedo is the
/// cluster's median chromaticity; diffuse shading is the guarded quotient.
pub fn decompose_dichromatic(rgb: &Image, normals: &NormalMap) -> Result<Decomposition> {
    if rgb.channels != 3 {
        return Err(Error::contract("dichromatic decomposition needs RGB input"));
    }
    if rgb.width != normals.width || rgb.height != normals.height {
        return Err(Error::ResolutionMismatch {
            left: rgb.shape_string(),
            right: format!("{}x{}", normals.width, normals.height),
            context: "decompose rgb vs normals",
        });
    }
    let n_px = rgb.width * rgb.height;
    let total_energy: f64 = rgb.data.iter().map(|&v| v as f64).sum();
    if total_energy <= 0.0 {
        return Err(Error::BlackInput);
    }

    // Pass 1: cluster assignment and per-cluster min/sum baselines.
    let mut cluster: Vec<i32> = vec![-1; n_px];
    let mut ratios: Vec<Vec<f64>> = vec![Vec::new(); N_CLUSTERS];
    let mut global_ratios: Vec<f64> = Vec::new();
    for i in 0..n_px {
        if !normals.valid[i] {
            continue;
        }
        let p = &rgb.data[i * 3..i * 3 + 3];
        let sum = (p[0] + p[1] + p[2]) as f64;
        if sum <= 1e-9 {
            continue;
        }
        let bin = chroma_cluster(p[0] as f64 / sum, p[1] as f64 / sum);
        cluster[i] = bin as i32;
        let ratio = p[0].min(p[1]).min(p[2]) as f64 / sum;
        ratios[bin].push(ratio);
        global_ratios.push(ratio);
    }
    if global_ratios.is_empty() {
        return Err(Error::BlackInput);
    }
    global_ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let global_baseline = percentile(&global_ratios, 0.05);
    let baselines: Vec<f64> = ratios
        .iter_mut()
        .enumerate()
        .map(|(c, r)| {
            if c == ACHROMATIC_CLUSTER {
                // Forces the achromatic guard below.
                1.0 / 3.0
            } else if r.len() < MIN_CLUSTER {
                global_baseline
            } else {
                r.sort_by(|a, b| a.partial_cmp(b).unwrap());
                percentile(r, 0.05)
            }
        })
        .collect();

    // Pass 2: specular as the chromaticity-consistent min-channel residual.
    let mut specular = Image::new(rgb.width, rgb.height, 3);
    let mut body = Image::new(rgb.width, rgb.height, 3); // albedo * shading
    for i in 0..n_px {
        let c = cluster[i];
        let p = &rgb.data[i * 3..i * 3 + 3];
        if c < 0 {
            continue;
        }
        let m = baselines[c as usize];
        let sum = (p[0] + p[1] + p[2]) as f64;
        let min = p[0].min(p[1]).min(p[2]) as f64;
        let s = if m >= 1.0 / 3.0 - ACHROMATIC_MARGIN {
            0.0
        } else {
            ((min - m * sum) / (1.0 - 3.0 * m)).clamp(0.0, min)
        };
        for ch in 0..3 {
            specular.data[i * 3 + ch] = s as f32;
            body.data[i * 3 + ch] = (p[ch] as f64 - s).max(0.0) as f32;
        }
    }

    // Pass 3: per-cluster median chromaticity of the body color -> albedo.
    let mut cluster_chroma: Vec<[Vec<f64>; 3]> =
        (0..N_CLUSTERS).map(|_| Default::default()).collect();
    for i in 0..n_px {
        let c = cluster[i];
        if c < 0 {
            continue;
        }
        let b = &body.data[i * 3..i * 3 + 3];
        let sum = (b[0] + b[1] + b[2]) as f64;
        if sum <= 1e-9 {
            continue;
        }
        for ch in 0..3 {
            cluster_chroma[c as usize][ch].push(b[ch] as f64 / sum);
        }
    }
    let albedo_of: Vec<[f64; 3]> = cluster_chroma
        .iter_mut()
        .map(|chans| {
            if chans[0].is_empty() {
                return [1.0 / 3.0; 3];
            }
            let mut med = [0.0f64; 3];
            for ch in 0..3 {
                chans[ch].sort_by(|a, b| a.partial_cmp(b).unwrap());
                med[ch] = chans[ch][chans[ch].len() / 2];
            }
            let s: f64 = med.iter().sum();
            if s <= 1e-9 {
                [1.0 / 3.0; 3]
            } else {
                [med[0] / s, med[1] / s, med[2] / s]
            }
        })
        .collect();

    // Pass 4: guarded division.
    let mut albedo = Image::new(rgb.width, rgb.height, 3);
    let mut shading = Image::new(rgb.width, rgb.height, 3);
    let mut valid = vec![false; n_px];
    let mut residual = 0.0f64;
    let mut valid_energy = 0.0f64;
    for i in 0..n_px {
        let c = cluster[i];
        if c < 0 {
            continue;
        }
        let a = albedo_of[c as usize];
        let mut ok = true;
        for ch in 0..3 {
            albedo.data[i * 3 + ch] = a[ch] as f32;
            if a[ch] as f32 >= ALBEDO_GUARD {
                shading.data[i * 3 + ch] = body.data[i * 3 + ch] / a[ch] as f32;
            } else {
                shading.data[i * 3 + ch] = 0.0;
                ok = false;
            }
        }
        valid[i] = ok;
        if ok {
            for ch in 0..3 {
                let recon =
                    albedo.data[i * 3 + ch] * shading.data[i * 3 + ch] + specular.data[i * 3 + ch];
                residual += (rgb.data[i * 3 + ch] - recon).abs() as f64;
                valid_energy += rgb.data[i * 3 + ch] as f64;
            }
        }
    }

    Ok(Decomposition {
        albedo,
        diffuse_shading: shading,
        specular_shading: specular,
        normals: normals.clone(),
        valid,
        reconstruction_residual: residual / valid_energy.max(1e-12),
    })
}
