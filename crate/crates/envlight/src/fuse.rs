//! Angular fusion: merge the low-resolution diffuse light estimate with the
//! sparse high-frequency specular observations into one environment map.
//!
//! The merge is a per-bin linear blend. Specular bins carry raw averaged
//! radiance in unknown units (the BRDF lobe and rho_s are not deconvolved), so
//! a per-channel scalar gain is fitted against the diffuse estimate first;
//! the blend weight then grows with the bin's observation count.

use crate::error::{Error, Result};
use crate::radiometry::LatLongMap;
use crate::translate::SparseAngularMap;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct FusionConfig {
    /// Blend weight ceiling for a fully observed bin, in [0, 1].
    pub spec_weight_at_full_count: f64,
    /// Observation count at which the specular weight saturates.
    pub count_saturation: f64,
    /// Angular radius (degrees) of the Gaussian used to fill unobserved
    /// pinholes from nearby observed bins.
    pub splat_sigma_deg: f64,
    /// Fit a per-channel scalar reconciling specular units with the diffuse
    /// estimate.
    pub gain_fit: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            spec_weight_at_full_count: 0.8,
            count_saturation: 16.0,
            splat_sigma_deg: 2.0,
            gain_fit: true,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.spec_weight_at_full_count) {
            return Err(Error::contract("spec weight ceiling must lie in [0, 1]"));
        }
        if self.count_saturation <= 0.0 || self.splat_sigma_deg <= 0.0 {
            return Err(Error::contract("fusion parameters must be positive"));
        }
        Ok(())
    }
}

/// Specular values and effective counts after pinhole filling: observed bins
/// keep their exact values; unobserved bins take a Gaussian-weighted average
/// of observed bins within three sigma, with an effective count averaged the
/// same way.
fn splat(spec: &SparseAngularMap, sigma_rad: f64) -> (Vec<[f64; 3]>, Vec<f64>) {
    let (w, h) = (spec.width, spec.height);
    let mut values: Vec<[f64; 3]> = spec.values.clone();
    let mut counts: Vec<f64> = spec.counts.iter().map(|&c| c as f64).collect();
    if spec.counts.iter().all(|&c| c == 0) {
        return (values, counts);
    }
    // Bin-center directions, precomputed once.
    let dirs: Vec<crate::linalg::Vec3> = (0..w * h)
        .map(|i| {
            crate::radiometry::latlong_to_dir((i % w) as f64, (i / w) as f64, w, h)
                .expect("bin index in range")
                .vec()
        })
        .collect();
    let reach = 3.0 * sigma_rad;
    let cos_reach = reach.cos();
    let inv_2s2 = 1.0 / (2.0 * sigma_rad * sigma_rad);
    let dv = (reach / (std::f64::consts::PI / h as f64)).ceil() as isize;
    for i in 0..w * h {
        if spec.counts[i] > 0 {
            continue;
        }
        let (bx, by) = ((i % w) as isize, (i / w) as isize);
        let d0 = dirs[i];
        let mut acc = [0.0f64; 3];
        let mut cacc = 0.0f64;
        let mut wacc = 0.0f64;
        for ny in (by - dv).max(0)..=(by + dv).min(h as isize - 1) {
            // Azimuth reach widens toward the poles.
            let theta = std::f64::consts::PI * (ny as f64 + 0.5) / h as f64;
            let du_step = 2.0 * std::f64::consts::PI / w as f64 * theta.sin().max(1e-3);
            let du = ((reach / du_step).ceil() as isize).min(w as isize / 2);
            for off in -du..=du {
                let nx = (bx + off).rem_euclid(w as isize);
                let j = ny as usize * w + nx as usize;
                if spec.counts[j] == 0 {
                    continue;
                }
                let cos_angle = d0.dot(dirs[j]);
                if cos_angle < cos_reach {
                    continue;
                }
                let angle = cos_angle.clamp(-1.0, 1.0).acos();
                let wgt = (-angle * angle * inv_2s2).exp();
                for c in 0..3 {
                    acc[c] += wgt * spec.values[j][c];
                }
                cacc += wgt * spec.counts[j] as f64;
                wacc += wgt;
            }
        }
        if wacc > 1e-12 {
            for c in 0..3 {
                values[i][c] = acc[c] / wacc;
            }
            counts[i] = cacc / wacc;
        }
    }
    (values, counts)
}

/// Fuse the diffuse-derived environment with the specular observation map.
pub fn fuse(
    diffuse_ll: &LatLongMap,
    spec: &SparseAngularMap,
    cfg: &FusionConfig,
) -> Result<LatLongMap> {
    cfg.validate()?;
    if diffuse_ll.width != spec.width || diffuse_ll.height != spec.height {
        return Err(Error::ResolutionMismatch {
            left: format!("{}x{}", diffuse_ll.width, diffuse_ll.height),
            right: format!("{}x{}", spec.width, spec.height),
            context: "fuse diffuse vs specular",
        });
    }
    let (w, h) = (diffuse_ll.width, diffuse_ll.height);

    // Per-channel gain reconciling specular units with the diffuse estimate,
    // fitted over observed bins only.
    let mut gain = [1.0f64; 3];
    if cfg.gain_fit {
        for (c, g) in gain.iter_mut().enumerate() {
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for i in 0..w * h {
                if spec.counts[i] == 0 {
                    continue;
                }
                let d = diffuse_ll.data[i * 3 + c] as f64;
                let s = spec.values[i][c];
                num += s * d;
                den += s * s;
            }
            if den > 1e-12 {
                *g = num / den;
            }
        }
    }

    let (spec_filled, counts_eff) = splat(spec, cfg.splat_sigma_deg.to_radians());

    let mut out = vec![0.0f32; w * h * 3];
    for i in 0..w * h {
        let weight =
            cfg.spec_weight_at_full_count * (counts_eff[i] / cfg.count_saturation).min(1.0);
        for c in 0..3 {
            let d = diffuse_ll.data[i * 3 + c] as f64;
            let s = gain[c] * spec_filled[i][c];
            out[i * 3 + c] = ((1.0 - weight) * d + weight * s).max(0.0) as f32;
        }
    }
    LatLongMap::from_data(w, h, out)
}
