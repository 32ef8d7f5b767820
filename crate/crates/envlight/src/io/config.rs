//! Run configuration: a versioned TOML document collecting every knob of the
//! estimation pipeline.

use crate::error::{Error, Result};
use crate::fuse::FusionConfig;
use crate::translate::DiffuseSolveConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub schema: u32,
    pub seed: u64,
    /// Central crop applied to oversized input frames, pixels.
    pub crop: usize,
    /// Cube-map face resolution of the sampled light directions.
    pub cube_face_res: usize,
    /// Edge length of the irradiance maps and the downsampled shading.
    pub irradiance_res: usize,
    pub env_width: usize,
    pub env_height: usize,
    /// Stratified samples per irradiance cell axis.
    pub stack_samples_per_cell: usize,
    /// Working frame resolution for the irradiance stack; larger frames are
    /// decimated to this size before the visibility marches.
    pub stack_frame_res: usize,
    pub bilateral_sigma_space: f64,
    pub bilateral_sigma_range: f64,
    pub solver: DiffuseSolveConfig,
    pub fusion: FusionConfig,
    /// Temporal smoothing factor for sequences.
    pub alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: CONFIG_SCHEMA,
            seed: 0,
            crop: 384,
            cube_face_res: 8,
            irradiance_res: 32,
            env_width: 256,
            env_height: 128,
            stack_samples_per_cell: 2,
            stack_frame_res: 192,
            bilateral_sigma_space: 3.0,
            bilateral_sigma_range: 0.02,
            solver: DiffuseSolveConfig::default(),
            fusion: FusionConfig::default(),
            alpha: 0.3,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::contract(format!(
                "unsupported config schema {} (expected {CONFIG_SCHEMA})",
                self.schema
            )));
        }
        if self.crop == 0
            || self.cube_face_res == 0
            || self.irradiance_res == 0
            || self.env_height == 0
            || self.stack_samples_per_cell == 0
            || self.stack_frame_res < self.irradiance_res
        {
            return Err(Error::contract("config resolutions must be positive"));
        }
        if self.env_width != 2 * self.env_height {
            return Err(Error::contract("env resolution must be 2:1"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::contract("alpha must lie in [0, 1]"));
        }
        if self.bilateral_sigma_space <= 0.0 || self.bilateral_sigma_range <= 0.0 {
            return Err(Error::contract("bilateral sigmas must be positive"));
        }
        self.fusion.validate()?;
        if self.solver.lambda < 0.0 || self.solver.max_iter == 0 {
            return Err(Error::contract("solver needs lambda >= 0 and max_iter >= 1"));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::TextParse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
