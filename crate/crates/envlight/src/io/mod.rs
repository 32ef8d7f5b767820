//! File formats: PFM for HDR maps and depth, PNG for previews, and versioned
//! TOML documents for configs, scenes, cameras and sequence manifests.

pub mod config;
pub mod pfm;
pub mod png;
pub mod scene;

pub use config::RunConfig;
pub use pfm::{read_env, read_pfm, write_env, write_pfm, PfmImage};
pub use png::{read_png, write_png, DEFAULT_GAMMA};
pub use scene::{
    load_camera, load_scene, save_camera, save_scene, FrameEntry, SequenceManifest,
};
