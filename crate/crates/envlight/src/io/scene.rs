//! Scene, camera and sequence-manifest documents: versioned TOML.

use crate::error::{Error, Result};
use crate::forward::{Camera, SceneDesc};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCENE_SCHEMA: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct SceneFile {
    schema: u32,
    scene: SceneDesc,
}

pub fn save_scene(path: impl AsRef<Path>, scene: &SceneDesc) -> Result<()> {
    let path = path.as_ref();
    let doc = SceneFile {
        schema: SCENE_SCHEMA,
        scene: scene.clone(),
    };
    let text = toml::to_string_pretty(&doc).expect("scene serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneDesc> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: SceneFile = toml::from_str(&text).map_err(|e| Error::TextParse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if doc.schema != SCENE_SCHEMA {
        return Err(Error::TextParse {
            path: path.to_path_buf(),
            message: format!("unsupported scene schema {}", doc.schema),
        });
    }
    doc.scene.validate()?;
    Ok(doc.scene)
}

#[derive(Debug, Serialize, Deserialize)]
struct CameraFile {
    schema: u32,
    camera: Camera,
}

pub fn save_camera(path: impl AsRef<Path>, camera: &Camera) -> Result<()> {
    let path = path.as_ref();
    let doc = CameraFile {
        schema: SCENE_SCHEMA,
        camera: *camera,
    };
    let text = toml::to_string_pretty(&doc).expect("camera serializes");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_camera(path: impl AsRef<Path>) -> Result<Camera> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: CameraFile = toml::from_str(&text).map_err(|e| Error::TextParse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    doc.camera.intrinsics.validate()?;
    Ok(doc.camera)
}

/// One frame of an estimation sequence. Paths are resolved relative to the
/// manifest file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameEntry {
    pub rgb: PathBuf,
    pub depth: PathBuf,
    pub camera: PathBuf,
    /// Frame-local yaw of the emitted estimate, when the inputs are expressed
    /// in a rotated frame. Defaults to world-aligned.
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub schema: u32,
    pub frames: Vec<FrameEntry>,
}

impl SequenceManifest {
    pub fn new(frames: Vec<FrameEntry>) -> SequenceManifest {
        SequenceManifest {
            schema: SCENE_SCHEMA,
            frames,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SequenceManifest> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: SequenceManifest = toml::from_str(&text).map_err(|e| Error::TextParse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if doc.schema != SCENE_SCHEMA {
            return Err(Error::TextParse {
                path: path.to_path_buf(),
                message: format!("unsupported manifest schema {}", doc.schema),
            });
        }
        if doc.frames.is_empty() {
            return Err(Error::Empty("sequence manifest"));
        }
        Ok(doc)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
