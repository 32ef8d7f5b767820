use std::path::PathBuf;

/// Errors surfaced by the estimation toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Two images that must share a resolution do not.
    #[error("resolution mismatch: {left} vs {right} in {context}")]
    ResolutionMismatch {
        left: String,
        right: String,
        context: &'static str,
    },

    /// The linear system has no information to invert (e.g. all-zero basis).
    #[error("degenerate system: {0}")]
    DegenerateSystem(String),

    /// Mirror reflection requested for a normal facing away from the viewer.
    #[error("back-facing surface: n.v = {ndotv}")]
    BackFacing { ndotv: f64 },

    /// Input image carries no usable chromaticity (all black).
    #[error("no chromaticity evidence: input is black")]
    BlackInput,

    /// A scene with no primitives or an empty frame sequence.
    #[error("empty input: {0}")]
    Empty(&'static str),

    /// Non-finite value where the format or invariant forbids it.
    #[error("non-finite value {value} at element {index} in {context}")]
    NonFinite {
        value: f32,
        index: usize,
        context: String,
    },

    /// Malformed PFM content, with the byte offset where parsing stopped.
    #[error("PFM parse error at byte {offset}: {message} ({path})")]
    PfmParse {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    /// Malformed structured text (config, scene, manifest).
    #[error("parse error in {path}: {message}")]
    TextParse { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
