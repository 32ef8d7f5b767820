//! Environment-map lighting estimation from the RGBD appearance of a single
//! object region.
//!
//! The pipeline mirrors a physically based inverse-rendering design: object
//! appearance is decomposed into albedo, diffuse shading and specular shading;
//! diffuse shading is translated to the angular domain by inverting a stack of
//! per-direction irradiance maps (non-negative least squares); specular shading
//! is projected along per-pixel mirror directions; the two angular estimates
//! are fused into one HDR lat-long environment map; sequences are smoothed
//! over time. A forward renderer doubles as the synthetic-data factory and as
//! the differential test oracle for the whole chain.

pub mod decompose;
pub mod error;
pub mod forward;
pub mod fuse;
pub mod geometry;
pub mod image;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod radiometry;
pub mod temporal;
pub mod translate;

pub use error::{Error, Result};
pub use geometry::{DepthFrame, Intrinsics};
pub use image::{Image, NormalMap};
pub use linalg::{Rot3, Vec3};
pub use radiometry::{CubeGrid, Direction, LatLongMap, SolidAngleTable};
