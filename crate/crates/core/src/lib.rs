//! Multi-view depth map refinement with pixel-aligned Gaussians.
//!
//! Each valid pixel of a target view carries one isotropic Gaussian placed on
//! its back-projected ray. Position, scale and color are derived from the
//! pixel, so the depth along the ray is the only optimized quantity. The
//! cloud is splatted into neighbouring calibrated views with occlusion-aware
//! gates, compared photometrically, and the depths are refined with Adam on a
//! two-level resolution pyramid. Refined depths can be fused into a mesh with
//! a TSDF volume and marching cubes.
//!
//! All numeric code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod backward;
pub mod cloud;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod gradcheck;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod losses;
#[cfg(any(test, feature = "oracles"))]
pub mod oracles;
pub mod pipeline;
pub mod rasterizer;
pub mod scalar;
pub mod synth;

pub use backward::{backward, BackwardOptions, DepthGradients, UpstreamGradients};
pub use cloud::PixelGaussianCloud;
pub use error::{Error, Result};
pub use fusion::{fuse_depths, marching_cubes, TriangleMesh, TsdfVolume};
pub use geometry::{Camera, CameraIntrinsics, CameraPose, NormalMap, VertexMap};
pub use grid::{ColorImage, DepthMap, Grid, Mask};
pub use linalg::{Mat3, Vec3};
pub use losses::LossWeights;
pub use pipeline::{refine_dataset, refine_view, CameraView, Preset, RefineConfig};
pub use rasterizer::{rasterize, render, RasterSettings, RenderBuffers, SplatProjection};
pub use scalar::Real;
pub use synth::SyntheticScene;

pub type Vec3d = Vec3<f64>;
pub type Mat3d = Mat3<f64>;
pub type Intrinsics = CameraIntrinsics<f64>;
pub type Pose = CameraPose<f64>;
pub type CameraD = Camera<f64>;
pub type Depth = DepthMap<f64>;
pub type Image = ColorImage<f64>;
pub type Cloud = PixelGaussianCloud<f64>;
pub type Settings = RasterSettings<f64>;
pub type View = CameraView<f64>;
pub type Volume = TsdfVolume<f64>;
pub type Mesh = TriangleMesh<f64>;
