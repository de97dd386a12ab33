//! Depth fusion into a truncated signed distance volume and surface extraction.

mod marching_cubes;
mod tables;
mod tsdf;

pub use marching_cubes::{marching_cubes, TriangleMesh};
pub use tsdf::{fuse_depths, TsdfVolume, DEFAULT_TRUNCATION_VOXELS, MAX_VOXELS};
