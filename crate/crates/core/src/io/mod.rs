//! File formats: COLMAP text cameras, PFM/PNG depth, images, masks, normals, PLY meshes, config.

pub mod colmap;
mod dataset;
mod depth;
mod image_io;
mod ply;

pub use colmap::{load_cameras, save_cameras, NamedCamera};
pub use dataset::{load_config, load_config_table, load_dataset, save_dataset, view_stem, Dataset, DatasetPaths, DepthKind};
pub use depth::{load_depth, read_pfm, read_png16, save_depth, sidecar_path, write_pfm, write_png16, DepthScale};
pub use image_io::{decode_normal, encode_normal, load_image, load_mask, load_normal_png, save_image, save_mask, save_normal_png};
pub use ply::{read_ply, write_ply, PlyFormat};
