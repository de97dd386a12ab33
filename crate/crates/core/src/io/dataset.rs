//! Multi-view datasets laid out as image, depth and mask directories plus a COLMAP model.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ray_to_z_depth, z_to_ray_depth, CameraIntrinsics};
use crate::grid::DepthMap;
use crate::io::colmap::{load_cameras, save_cameras, NamedCamera};
use crate::io::depth::{load_depth, save_depth};
use crate::io::image_io::{load_image, load_mask, save_image, save_mask};
use crate::pipeline::{CameraView, RefineConfig};

/// What depth files store along each pixel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthKind {
    /// Camera-frame z (the usual multi-view stereo convention).
    #[default]
    Z,
    /// Distance along the unit pixel ray.
    Ray,
}

impl std::str::FromStr for DepthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "z" => Ok(Self::Z),
            "ray" => Ok(Self::Ray),
            _ => Err(Error::invalid(format!("unknown depth kind '{s}' (expected z or ray)"))),
        }
    }
}

impl DepthKind {
    /// Converts a stored map to ray lengths.
    pub fn to_ray(self, depth: &DepthMap<f64>, intr: &CameraIntrinsics<f64>) -> DepthMap<f64> {
        match self {
            Self::Z => z_to_ray_depth(depth, intr),
            Self::Ray => depth.clone(),
        }
    }

    /// Converts ray lengths to the stored convention.
    pub fn from_ray(self, depth: &DepthMap<f64>, intr: &CameraIntrinsics<f64>) -> DepthMap<f64> {
        match self {
            Self::Z => ray_to_z_depth(depth, intr),
            Self::Ray => depth.clone(),
        }
    }
}

/// Loaded views and their initial depths, in camera-model order. Depths are ray lengths.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub views: Vec<CameraView<f64>>,
    pub init_depths: Vec<DepthMap<f64>>,
}

/// File stem of an image name, used to find its depth and mask files.
pub fn view_stem(name: &str) -> String {
    let p = Path::new(name);
    let parent = p.parent().filter(|d| !d.as_os_str().is_empty());
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| name.to_string());
    match parent {
        Some(d) => d.join(stem).to_string_lossy().into_owned(),
        None => stem,
    }
}

fn find_depth(dir: &Path, stem: &str) -> Option<PathBuf> {
    ["pfm", "png"].iter().map(|e| dir.join(format!("{stem}.{e}"))).find(|p| p.is_file())
}

pub struct DatasetPaths<'a> {
    pub images: &'a Path,
    pub depths: &'a Path,
    pub cameras: &'a Path,
    pub masks: Option<&'a Path>,
    pub depth_kind: DepthKind,
}

/// Loads every view of the camera model; any missing or inconsistent file is an error
/// naming the view.
pub fn load_dataset(paths: &DatasetPaths<'_>) -> Result<Dataset> {
    let cams = load_cameras(paths.cameras)?;
    if cams.is_empty() {
        return Err(Error::invalid(format!("{}: camera model has no images", paths.cameras.display())));
    }
    let mut views = Vec::with_capacity(cams.len());
    let mut depths = Vec::with_capacity(cams.len());
    for NamedCamera { name, camera } in cams {
        let stem = view_stem(&name);
        let image = load_image::<f64>(&paths.images.join(&name))?;
        let (w, h) = (camera.width(), camera.height());
        if image.width() != w || image.height() != h {
            return Err(Error::ShapeMismatch(format!("view '{name}': image is {}×{}, camera is {w}×{h}", image.width(), image.height())));
        }
        let depth_path = find_depth(paths.depths, &stem)
            .ok_or_else(|| Error::invalid(format!("view '{name}': no depth file {stem}.pfm or {stem}.png in {}", paths.depths.display())))?;
        let depth = load_depth::<f64>(&depth_path)?;
        if depth.width() != w || depth.height() != h {
            return Err(Error::ShapeMismatch(format!("view '{name}': depth is {}×{}, image is {w}×{h}", depth.width(), depth.height())));
        }
        let mask = match paths.masks {
            Some(dir) => {
                let p = dir.join(format!("{stem}.png"));
                let p = if p.is_file() { p } else { dir.join(&name) };
                let m = load_mask(&p)?;
                if m.width() != w || m.height() != h {
                    return Err(Error::ShapeMismatch(format!("view '{name}': mask is {}×{}, image is {w}×{h}", m.width(), m.height())));
                }
                Some(m)
            }
            None => None,
        };
        depths.push(paths.depth_kind.to_ray(&depth, &camera.intrinsics));
        views.push(CameraView { name, camera, image, mask });
    }
    Ok(Dataset { views, init_depths: depths })
}

/// Writes `images/`, `depths/`, optional `masks/` and `sparse/` under `root`.
pub fn save_dataset(root: &Path, views: &[CameraView<f64>], depths: &[DepthMap<f64>], kind: DepthKind) -> Result<()> {
    if views.len() != depths.len() {
        return Err(Error::ShapeMismatch(format!("{} views but {} depth maps", views.len(), depths.len())));
    }
    for sub in ["images", "depths", "sparse"] {
        let d = root.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    for (v, d) in views.iter().zip(depths) {
        let stem = view_stem(&v.name);
        save_image(&root.join("images").join(&v.name), &v.image)?;
        save_depth(&root.join("depths").join(format!("{stem}.pfm")), &kind.from_ray(d, &v.camera.intrinsics), None)?;
        if let Some(m) = &v.mask {
            let dir = root.join("masks");
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            save_mask(&dir.join(format!("{stem}.png")), m)?;
        }
    }
    let named: Vec<NamedCamera> = views.iter().map(|v| NamedCamera { name: v.name.clone(), camera: v.camera }).collect();
    save_cameras(&root.join("sparse"), &named)
}

/// Reads a flat TOML config document.
pub fn load_config_table(path: &Path) -> Result<toml::Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.parse::<toml::Table>().map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].lines().count().max(1)).unwrap_or(0);
        Error::Parse { path: path.to_path_buf(), line, msg: e.message().to_string() }
    })
}

/// Applies a config file on top of `base`.
pub fn load_config(path: &Path, base: &RefineConfig) -> Result<RefineConfig> {
    base.with_overrides(&load_config_table(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SyntheticScene;

    fn small_dataset(dir: &Path) -> (Vec<CameraView<f64>>, Vec<DepthMap<f64>>) {
        let scene = SyntheticScene::plane_checker(1);
        let cams = scene.default_rig(12, 10, 2, 0.05).unwrap();
        let mut views = Vec::new();
        let mut depths = Vec::new();
        for (i, c) in cams.iter().enumerate() {
            let r = scene.raycast(c, 1);
            views.push(CameraView { name: format!("v{i}.png"), camera: *c, image: r.color, mask: None });
            depths.push(r.ray_depth);
        }
        save_dataset(dir, &views, &depths, DepthKind::Z).unwrap();
        (views, depths)
    }

    fn paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
        (dir.join("images"), dir.join("depths"), dir.join("sparse"))
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (views, depths) = small_dataset(dir.path());
        let (i, d, c) = paths(dir.path());
        let ds = load_dataset(&DatasetPaths { images: &i, depths: &d, cameras: &c, masks: None, depth_kind: DepthKind::Z }).unwrap();
        assert_eq!(ds.views.len(), 3);
        for (k, v) in ds.views.iter().enumerate() {
            assert_eq!(v.name, views[k].name);
            for y in 0..10 {
                for x in 0..12 {
                    let (a, b) = (ds.init_depths[k].get(x, y).unwrap(), depths[k].get(x, y).unwrap());
                    assert!((a - b).abs() < 1e-6 * b);
                }
            }
        }
    }

    #[test]
    fn missing_depth_names_the_view() {
        let dir = tempfile::tempdir().unwrap();
        small_dataset(dir.path());
        fs::remove_file(dir.path().join("depths/v1.pfm")).unwrap();
        let (i, d, c) = paths(dir.path());
        let err = load_dataset(&DatasetPaths { images: &i, depths: &d, cameras: &c, masks: None, depth_kind: DepthKind::Z }).unwrap_err();
        assert!(err.to_string().contains("v1.png"), "{err}");
    }

    #[test]
    fn config_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        fs::write(&p, "lr_init = 1e-5\npatience = = 3\n").unwrap();
        match load_config_table(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        fs::write(&p, "patience = 3\n").unwrap();
        assert_eq!(load_config(&p, &RefineConfig::default()).unwrap().patience, 3);
    }

    #[test]
    fn view_stems_keep_subdirectories() {
        assert_eq!(view_stem("a/b/rect_001.png"), "a/b/rect_001");
        assert_eq!(view_stem("x.jpg"), "x");
    }
}
