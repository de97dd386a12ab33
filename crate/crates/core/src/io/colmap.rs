//! COLMAP text model: `cameras.txt` and `images.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{Camera, CameraIntrinsics, CameraPose};
use crate::linalg::{Mat3, Vec3};

/// One `cameras.txt` record.
#[derive(Clone, Debug, PartialEq)]
pub struct ColmapCamera {
    pub id: u32,
    pub model: String,
    pub width: usize,
    pub height: usize,
    pub params: Vec<f64>,
}

impl ColmapCamera {
    pub fn pinhole(id: u32, intr: &CameraIntrinsics<f64>) -> Self {
        Self {
            id,
            model: "PINHOLE".into(),
            width: intr.width,
            height: intr.height,
            params: vec![intr.fx, intr.fy, intr.cx, intr.cy],
        }
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics<f64>> {
        let p = &self.params;
        let (fx, fy, cx, cy) = match (self.model.as_str(), p.len()) {
            ("PINHOLE", 4) => (p[0], p[1], p[2], p[3]),
            ("SIMPLE_PINHOLE", 3) => (p[0], p[0], p[1], p[2]),
            ("PINHOLE", _) | ("SIMPLE_PINHOLE", _) => {
                return Err(Error::invalid(format!("camera {}: {} takes {} parameters, got {}", self.id, self.model, if self.model == "PINHOLE" { 4 } else { 3 }, p.len())))
            }
            _ => return Err(Error::UnsupportedCameraModel(self.model.clone())),
        };
        CameraIntrinsics::new(fx, fy, cx, cy, self.width, self.height)
    }
}

/// One `images.txt` record: camera-from-world rotation (unit quaternion) and translation.
#[derive(Clone, Debug, PartialEq)]
pub struct ColmapImage {
    pub id: u32,
    /// `(qw, qx, qy, qz)`.
    pub qvec: [f64; 4],
    pub tvec: [f64; 3],
    pub camera_id: u32,
    pub name: String,
}

impl ColmapImage {
    pub fn from_pose(id: u32, camera_id: u32, name: impl Into<String>, pose: &CameraPose<f64>) -> Self {
        let r_cw = pose.rotation.transpose();
        let t = -(r_cw.mul_vec(pose.translation));
        Self { id, qvec: rotation_to_quaternion(&r_cw), tvec: t.to_array(), camera_id, name: name.into() }
    }

    /// World-from-camera pose.
    pub fn pose(&self) -> Result<CameraPose<f64>> {
        let r_cw = quaternion_to_rotation(self.qvec)
            .ok_or_else(|| Error::invalid(format!("image '{}': zero quaternion", self.name)))?;
        let r_wc = r_cw.transpose();
        let center = -(r_wc.mul_vec(Vec3::from_array(self.tvec)));
        CameraPose::new(r_wc, center)
    }
}

/// Rotation of a (not necessarily normalized) quaternion `(w, x, y, z)`.
pub fn quaternion_to_rotation(q: [f64; 4]) -> Option<Mat3<f64>> {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return None;
    }
    let [w, x, y, z] = q.map(|v| v / n);
    Some(Mat3::from_rows([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]))
}

/// Unit quaternion `(w, x, y, z)` with `w ≥ 0` of a rotation matrix.
pub fn rotation_to_quaternion(r: &Mat3<f64>) -> [f64; 4] {
    let m = |i: usize, j: usize| r.row(i)[j];
    let trace = m(0, 0) + m(1, 1) + m(2, 2);
    let q = if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        [0.25 * s, (m(2, 1) - m(1, 2)) / s, (m(0, 2) - m(2, 0)) / s, (m(1, 0) - m(0, 1)) / s]
    } else if m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2) {
        let s = (1.0 + m(0, 0) - m(1, 1) - m(2, 2)).sqrt() * 2.0;
        [(m(2, 1) - m(1, 2)) / s, 0.25 * s, (m(0, 1) + m(1, 0)) / s, (m(0, 2) + m(2, 0)) / s]
    } else if m(1, 1) > m(2, 2) {
        let s = (1.0 + m(1, 1) - m(0, 0) - m(2, 2)).sqrt() * 2.0;
        [(m(0, 2) - m(2, 0)) / s, (m(0, 1) + m(1, 0)) / s, 0.25 * s, (m(1, 2) + m(2, 1)) / s]
    } else {
        let s = (1.0 + m(2, 2) - m(0, 0) - m(1, 1)).sqrt() * 2.0;
        [(m(1, 0) - m(0, 1)) / s, (m(0, 2) + m(2, 0)) / s, (m(1, 2) + m(2, 1)) / s, 0.25 * s]
    };
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = if q[0] < 0.0 { -1.0 } else { 1.0 };
    q.map(|v| sign * v / n)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

fn field<F: std::str::FromStr>(path: &Path, line: usize, tok: Option<&str>, what: &str) -> Result<F> {
    let tok = tok.ok_or_else(|| parse_err(path, line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(path, line, format!("bad {what} `{tok}`")))
}

pub fn read_cameras_txt(path: &Path) -> Result<Vec<ColmapCamera>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let id = field(path, ln, tok.next(), "camera id")?;
        let model: String = field(path, ln, tok.next(), "camera model")?;
        let width = field(path, ln, tok.next(), "width")?;
        let height = field(path, ln, tok.next(), "height")?;
        let params = tok.map(|t| t.parse::<f64>().map_err(|_| parse_err(path, ln, format!("bad parameter `{t}`")))).collect::<Result<Vec<_>>>()?;
        if out.iter().any(|c: &ColmapCamera| c.id == id) {
            return Err(parse_err(path, ln, format!("duplicate camera id {id}")));
        }
        out.push(ColmapCamera { id, model, width, height, params });
    }
    Ok(out)
}

pub fn read_images_txt(path: &Path) -> Result<Vec<ColmapImage>> {
    let text = read(path)?;
    let mut out = Vec::new();
    let mut expect_points = false;
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if expect_points {
            // Second line of a record: 2D observations, possibly empty.
            expect_points = false;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let id = field(path, ln, tok.next(), "image id")?;
        let mut qvec = [0.0f64; 4];
        for (k, q) in qvec.iter_mut().enumerate() {
            *q = field(path, ln, tok.next(), &format!("quaternion component {k}"))?;
        }
        let mut tvec = [0.0f64; 3];
        for (k, t) in tvec.iter_mut().enumerate() {
            *t = field(path, ln, tok.next(), &format!("translation component {k}"))?;
        }
        let camera_id = field(path, ln, tok.next(), "camera id")?;
        let name: String = field(path, ln, tok.next(), "image name")?;
        if let Some(extra) = tok.next() {
            return Err(parse_err(path, ln, format!("unexpected token `{extra}` after image name")));
        }
        if qvec.iter().chain(&tvec).any(|v| !v.is_finite()) {
            return Err(parse_err(path, ln, "non-finite pose"));
        }
        out.push(ColmapImage { id, qvec, tvec, camera_id, name });
        expect_points = true;
    }
    Ok(out)
}

pub fn write_cameras_txt(path: &Path, cameras: &[ColmapCamera]) -> Result<()> {
    let mut s = String::from("# Camera list with one line of data per camera:\n#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n");
    for c in cameras {
        let _ = write!(s, "{} {} {} {}", c.id, c.model, c.width, c.height);
        for p in &c.params {
            let _ = write!(s, " {p:?}");
        }
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn write_images_txt(path: &Path, images: &[ColmapImage]) -> Result<()> {
    let mut s = String::from("# Image list with two lines of data per image:\n#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n#   POINTS2D[] as (X, Y, POINT3D_ID)\n");
    for im in images {
        let [qw, qx, qy, qz] = im.qvec;
        let [tx, ty, tz] = im.tvec;
        let _ = writeln!(s, "{} {qw:?} {qx:?} {qy:?} {qz:?} {tx:?} {ty:?} {tz:?} {} {}\n", im.id, im.camera_id, im.name);
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Resolves `cameras.txt` and `images.txt` from a model directory or either file.
pub fn model_paths(path: &Path) -> (PathBuf, PathBuf) {
    let dir = if path.is_dir() { path.to_path_buf() } else { path.parent().map(Path::to_path_buf).unwrap_or_default() };
    (dir.join("cameras.txt"), dir.join("images.txt"))
}

/// A named view of a COLMAP model.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedCamera {
    pub name: String,
    pub camera: Camera<f64>,
}

/// Loads every image of a COLMAP text model, in file order.
pub fn load_cameras(path: &Path) -> Result<Vec<NamedCamera>> {
    let (cam_path, img_path) = model_paths(path);
    let cameras = read_cameras_txt(&cam_path)?;
    let images = read_images_txt(&img_path)?;
    images
        .iter()
        .map(|im| {
            let cam = cameras
                .iter()
                .find(|c| c.id == im.camera_id)
                .ok_or_else(|| Error::invalid(format!("image '{}' references unknown camera {}", im.name, im.camera_id)))?;
            Ok(NamedCamera { name: im.name.clone(), camera: Camera::new(cam.intrinsics()?, im.pose()?) })
        })
        .collect()
}

/// Writes a model with one PINHOLE camera per view.
pub fn save_cameras(dir: &Path, views: &[NamedCamera]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cams: Vec<ColmapCamera> = views.iter().enumerate().map(|(i, v)| ColmapCamera::pinhole(i as u32 + 1, &v.camera.intrinsics)).collect();
    let imgs: Vec<ColmapImage> = views
        .iter()
        .enumerate()
        .map(|(i, v)| ColmapImage::from_pose(i as u32 + 1, i as u32 + 1, v.name.clone(), &v.camera.pose))
        .collect();
    write_cameras_txt(&dir.join("cameras.txt"), &cams)?;
    write_images_txt(&dir.join("images.txt"), &imgs)
}
