//! Depth maps as PFM or 16-bit PNG with a JSON scale sidecar.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DepthMap, Grid};
use crate::scalar::Real;

/// Linear map from stored 16-bit values to depth: `depth = value·scale + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthScale {
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
}

/// Sidecar path of a PNG depth map: `name.png` → `name.json`.
pub fn sidecar_path(png: &Path) -> PathBuf {
    png.with_extension("json")
}

fn corrupt(path: &Path, msg: impl Into<String>) -> Error {
    Error::Corrupt { path: path.to_path_buf(), msg: msg.into() }
}

/// Reads a single-channel PFM. Zero, negative and non-finite values are invalid.
pub fn read_pfm<T: Real>(path: &Path) -> Result<DepthMap<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0;
    let mut token = || -> Option<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (pos > start).then(|| String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token().ok_or_else(|| corrupt(path, "empty file"))?;
    let channels = match magic.as_str() {
        "Pf" => 1,
        "PF" => return Err(corrupt(path, "three-channel PFM is not a depth map")),
        _ => return Err(corrupt(path, format!("bad PFM magic `{magic}`"))),
    };
    let mut num = |what: &str| -> Result<String> { token().ok_or_else(|| corrupt(path, format!("missing {what}"))) };
    let w: usize = num("width")?.parse().map_err(|_| corrupt(path, "bad width"))?;
    let h: usize = num("height")?.parse().map_err(|_| corrupt(path, "bad height"))?;
    let scale: f64 = num("scale")?.parse().map_err(|_| corrupt(path, "bad scale"))?;
    if w == 0 || h == 0 || scale == 0.0 || !scale.is_finite() {
        return Err(corrupt(path, "bad PFM header values"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let data_start = pos + 1;
    let need = w * h * channels * 4;
    if bytes.len() < data_start + need {
        return Err(corrupt(path, format!("expected {need} raster bytes, found {}", bytes.len().saturating_sub(data_start))));
    }
    let raster = &bytes[data_start..data_start + need];
    let little = scale < 0.0;
    let mut values = Grid::new(w, h, T::zero());
    for row in 0..h {
        let y = h - 1 - row;
        for x in 0..w {
            let o = (row * w + x) * 4;
            let b = [raster[o], raster[o + 1], raster[o + 2], raster[o + 3]];
            let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
            values[(x, y)] = T::from_f32(v).unwrap_or(T::nan());
        }
    }
    Ok(DepthMap::from_values(values))
}

/// Writes a little-endian single-channel PFM; invalid pixels are stored as 0.
pub fn write_pfm<T: Real>(path: &Path, depth: &DepthMap<T>) -> Result<()> {
    let (w, h) = (depth.width(), depth.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            let v = depth.get(x, y).map_or(0.0f32, |d| d.to_f32().unwrap_or(0.0));
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Reads a 16-bit grayscale PNG depth map and its sidecar. Stored value 0 is invalid.
pub fn read_png16<T: Real>(path: &Path) -> Result<DepthMap<T>> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let scale: DepthScale = serde_json::from_str(&text).map_err(|e| corrupt(&side, e.to_string()))?;
    if !(scale.scale > 0.0) || !scale.scale.is_finite() || !scale.offset.is_finite() {
        return Err(corrupt(&side, "scale must be positive and finite"));
    }
    let img = image::open(path).map_err(|e| Error::Image { path: path.to_path_buf(), source: e })?;
    let img = match img {
        image::DynamicImage::ImageLuma16(g) => g,
        other => return Err(corrupt(path, format!("expected 16-bit grayscale, found {:?}", other.color()))),
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = Grid::from_fn(w, h, |x, y| {
        let raw = img.get_pixel(x as u32, y as u32).0[0];
        if raw == 0 {
            T::zero()
        } else {
            T::lit(raw as f64 * scale.scale + scale.offset)
        }
    });
    Ok(DepthMap::from_values(values))
}

/// Writes a 16-bit PNG plus sidecar. Depths outside the representable range are an error.
pub fn write_png16<T: Real>(path: &Path, depth: &DepthMap<T>, scale: DepthScale) -> Result<()> {
    if !(scale.scale > 0.0) {
        return Err(Error::invalid("depth scale must be positive"));
    }
    let (w, h) = (depth.width(), depth.height());
    let mut img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let raw = match depth.get(x, y) {
                Some(d) => {
                    let q = ((d.as_f64() - scale.offset) / scale.scale).round();
                    if !(1.0..=65535.0).contains(&q) {
                        return Err(Error::invalid(format!("depth {d} at ({x}, {y}) does not fit 16 bits with scale {}", scale.scale)));
                    }
                    q as u16
                }
                None => 0,
            };
            img.put_pixel(x as u32, y as u32, image::Luma([raw]));
        }
    }
    img.save(path).map_err(|e| Error::Image { path: path.to_path_buf(), source: e })?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&scale).map_err(|e| Error::invalid(e.to_string()))?;
    fs::write(&side, json).map_err(|e| Error::io(&side, e))
}

/// Loads a depth map by extension (`.pfm` or `.png`).
pub fn load_depth<T: Real>(path: &Path) -> Result<DepthMap<T>> {
    match extension(path).as_deref() {
        Some("pfm") => read_pfm(path),
        Some("png") => read_png16(path),
        _ => Err(Error::invalid(format!("{}: depth maps must be .pfm or .png", path.display()))),
    }
}

/// Saves a depth map by extension; PNG output needs a scale.
pub fn save_depth<T: Real>(path: &Path, depth: &DepthMap<T>, png_scale: Option<DepthScale>) -> Result<()> {
    match extension(path).as_deref() {
        Some("pfm") => write_pfm(path, depth),
        Some("png") => write_png16(path, depth, png_scale.ok_or_else(|| Error::invalid("PNG depth output needs a scale"))?),
        _ => Err(Error::invalid(format!("{}: depth maps must be .pfm or .png", path.display()))),
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase())
}
