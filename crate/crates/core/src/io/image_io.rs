//! Color images, masks and normal visualizations.

use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::geometry::NormalMap;
use crate::grid::{ColorImage, Grid, Mask};
use crate::linalg::Vec3;
use crate::scalar::Real;

fn image_err(path: &Path, e: image::ImageError) -> Error {
    Error::Image { path: path.to_path_buf(), source: e }
}

/// Loads an 8- or 16-bit image as linear RGB in `[0, 1]` (no gamma conversion).
pub fn load_image<T: Real>(path: &Path) -> Result<ColorImage<T>> {
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<[T; 3]> = match img {
        image::DynamicImage::ImageRgb16(_) | image::DynamicImage::ImageRgba16(_) | image::DynamicImage::ImageLuma16(_) | image::DynamicImage::ImageLumaA16(_) => {
            img.into_rgb16().pixels().map(|p| p.0.map(|c| T::lit(c as f64 / 65535.0))).collect()
        }
        _ => img.into_rgb8().pixels().map(|p| p.0.map(|c| T::lit(c as f64 / 255.0))).collect(),
    };
    Grid::from_vec(w, h, data)
}

/// Saves an RGB image as 8-bit PNG, clamping to `[0, 1]`.
pub fn save_image<T: Real>(path: &Path, img: &ColorImage<T>) -> Result<()> {
    let out = ImageBuffer::<Rgb<u8>, Vec<u8>>::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        Rgb(img[(x as usize, y as usize)].map(|c| (c.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8))
    });
    out.save(path).map_err(|e| image_err(path, e))
}

/// Loads a mask: pixels whose luminance exceeds 127 are foreground.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let img = image::open(path).map_err(|e| image_err(path, e))?.into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Grid::from_vec(w, h, img.pixels().map(|p| p.0[0] > 127).collect())
}

pub fn save_mask(path: &Path, mask: &Mask) -> Result<()> {
    let out = ImageBuffer::<Luma<u8>, Vec<u8>>::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([if mask[(x as usize, y as usize)] { 255 } else { 0 }])
    });
    out.save(path).map_err(|e| image_err(path, e))
}

/// Byte encoding `round(255·(n + 1)/2)` of a normal; invalid pixels are black.
pub fn encode_normal<T: Real>(n: Vec3<T>) -> [u8; 3] {
    n.to_array().map(|c| (255.0 * (c.as_f64().clamp(-1.0, 1.0) + 1.0) / 2.0).round() as u8)
}

/// Inverse of [`encode_normal`] up to quantization.
pub fn decode_normal(px: [u8; 3]) -> Vec3<f64> {
    let [x, y, z] = px.map(|c| c as f64 / 255.0 * 2.0 - 1.0);
    Vec3::new(x, y, z)
}

/// Writes camera-frame normals as an RGB PNG.
pub fn save_normal_png<T: Real>(path: &Path, normals: &NormalMap<T>) -> Result<()> {
    let (w, h) = (normals.normals.width(), normals.normals.height());
    let out = ImageBuffer::<Rgb<u8>, Vec<u8>>::from_fn(w as u32, h as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        Rgb(if normals.valid[(x, y)] { encode_normal(normals.normals[(x, y)]) } else { [0, 0, 0] })
    });
    out.save(path).map_err(|e| image_err(path, e))
}

/// Reads a normal PNG back; black pixels are invalid.
pub fn load_normal_png(path: &Path) -> Result<NormalMap<f64>> {
    let img = image::open(path).map_err(|e| image_err(path, e))?.into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let px: Vec<[u8; 3]> = img.pixels().map(|p| p.0).collect();
    let valid = Grid::from_vec(w, h, px.iter().map(|p| *p != [0, 0, 0]).collect())?;
    let normals = Grid::from_vec(w, h, px.into_iter().map(decode_normal).collect())?;
    Ok(NormalMap { normals, valid })
}
