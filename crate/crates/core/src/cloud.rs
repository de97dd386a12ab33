//! The per-pixel 1DoF Gaussian cloud of a target view.
//!
//! Every valid target pixel owns one spherical, fully opaque Gaussian whose
//! center slides along the pixel ray. Color is sampled from the target image
//! once and never changes; rotation is the identity and opacity is one, so
//! neither is stored. The ray depth is the only mutable quantity.

use crate::error::{Error, Result};
use crate::geometry::{gaussian_scale, pixel_center, ray_direction, Camera};
use crate::grid::{check_shape, ColorImage, DepthMap, Grid, Mask};
use crate::linalg::Vec3;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct PixelGaussianCloud<T> {
    camera: Camera<T>,
    ray_dirs: Vec<Vec3<T>>,
    depths: Vec<T>,
    colors: Vec<[T; 3]>,
    /// `(row, col)` of each Gaussian's pixel.
    pixel_ids: Vec<(usize, usize)>,
    /// `ds/dd`: constant per pixel, since scale is linear in ray depth.
    scale_per_depth: Vec<T>,
    index: Grid<Option<usize>>,
}

impl<T: Real> PixelGaussianCloud<T> {
    /// One Gaussian per pixel valid in `depth` and in `mask`, in raster order.
    pub fn init_from_depth(
        image: &ColorImage<T>,
        depth: &DepthMap<T>,
        camera: &Camera<T>,
        mask: Option<&Mask>,
    ) -> Result<Self> {
        check_shape(image, depth.validity(), "image vs depth")?;
        if image.width() != camera.width() || image.height() != camera.height() {
            return Err(Error::ShapeMismatch(format!(
                "image {}x{} vs camera {}x{}",
                image.width(),
                image.height(),
                camera.width(),
                camera.height()
            )));
        }
        if let Some(m) = mask {
            check_shape(image, m, "image vs mask")?;
        }
        let intr = &camera.intrinsics;
        let mut cloud = Self {
            camera: *camera,
            ray_dirs: Vec::new(),
            depths: Vec::new(),
            colors: Vec::new(),
            pixel_ids: Vec::new(),
            scale_per_depth: Vec::new(),
            index: Grid::new(image.width(), image.height(), None),
        };
        for row in 0..image.height() {
            for col in 0..image.width() {
                let Some(d) = depth.get(col, row) else { continue };
                if mask.is_some_and(|m| !m[(col, row)]) {
                    continue;
                }
                let (u, v) = pixel_center(col, row);
                cloud.index[(col, row)] = Some(cloud.depths.len());
                cloud.ray_dirs.push(camera.pose.rotation.mul_vec(ray_direction(u, v, intr)));
                cloud.depths.push(d);
                cloud.colors.push(image[(col, row)]);
                cloud.pixel_ids.push((row, col));
                cloud.scale_per_depth.push(gaussian_scale(intr.perspective_factor(u, v), intr));
            }
        }
        if cloud.depths.is_empty() {
            return Err(Error::NoValidPixels("target view has no pixel valid in both depth and mask".into()));
        }
        Ok(cloud)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.depths.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    pub fn camera(&self) -> &Camera<T> {
        &self.camera
    }

    /// Shared ray origin: the target camera center.
    pub fn origin(&self) -> Vec3<T> {
        self.camera.pose.center()
    }

    pub fn ray_dirs(&self) -> &[Vec3<T>] {
        &self.ray_dirs
    }

    pub fn depths(&self) -> &[T] {
        &self.depths
    }

    /// The optimizable parameters: one ray depth per Gaussian.
    pub fn depths_mut(&mut self) -> &mut [T] {
        &mut self.depths
    }

    pub fn set_depths(&mut self, depths: &[T]) -> Result<()> {
        if depths.len() != self.depths.len() {
            return Err(Error::ShapeMismatch(format!("{} depths for {} Gaussians", depths.len(), self.len())));
        }
        self.depths.copy_from_slice(depths);
        Ok(())
    }

    pub fn colors(&self) -> &[[T; 3]] {
        &self.colors
    }

    pub fn pixel_ids(&self) -> &[(usize, usize)] {
        &self.pixel_ids
    }

    /// Gaussian index of target pixel `(col, row)`.
    #[inline]
    pub fn gaussian_at(&self, col: usize, row: usize) -> Option<usize> {
        self.index.get(col, row).copied().flatten()
    }

    #[inline]
    pub fn position(&self, k: usize) -> Vec3<T> {
        self.origin() + self.ray_dirs[k] * self.depths[k]
    }

    pub fn positions(&self) -> Vec<Vec3<T>> {
        (0..self.len()).map(|k| self.position(k)).collect()
    }

    #[inline]
    pub fn scale(&self, k: usize) -> T {
        self.scale_per_depth[k] * self.depths[k]
    }

    pub fn scales(&self) -> Vec<T> {
        (0..self.len()).map(|k| self.scale(k)).collect()
    }

    /// `∂s_k/∂d_k`.
    pub fn scale_per_depth(&self) -> &[T] {
        &self.scale_per_depth
    }

    /// Current depths written back into a target-resolution ray-depth map.
    pub fn to_depth_map(&self) -> DepthMap<T> {
        let mut values = Grid::new(self.index.width(), self.index.height(), T::zero());
        for (k, &(row, col)) in self.pixel_ids.iter().enumerate() {
            values[(col, row)] = self.depths[k];
        }
        DepthMap::from_values(values)
    }

    /// Per-Gaussian values sampled from a target-resolution map.
    pub fn sample<V: Copy>(&self, map: &Grid<V>) -> Vec<V> {
        self.pixel_ids.iter().map(|&(row, col)| map[(col, row)]).collect()
    }
}
