use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{backproject, pixel_center, Camera};
use crate::grid::{ColorImage, DepthMap};
use crate::linalg::Vec3;
use crate::scalar::Real;

/// Default truncation distance in voxels.
pub const DEFAULT_TRUNCATION_VOXELS: f64 = 5.0;

/// Upper bound on the number of voxels a volume may allocate.
pub const MAX_VOXELS: usize = 1 << 28;

/// Dense truncated signed distance volume.
///
/// Voxel `(i, j, k)` sits at `origin + voxel_size·(i, j, k)`, stored x-fastest.
/// Distances are normalized by the truncation and positive in front of the surface.
#[derive(Clone, Debug)]
pub struct TsdfVolume<T> {
    origin: Vec3<T>,
    voxel_size: T,
    truncation: T,
    dims: [usize; 3],
    tsdf: Vec<T>,
    weight: Vec<T>,
    color: Option<Vec<[T; 3]>>,
}

impl<T: Real> TsdfVolume<T> {
    pub fn new(origin: Vec3<T>, voxel_size: T, dims: [usize; 3], truncation: T) -> Result<Self> {
        if !(voxel_size > T::zero()) || !voxel_size.is_finite() {
            return Err(Error::invalid("voxel size must be positive and finite"));
        }
        if !(truncation >= voxel_size) || !truncation.is_finite() {
            return Err(Error::invalid("truncation must be at least one voxel"));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::invalid(format!("volume dims {dims:?}: each must be at least 2 (voxel too large for the extent)")));
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= MAX_VOXELS)
            .ok_or_else(|| Error::invalid(format!("volume dims {dims:?} exceed {MAX_VOXELS} voxels")))?;
        Ok(Self {
            origin,
            voxel_size,
            truncation,
            dims,
            tsdf: vec![T::one(); n],
            weight: vec![T::zero(); n],
            color: None,
        })
    }

    /// Volume covering `[lo, hi]`, rounded outward to whole voxels.
    pub fn from_bounds(lo: Vec3<T>, hi: Vec3<T>, voxel_size: T, truncation: T) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::invalid("non-finite volume bounds"));
        }
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let extent = (hi[a] - lo[a]).max(T::zero());
            let cells = (extent / voxel_size).ceil().to_usize().unwrap_or(usize::MAX);
            dims[a] = cells.saturating_add(1);
        }
        Self::new(lo, voxel_size, dims, truncation)
    }

    /// Volume enclosing every valid back-projected depth, inflated by three truncations.
    /// The voxel must be smaller than the largest extent of the points.
    pub fn enclosing(depths: &[&DepthMap<T>], cameras: &[Camera<T>], voxel_size: T, truncation: T) -> Result<Self> {
        if depths.len() != cameras.len() {
            return Err(Error::ShapeMismatch(format!("{} depth maps but {} cameras", depths.len(), cameras.len())));
        }
        let mut lo = Vec3::new(T::infinity(), T::infinity(), T::infinity());
        let mut hi = Vec3::new(T::neg_infinity(), T::neg_infinity(), T::neg_infinity());
        let mut any = false;
        for (depth, cam) in depths.iter().zip(cameras) {
            let vmap = backproject(depth, &cam.intrinsics, &cam.pose);
            for (p, _) in vmap.positions.iter().zip(vmap.valid.iter()).filter(|(_, &v)| v) {
                for a in 0..3 {
                    lo = set_axis(lo, a, lo[a].min(p[a]));
                    hi = set_axis(hi, a, hi[a].max(p[a]));
                }
                any = true;
            }
        }
        if !any {
            return Err(Error::NoValidPixels("no valid depth to bound the volume".into()));
        }
        let span = (0..3).map(|a| hi[a] - lo[a]).fold(T::zero(), |m, e| m.max(e));
        if !(voxel_size < span) {
            return Err(Error::invalid(format!("voxel size {voxel_size} is not smaller than the surface extent {span}")));
        }
        let pad = T::lit(3.0) * truncation;
        let pad = Vec3::new(pad, pad, pad);
        Self::from_bounds(lo - pad, hi + pad, voxel_size, truncation)
    }

    /// Volume filled by sampling a signed distance function at every voxel, weight 1.
    pub fn from_sdf(origin: Vec3<T>, voxel_size: T, dims: [usize; 3], truncation: T, sdf: impl Fn(Vec3<T>) -> T + Sync) -> Result<Self> {
        let mut vol = Self::new(origin, voxel_size, dims, truncation)?;
        let (nx, ny) = (dims[0], dims[1]);
        let vs = vol.voxel_size;
        let o = vol.origin;
        vol.tsdf.par_chunks_mut(nx * ny).zip(vol.weight.par_chunks_mut(nx * ny)).enumerate().for_each(|(k, (ts, ws))| {
            for j in 0..ny {
                for i in 0..nx {
                    let p = voxel_point(o, vs, i, j, k);
                    ts[j * nx + i] = (sdf(p) / truncation).max(-T::one()).min(T::one());
                    ws[j * nx + i] = T::one();
                }
            }
        });
        Ok(vol)
    }

    pub fn origin(&self) -> Vec3<T> {
        self.origin
    }

    pub fn voxel_size(&self) -> T {
        self.voxel_size
    }

    pub fn truncation(&self) -> T {
        self.truncation
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.tsdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tsdf.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Vec3<T> {
        voxel_point(self.origin, self.voxel_size, i, j, k)
    }

    pub fn tsdf(&self) -> &[T] {
        &self.tsdf
    }

    pub fn weights(&self) -> &[T] {
        &self.weight
    }

    pub fn colors(&self) -> Option<&[[T; 3]]> {
        self.color.as_deref()
    }

    /// Fuses one depth map (ray lengths) observed from `view`.
    ///
    /// Each voxel projecting to a valid pixel gets `sd = d_e − z_voxel`, is skipped when
    /// `sd ≤ −truncation`, and otherwise averages `clamp(sd / truncation, −1, 1)` with weight 1.
    pub fn integrate(&mut self, depth: &DepthMap<T>, color: Option<&ColorImage<T>>, view: &Camera<T>) -> Result<()> {
        if depth.width() != view.width() || depth.height() != view.height() {
            return Err(Error::ShapeMismatch("depth map does not match the camera size".into()));
        }
        if let Some(c) = color {
            if c.width() != depth.width() || c.height() != depth.height() {
                return Err(Error::ShapeMismatch("color image does not match the depth map".into()));
            }
            if self.color.is_none() {
                self.color = Some(vec![[T::zero(); 3]; self.tsdf.len()]);
            }
        }
        let intr = view.intrinsics;
        let z: Vec<Option<T>> = (0..depth.height())
            .flat_map(|y| (0..depth.width()).map(move |x| (x, y)))
            .map(|(x, y)| {
                depth.get(x, y).map(|d| {
                    let (u, v) = pixel_center::<T>(x, y);
                    d * intr.perspective_factor(u, v)
                })
            })
            .collect();
        let (nx, ny) = (self.dims[0], self.dims[1]);
        let (o, vs, trunc) = (self.origin, self.voxel_size, self.truncation);
        let w = depth.width();
        let (wf, hf) = (T::from_usize_lossy(depth.width()), T::from_usize_lossy(depth.height()));
        let slab = nx * ny;
        let mut dummy = Vec::new();
        let colors: &mut [[T; 3]] = self.color.as_deref_mut().unwrap_or(&mut dummy);
        let color_chunks: Vec<&mut [[T; 3]]> = if colors.is_empty() { Vec::new() } else { colors.chunks_mut(slab).collect() };
        let mut color_iter = color_chunks.into_iter();
        let mut jobs = Vec::with_capacity(self.dims[2]);
        for (k, (ts, ws)) in self.tsdf.chunks_mut(slab).zip(self.weight.chunks_mut(slab)).enumerate() {
            jobs.push((k, ts, ws, color_iter.next()));
        }
        jobs.into_par_iter().for_each(|(k, ts, ws, mut cs)| {
            for j in 0..ny {
                for i in 0..nx {
                    let p = voxel_point(o, vs, i, j, k);
                    let Some(pr) = view.project(p) else { continue };
                    if !(pr.u >= T::zero() && pr.v >= T::zero() && pr.u < wf && pr.v < hf) {
                        continue;
                    }
                    let (px, py) = (pr.u.floor().to_usize().unwrap_or(0), pr.v.floor().to_usize().unwrap_or(0));
                    let Some(d_e) = z[py * w + px] else { continue };
                    let sd = d_e - pr.z;
                    if sd <= -trunc {
                        continue;
                    }
                    let f = (sd / trunc).min(T::one());
                    let idx = j * nx + i;
                    let wn = ws[idx] + T::one();
                    ts[idx] = (ts[idx] * ws[idx] + f) / wn;
                    if let (Some(cs), Some(img)) = (cs.as_deref_mut(), color) {
                        let c = img[(px, py)];
                        for ch in 0..3 {
                            cs[idx][ch] = (cs[idx][ch] * ws[idx] + c[ch]) / wn;
                        }
                    }
                    ws[idx] = wn;
                }
            }
        });
        Ok(())
    }
}

#[inline]
fn voxel_point<T: Real>(o: Vec3<T>, vs: T, i: usize, j: usize, k: usize) -> Vec3<T> {
    o + Vec3::new(T::from_usize_lossy(i), T::from_usize_lossy(j), T::from_usize_lossy(k)) * vs
}

fn set_axis<T: Real>(v: Vec3<T>, axis: usize, value: T) -> Vec3<T> {
    let mut a = v.to_array();
    a[axis] = value;
    Vec3::from_array(a)
}

/// Integrates every view into a volume that encloses all of them.
pub fn fuse_depths<T: Real>(
    depths: &[&DepthMap<T>],
    colors: Option<&[&ColorImage<T>]>,
    cameras: &[Camera<T>],
    voxel_size: T,
    truncation: T,
) -> Result<TsdfVolume<T>> {
    if let Some(c) = colors {
        if c.len() != depths.len() {
            return Err(Error::ShapeMismatch(format!("{} color images for {} depth maps", c.len(), depths.len())));
        }
    }
    let mut vol = TsdfVolume::enclosing(depths, cameras, voxel_size, truncation)?;
    for (i, (d, cam)) in depths.iter().zip(cameras).enumerate() {
        vol.integrate(d, colors.map(|c| c[i]), cam)?;
    }
    Ok(vol)
}
