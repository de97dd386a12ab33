//! Forward splatting of pixel-aligned Gaussians with occlusion-aware blending.
//!
//! A pixel only blends Gaussians whose projected mean lies within
//! `radius_threshold` pixels of its center, and among those only the ones no
//! deeper than the first such Gaussian plus `depth_threshold`. Blending is
//! front to back in nondecreasing camera z, ties broken by Gaussian index.

use rayon::prelude::*;

use crate::cloud::PixelGaussianCloud;
use crate::error::{Error, Result};
use crate::geometry::{pixel_center, Camera, DEFAULT_Z_NEAR};
use crate::grid::{ColorImage, Grid};
use crate::linalg::{Sym2, Vec3};
use crate::scalar::Real;

/// Blending stops once transmittance falls below this value.
pub const TRANSMITTANCE_STOP: f64 = 1e-4;
/// Minimum accumulated alpha for the depth buffer to be normalized.
pub const MIN_DEPTH_ALPHA: f64 = 1e-6;
/// Low-pass term added to every projected covariance, in px².
pub const DEFAULT_LOW_PASS: f64 = 0.3;
pub const DEFAULT_ALPHA_CAP: f64 = 0.99;
pub const DEFAULT_TILE_SIZE: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RasterSettings<T> {
    /// Maximum pixel distance between a pixel center and a contributing 2D mean.
    pub radius_threshold: T,
    /// World-unit depth window behind the first radius-passing Gaussian.
    pub depth_threshold: T,
    pub background: [T; 3],
    pub alpha_cap: T,
    /// Use `exp(−½ δᵀΣ⁻¹δ)` instead of `exp(−δᵀΣ⁻¹δ)`.
    pub half_exponent: bool,
    pub low_pass: T,
    pub z_near: T,
    pub tile_size: usize,
    /// When false both gates are disabled and Gaussians cover their 3σ extent.
    pub occlusion_aware: bool,
}

impl<T: Real> RasterSettings<T> {
    pub fn new(radius_threshold: T, depth_threshold: T) -> Result<Self> {
        let s = Self { radius_threshold, depth_threshold, ..Self::default() };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius_threshold > T::zero()) {
            return Err(Error::invalid("radius threshold must be positive"));
        }
        if !(self.depth_threshold > T::zero()) {
            return Err(Error::invalid("depth threshold must be positive"));
        }
        if !(self.alpha_cap > T::zero() && self.alpha_cap <= T::one()) {
            return Err(Error::invalid("alpha cap must lie in (0, 1]"));
        }
        if self.tile_size == 0 {
            return Err(Error::invalid("tile size must be nonzero"));
        }
        Ok(())
    }

    /// Exponent multiplier κ in `G = exp(−κ δᵀΣ⁻¹δ)`.
    #[inline]
    pub fn exponent_scale(&self) -> T {
        if self.half_exponent {
            T::lit(0.5)
        } else {
            T::one()
        }
    }
}

impl<T: Real> Default for RasterSettings<T> {
    fn default() -> Self {
        Self {
            radius_threshold: T::lit(1.42),
            depth_threshold: T::lit(1.0),
            background: [T::zero(); 3],
            alpha_cap: T::lit(DEFAULT_ALPHA_CAP),
            half_exponent: false,
            low_pass: T::lit(DEFAULT_LOW_PASS),
            z_near: T::lit(DEFAULT_Z_NEAR),
            tile_size: DEFAULT_TILE_SIZE,
            occlusion_aware: true,
        }
    }
}

/// Screen-space footprint of every Gaussian of a cloud in one view.
#[derive(Clone, Debug)]
pub struct SplatProjection<T> {
    pub width: usize,
    pub height: usize,
    pub mean2d: Vec<[T; 2]>,
    pub cov2d: Vec<Sym2<T>>,
    /// Inverse of `cov2d`; zero where singular.
    pub conic: Vec<Sym2<T>>,
    pub z: Vec<T>,
    /// 3σ radius in pixels.
    pub extent_px: Vec<T>,
    pub in_frustum: Vec<bool>,
    pub singular: Vec<bool>,
    /// Camera-frame centers.
    pub cam_points: Vec<Vec3<T>>,
    pub scales: Vec<T>,
}

impl<T: Real> SplatProjection<T> {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    #[inline]
    pub(crate) fn active(&self, k: usize) -> bool {
        self.in_frustum[k] && !self.singular[k]
    }
}

/// `J·Jᵀ` for the perspective Jacobian at camera-frame point `p`.
#[inline]
pub(crate) fn jacobian_outer<T: Real>(p: Vec3<T>, fx: T, fy: T) -> Sym2<T> {
    let iz = T::one() / p.z;
    let iz2 = iz * iz;
    let iz4 = iz2 * iz2;
    Sym2::new(
        fx * fx * (iz2 + p.x * p.x * iz4),
        fx * fy * p.x * p.y * iz4,
        fy * fy * (iz2 + p.y * p.y * iz4),
    )
}

/// Projects every Gaussian of `cloud` into `view` (EWA, spherical covariance).
pub fn project_gaussians<T: Real>(
    cloud: &PixelGaussianCloud<T>,
    view: &Camera<T>,
    settings: &RasterSettings<T>,
) -> SplatProjection<T> {
    let n = cloud.len();
    let k = &view.intrinsics;
    let (w, h) = (T::from_usize_lossy(k.width), T::from_usize_lossy(k.height));
    let mut out = SplatProjection {
        width: k.width,
        height: k.height,
        mean2d: vec![[T::zero(); 2]; n],
        cov2d: vec![Sym2::default(); n],
        conic: vec![Sym2::default(); n],
        z: vec![T::zero(); n],
        extent_px: vec![T::zero(); n],
        in_frustum: vec![false; n],
        singular: vec![false; n],
        cam_points: vec![Vec3::zero(); n],
        scales: cloud.scales(),
    };
    for i in 0..n {
        let p = view.pose.world_to_camera(cloud.position(i));
        out.cam_points[i] = p;
        out.z[i] = p.z;
        if !(p.z > settings.z_near) {
            continue;
        }
        let s = out.scales[i];
        let jj = jacobian_outer(p, k.fx, k.fy);
        let s2 = s * s;
        let cov = Sym2::new(s2 * jj.a + settings.low_pass, s2 * jj.b, s2 * jj.c + settings.low_pass);
        let mean = [k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy];
        let extent = T::lit(3.0) * cov.max_eigenvalue().max(T::zero()).sqrt();
        out.mean2d[i] = mean;
        out.cov2d[i] = cov;
        out.extent_px[i] = extent;
        match cov.inverse() {
            Some(inv) => out.conic[i] = inv,
            None => out.singular[i] = true,
        }
        out.in_frustum[i] = mean[0] >= -extent
            && mean[0] <= w + extent
            && mean[1] >= -extent
            && mean[1] <= h + extent
            && mean[0].is_finite()
            && mean[1].is_finite();
    }
    out
}

/// One blended term of a pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contributor<T> {
    pub gaussian: u32,
    /// `alpha · transmittance`.
    pub weight: T,
    /// Transmittance before this term.
    pub transmittance: T,
    pub alpha: T,
    /// Whether `alpha` was clamped to the cap (no gradient through G).
    pub capped: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RasterDiagnostics {
    pub singular: usize,
    pub out_of_frustum: usize,
    /// Radius-passing candidates rejected by the depth gate, summed over pixels.
    pub depth_gated: usize,
    /// Pixels whose blending stopped on the transmittance floor.
    pub early_stops: usize,
}

#[derive(Clone, Debug)]
pub struct RenderBuffers<T> {
    pub color: ColorImage<T>,
    /// Accumulated opacity `1 − T_final`.
    pub alpha: Grid<T>,
    /// Alpha-normalized blended camera z; zero where alpha ≤ 1e-6.
    pub depth: Grid<T>,
    offsets: Vec<usize>,
    records: Vec<Contributor<T>>,
    pub diagnostics: RasterDiagnostics,
}

impl<T: Real> RenderBuffers<T> {
    pub fn width(&self) -> usize {
        self.color.width()
    }

    pub fn height(&self) -> usize {
        self.color.height()
    }

    /// Contributors of pixel `(x, y)` in blend order.
    #[inline]
    pub fn contributors(&self, x: usize, y: usize) -> &[Contributor<T>] {
        let p = self.color.offset(x, y);
        &self.records[self.offsets[p]..self.offsets[p + 1]]
    }

    pub fn total_contributors(&self) -> usize {
        self.records.len()
    }
}

/// Per-pixel candidate lists in compressed row storage, unsorted.
struct Candidates {
    offsets: Vec<usize>,
    ids: Vec<u32>,
}

#[inline]
fn pixel_span<T: Real>(center: T, r: T, len: usize) -> Option<(usize, usize)> {
    let half = T::lit(0.5);
    let lo = (center - r - half).ceil().max(T::zero());
    let hi = (center + r - half).floor().min(T::from_usize_lossy(len) - T::one());
    if !(lo <= hi) {
        return None;
    }
    Some((lo.to_usize()?, hi.to_usize()?))
}

fn for_each_covered_pixel<T: Real>(
    proj: &SplatProjection<T>,
    settings: &RasterSettings<T>,
    k: usize,
    mut f: impl FnMut(usize),
) {
    let r = if settings.occlusion_aware { settings.radius_threshold } else { proj.extent_px[k] };
    let [mx, my] = proj.mean2d[k];
    let (Some((x0, x1)), Some((y0, y1))) = (pixel_span(mx, r, proj.width), pixel_span(my, r, proj.height)) else {
        return;
    };
    let r2 = r * r;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (u, v) = pixel_center::<T>(x, y);
            let (dx, dy) = (u - mx, v - my);
            if dx * dx + dy * dy <= r2 {
                f(y * proj.width + x);
            }
        }
    }
}

fn gather_candidates<T: Real>(proj: &SplatProjection<T>, settings: &RasterSettings<T>) -> Candidates {
    let npix = proj.width * proj.height;
    let mut counts = vec![0usize; npix + 1];
    for k in 0..proj.len() {
        if proj.active(k) {
            for_each_covered_pixel(proj, settings, k, |p| counts[p + 1] += 1);
        }
    }
    for p in 0..npix {
        counts[p + 1] += counts[p];
    }
    let mut cursor = counts.clone();
    let mut ids = vec![0u32; counts[npix]];
    for k in 0..proj.len() {
        if proj.active(k) {
            for_each_covered_pixel(proj, settings, k, |p| {
                ids[cursor[p]] = k as u32;
                cursor[p] += 1;
            });
        }
    }
    Candidates { offsets: counts, ids }
}

#[inline]
pub(crate) fn gaussian_value<T: Real>(proj: &SplatProjection<T>, k: usize, u: T, v: T, kappa: T) -> T {
    let [mx, my] = proj.mean2d[k];
    (-kappa * proj.conic[k].quad_form(u - mx, v - my)).exp()
}

struct PixelResult<T> {
    color: [T; 3],
    alpha: T,
    depth: T,
    gated: usize,
    stopped: bool,
}

fn blend_pixel<T: Real>(
    x: usize,
    y: usize,
    order: &[u32],
    proj: &SplatProjection<T>,
    colors: &[[T; 3]],
    settings: &RasterSettings<T>,
    out: &mut Vec<Contributor<T>>,
) -> PixelResult<T> {
    let (u, v) = pixel_center::<T>(x, y);
    let kappa = settings.exponent_scale();
    let stop = T::lit(TRANSMITTANCE_STOP);
    let mut trans = T::one();
    let mut color = [T::zero(); 3];
    let mut zsum = T::zero();
    let mut gated = 0;
    let mut stopped = false;
    let z_front = order.first().map(|&k| proj.z[k as usize]);
    for (i, &id) in order.iter().enumerate() {
        let k = id as usize;
        if settings.occlusion_aware {
            if let Some(front) = z_front {
                if proj.z[k] > front + settings.depth_threshold {
                    gated = order.len() - i;
                    break;
                }
            }
        }
        let g = gaussian_value(proj, k, u, v, kappa);
        let capped = g >= settings.alpha_cap;
        let alpha = if capped { settings.alpha_cap } else { g };
        let weight = alpha * trans;
        for c in 0..3 {
            color[c] += weight * colors[k][c];
        }
        zsum += weight * proj.z[k];
        out.push(Contributor { gaussian: id, weight, transmittance: trans, alpha, capped });
        trans = trans * (T::one() - alpha);
        if trans < stop {
            stopped = true;
            break;
        }
    }
    for c in 0..3 {
        color[c] += trans * settings.background[c];
    }
    let alpha = T::one() - trans;
    let depth = if alpha > T::lit(MIN_DEPTH_ALPHA) { zsum / alpha } else { T::zero() };
    PixelResult { color, alpha, depth, gated, stopped }
}

/// Sorts candidate ids by camera z, ties by index.
#[inline]
pub(crate) fn sort_front_to_back<T: Real>(ids: &mut [u32], z: &[T]) {
    ids.sort_unstable_by(|&a, &b| {
        z[a as usize]
            .partial_cmp(&z[b as usize])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
}

/// Pixel tiles in row-major tile order, each as `(x0, y0, x1, y1)` exclusive bounds.
pub(crate) fn tiles(width: usize, height: usize, size: usize) -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    for ty in (0..height).step_by(size) {
        for tx in (0..width).step_by(size) {
            out.push((tx, ty, (tx + size).min(width), (ty + size).min(height)));
        }
    }
    out
}

struct TileOutput<T> {
    pixels: Vec<(usize, PixelResult<T>, usize)>,
    records: Vec<Contributor<T>>,
}

pub fn rasterize<T: Real>(
    proj: &SplatProjection<T>,
    colors: &[[T; 3]],
    settings: &RasterSettings<T>,
) -> Result<RenderBuffers<T>> {
    if colors.len() != proj.len() {
        return Err(Error::ShapeMismatch(format!("{} colors for {} projected Gaussians", colors.len(), proj.len())));
    }
    settings.validate()?;
    let (w, h) = (proj.width, proj.height);
    let cands = gather_candidates(proj, settings);

    let tile_outputs: Vec<TileOutput<T>> = tiles(w, h, settings.tile_size)
        .into_par_iter()
        .map(|(x0, y0, x1, y1)| {
            let mut out = TileOutput { pixels: Vec::with_capacity((x1 - x0) * (y1 - y0)), records: Vec::new() };
            let mut order = Vec::new();
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = y * w + x;
                    order.clear();
                    order.extend_from_slice(&cands.ids[cands.offsets[p]..cands.offsets[p + 1]]);
                    sort_front_to_back(&mut order, &proj.z);
                    let start = out.records.len();
                    let res = blend_pixel(x, y, &order, proj, colors, settings, &mut out.records);
                    out.pixels.push((p, res, out.records.len() - start));
                }
            }
            out
        })
        .collect();

    let mut color = Grid::new(w, h, settings.background);
    let mut alpha = Grid::new(w, h, T::zero());
    let mut depth = Grid::new(w, h, T::zero());
    let mut counts = vec![0usize; w * h + 1];
    let mut diagnostics = RasterDiagnostics::default();
    for t in &tile_outputs {
        for (p, _, n) in &t.pixels {
            counts[p + 1] = *n;
        }
    }
    for p in 0..w * h {
        counts[p + 1] += counts[p];
    }
    let mut records = vec![
        Contributor { gaussian: 0, weight: T::zero(), transmittance: T::zero(), alpha: T::zero(), capped: false };
        counts[w * h]
    ];
    for t in tile_outputs {
        let mut cursor = 0;
        for (p, res, n) in t.pixels {
            records[counts[p]..counts[p] + n].copy_from_slice(&t.records[cursor..cursor + n]);
            cursor += n;
            let (x, y) = (p % w, p / w);
            color[(x, y)] = res.color;
            alpha[(x, y)] = res.alpha;
            depth[(x, y)] = res.depth;
            diagnostics.depth_gated += res.gated;
            diagnostics.early_stops += res.stopped as usize;
        }
    }
    diagnostics.singular = proj.singular.iter().filter(|&&s| s).count();
    diagnostics.out_of_frustum = proj.in_frustum.iter().filter(|&&f| !f).count();
    Ok(RenderBuffers { color, alpha, depth, offsets: counts, records, diagnostics })
}

/// Projects and rasterizes `cloud` into `view`.
pub fn render<T: Real>(
    cloud: &PixelGaussianCloud<T>,
    view: &Camera<T>,
    settings: &RasterSettings<T>,
) -> Result<(SplatProjection<T>, RenderBuffers<T>)> {
    let proj = project_gaussians(cloud, view, settings);
    let buffers = rasterize(&proj, cloud.colors(), settings)?;
    Ok((proj, buffers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraIntrinsics, CameraPose};
    use crate::grid::DepthMap;

    fn single_splat(mean: [f64; 2], z: f64) -> SplatProjection<f64> {
        let cov = Sym2::new(0.55, 0.0, 0.55);
        SplatProjection {
            width: 4,
            height: 4,
            mean2d: vec![mean],
            cov2d: vec![cov],
            conic: vec![cov.inverse().unwrap()],
            z: vec![z],
            extent_px: vec![3.0 * 0.55f64.sqrt()],
            in_frustum: vec![true],
            singular: vec![false],
            cam_points: vec![Vec3::new(0.0, 0.0, z)],
            scales: vec![0.0],
        }
    }

    fn merge(a: SplatProjection<f64>, b: SplatProjection<f64>) -> SplatProjection<f64> {
        let mut a = a;
        a.mean2d.extend(b.mean2d);
        a.cov2d.extend(b.cov2d);
        a.conic.extend(b.conic);
        a.z.extend(b.z);
        a.extent_px.extend(b.extent_px);
        a.in_frustum.extend(b.in_frustum);
        a.singular.extend(b.singular);
        a.cam_points.extend(b.cam_points);
        a.scales.extend(b.scales);
        a
    }

    #[test]
    fn single_opaque_term() {
        let proj = single_splat([1.5, 1.5], 1.0);
        let mut s = RasterSettings::new(1.42, 0.1).unwrap();
        s.background = [0.2, 0.2, 0.2];
        let b = rasterize(&proj, &[[1.0, 0.5, 0.0]], &s).unwrap();
        let c = b.color[(1, 1)];
        let w = s.alpha_cap;
        for (ch, &col) in [1.0, 0.5, 0.0].iter().enumerate() {
            assert!((c[ch] - ((1.0 - w) * 0.2 + w * col)).abs() < 1e-15);
        }
        s.alpha_cap = 1.0;
        s.background = [0.0; 3];
        let b = rasterize(&proj, &[[1.0, 0.5, 0.0]], &s).unwrap();
        assert_eq!(b.color[(1, 1)], [1.0, 0.5, 0.0]);
        assert_eq!(b.depth[(1, 1)], 1.0);
    }

    #[test]
    fn second_term_weight() {
        let proj = merge(single_splat([1.5, 1.5], 1.0), single_splat([1.5, 1.5], 1.05));
        let s = RasterSettings::new(1.42, 0.1).unwrap();
        let b = rasterize(&proj, &[[1.0; 3], [0.0; 3]], &s).unwrap();
        let c = b.contributors(1, 1);
        assert_eq!(c.len(), 2);
        assert!((c[1].weight - s.alpha_cap * (1.0 - s.alpha_cap)).abs() < 1e-15);
        let sum: f64 = c.iter().map(|r| r.weight).sum();
        assert!((sum + (1.0 - b.alpha[(1, 1)]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rear_gaussian_beyond_depth_threshold_is_ignored() {
        let dt = 0.1;
        let proj = merge(single_splat([1.5, 1.5], 1.0), single_splat([1.6, 1.4], 1.0 + 2.0 * dt));
        let s = RasterSettings::new(1.42, dt).unwrap();
        let b = rasterize(&proj, &[[1.0; 3], [0.0, 1.0, 0.0]], &s).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                assert!(b.contributors(x, y).iter().all(|c| c.gaussian == 0));
            }
        }
        assert!(b.diagnostics.depth_gated > 0);
    }

    #[test]
    fn radius_gate_is_measured_from_pixel_center() {
        let proj = single_splat([1.5 + 1.43, 1.5], 1.0);
        let s = RasterSettings::new(1.42, 0.1).unwrap();
        let b = rasterize(&proj, &[[1.0; 3]], &s).unwrap();
        assert!(b.contributors(1, 1).is_empty());
        assert_eq!(b.contributors(2, 1).len(), 1);
    }

    #[test]
    fn on_axis_footprint_is_half_a_pixel() {
        let f = 300.0f64;
        let k = CameraIntrinsics::new(f, f, 2.5, 2.5, 5, 5).unwrap();
        let cam = Camera::new(k, CameraPose::identity());
        let depth = DepthMap::from_values(Grid::new(5, 5, 7.0));
        let cloud = PixelGaussianCloud::init_from_depth(&Grid::new(5, 5, [0.3; 3]), &depth, &cam, None).unwrap();
        let mut s = RasterSettings::default();
        s.low_pass = 0.0;
        let proj = project_gaussians(&cloud, &cam, &s);
        let c = cloud.gaussian_at(2, 2).unwrap();
        let cov = proj.cov2d[c];
        assert!((cov.a - 0.25).abs() < 1e-12 && cov.b.abs() < 1e-15 && (cov.c - 0.25).abs() < 1e-12);
        assert!((cov.a.sqrt() - 0.5).abs() < 1e-9);
        assert_eq!(proj.mean2d[c], [2.5, 2.5]);

        // Doubling the scale doubles the projected σ.
        let mut c2 = cloud.clone();
        let d2: Vec<f64> = c2.depths().iter().map(|d| d * 2.0).collect();
        c2.set_depths(&d2).unwrap();
        let cam_far = Camera::new(k, CameraPose::new(crate::linalg::Mat3::identity(), Vec3::new(0.0, 0.0, 7.0)).unwrap());
        let p2 = project_gaussians(&c2, &cam_far, &s);
        assert!((p2.cov2d[c].a.sqrt() - 2.0 * cov.a.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn behind_camera_is_out_of_frustum() {
        let k = CameraIntrinsics::new(10.0, 10.0, 1.0, 1.0, 2, 2).unwrap();
        let cam = Camera::new(k, CameraPose::identity());
        let depth = DepthMap::from_values(Grid::new(2, 2, 1.0));
        let cloud = PixelGaussianCloud::init_from_depth(&Grid::new(2, 2, [0.3; 3]), &depth, &cam, None).unwrap();
        let back = CameraPose::new(crate::linalg::Mat3::identity(), Vec3::new(0.0, 0.0, 5.0)).unwrap();
        let proj = project_gaussians(&cloud, &Camera::new(k, back), &RasterSettings::default());
        assert!(proj.in_frustum.iter().all(|&f| !f));
        assert_eq!(proj.len(), 4);
    }

    #[test]
    fn colors_length_mismatch_is_an_error() {
        let proj = single_splat([1.5, 1.5], 1.0);
        assert!(rasterize(&proj, &[], &RasterSettings::default()).is_err());
    }
}
