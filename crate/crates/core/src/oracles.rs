//! Slow reference implementations for tests.

use crate::cloud::PixelGaussianCloud;
use crate::error::Result;
use crate::geometry::{pixel_center, Camera};
use crate::grid::{ColorImage, Grid};
use crate::pipeline::Objective;
use crate::rasterizer::{RasterSettings, MIN_DEPTH_ALPHA, TRANSMITTANCE_STOP};
use crate::scalar::Real;

/// Per-pixel output of [`render_brute_force`].
#[derive(Clone, Debug)]
pub struct BruteRender<T> {
    pub color: ColorImage<T>,
    pub alpha: Grid<T>,
    pub depth: Grid<T>,
    /// `(gaussian, alpha·transmittance)` in blend order.
    pub contributors: Grid<Vec<(u32, T)>>,
}

struct Splat<T> {
    u: T,
    v: T,
    z: T,
    /// Inverse covariance `[a, b, c]` of `[[a, b], [b, c]]`.
    conic: [T; 3],
    extent: T,
}

fn project_one<T: Real>(cloud: &PixelGaussianCloud<T>, view: &Camera<T>, settings: &RasterSettings<T>, k: usize) -> Option<Splat<T>> {
    let p = view.pose.world_to_camera(cloud.position(k));
    if !(p.z > settings.z_near) {
        return None;
    }
    let intr = &view.intrinsics;
    let j = [
        [intr.fx / p.z, T::zero(), -intr.fx * p.x / (p.z * p.z)],
        [T::zero(), intr.fy / p.z, -intr.fy * p.y / (p.z * p.z)],
    ];
    let s2 = cloud.scale(k) * cloud.scale(k);
    let dot = |a: usize, b: usize| (0..3).map(|i| j[a][i] * j[b][i]).sum::<T>() * s2;
    let (a, b, c) = (dot(0, 0) + settings.low_pass, dot(0, 1), dot(1, 1) + settings.low_pass);
    let det = a * c - b * b;
    if !(det > T::zero()) {
        return None;
    }
    let half_trace = (a + c) * T::lit(0.5);
    let lmax = half_trace + (half_trace * half_trace - det).max(T::zero()).sqrt();
    Some(Splat {
        u: intr.fx * p.x / p.z + intr.cx,
        v: intr.fy * p.y / p.z + intr.cy,
        z: p.z,
        conic: [c / det, -b / det, a / det],
        extent: T::lit(3.0) * lmax.sqrt(),
    })
}

/// Blends every Gaussian of the cloud at every pixel with the same gates as the
/// tiled rasterizer, without binning or parallelism.
pub fn render_brute_force<T: Real>(cloud: &PixelGaussianCloud<T>, view: &Camera<T>, settings: &RasterSettings<T>) -> BruteRender<T> {
    let (w, h) = (view.width(), view.height());
    let splats: Vec<Option<Splat<T>>> = (0..cloud.len()).map(|k| project_one(cloud, view, settings, k)).collect();
    let kappa = if settings.half_exponent { T::lit(0.5) } else { T::one() };
    let mut out = BruteRender {
        color: Grid::new(w, h, settings.background),
        alpha: Grid::new(w, h, T::zero()),
        depth: Grid::new(w, h, T::zero()),
        contributors: Grid::new(w, h, Vec::new()),
    };
    for y in 0..h {
        for x in 0..w {
            let (pu, pv) = pixel_center::<T>(x, y);
            let mut cand: Vec<usize> = splats
                .iter()
                .enumerate()
                .filter_map(|(k, s)| {
                    let s = s.as_ref()?;
                    let r = if settings.occlusion_aware { settings.radius_threshold } else { s.extent };
                    let (dx, dy) = (pu - s.u, pv - s.v);
                    (dx * dx + dy * dy <= r * r).then_some(k)
                })
                .collect();
            let z = |k: usize| splats[k].as_ref().map(|s| s.z).unwrap_or(T::zero());
            cand.sort_by(|&a, &b| z(a).partial_cmp(&z(b)).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
            let front = cand.first().map(|&k| z(k));
            let mut trans = T::one();
            let mut color = [T::zero(); 3];
            let mut zsum = T::zero();
            let mut list = Vec::new();
            for k in cand {
                let s = splats[k].as_ref().expect("candidate is projected");
                if settings.occlusion_aware && front.is_some_and(|f| s.z > f + settings.depth_threshold) {
                    break;
                }
                let (dx, dy) = (pu - s.u, pv - s.v);
                let q = s.conic[0] * dx * dx + T::lit(2.0) * s.conic[1] * dx * dy + s.conic[2] * dy * dy;
                let alpha = (-kappa * q).exp().min(settings.alpha_cap);
                let weight = alpha * trans;
                for c in 0..3 {
                    color[c] += weight * cloud.colors()[k][c];
                }
                zsum += weight * s.z;
                list.push((k as u32, weight));
                trans = trans * (T::one() - alpha);
                if trans < T::lit(TRANSMITTANCE_STOP) {
                    break;
                }
            }
            for c in 0..3 {
                color[c] += trans * settings.background[c];
            }
            let a = T::one() - trans;
            out.color[(x, y)] = color;
            out.alpha[(x, y)] = a;
            out.depth[(x, y)] = if a > T::lit(MIN_DEPTH_ALPHA) { zsum / a } else { T::zero() };
            out.contributors[(x, y)] = list;
        }
    }
    out
}

/// Result of scanning one depth while all others stay fixed.
#[derive(Clone, Copy, Debug)]
pub struct LineSearch {
    /// Relative offset `d/d₀ − 1` of the lowest sampled loss.
    pub best_offset: f64,
    pub best_loss: f64,
    /// Loss at offset zero.
    pub base_loss: f64,
}

/// Evaluates the objective at `d_k·(1 + o)` for every offset `o` and reports the minimum.
pub fn line_search_depth<T: Real>(objective: &Objective<T>, depths: &[T], k: usize, offsets: &[f64]) -> Result<LineSearch> {
    let mut d = depths.to_vec();
    let base_loss = objective.evaluate(&d, false)?.total().as_f64();
    let mut best = LineSearch { best_offset: 0.0, best_loss: base_loss, base_loss };
    for &o in offsets {
        if o == 0.0 {
            continue;
        }
        d[k] = depths[k] * T::lit(1.0 + o);
        let l = objective.evaluate(&d, false)?.total().as_f64();
        if l < best.best_loss {
            best.best_offset = o;
            best.best_loss = l;
        }
    }
    Ok(best)
}

/// Refines a coarse scan around its minimum: `coarse` offsets first, then the
/// neighbours of the best one at spacing `fine`.
pub fn line_search_depth_refined<T: Real>(objective: &Objective<T>, depths: &[T], k: usize, coarse: &[f64], fine: f64) -> Result<LineSearch> {
    let first = line_search_depth(objective, depths, k, coarse)?;
    let around = [first.best_offset - fine, first.best_offset + fine];
    let second = line_search_depth(objective, depths, k, &around)?;
    Ok(if second.best_loss < first.best_loss { second } else { first })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{level_objective, CameraView, RefineConfig};
    use crate::synth::SyntheticScene;

    #[test]
    fn line_search_finds_the_scanned_minimum() {
        let scene = SyntheticScene::plane_checker(0);
        let cams = scene.default_rig(12, 12, 2, 0.04).unwrap();
        let views: Vec<CameraView<f64>> =
            cams.iter().map(|c| CameraView { name: String::new(), camera: *c, image: scene.raycast(c, 2).color, mask: None }).collect();
        let gt = scene.raycast(&cams[0], 1).ray_depth;
        let ctx: Vec<&CameraView<f64>> = views[1..].iter().collect();
        let obj = level_objective(&views[0], &ctx, &gt, 1, &RefineConfig::default()).unwrap();
        let d = obj.cloud().depths().to_vec();
        let offsets: Vec<f64> = (-5..=5).map(|i| i as f64 * 2e-3).collect();
        let r = line_search_depth(&obj, &d, 40, &offsets).unwrap();
        assert!(r.best_loss <= r.base_loss);
        for &o in &offsets {
            let mut e = d.clone();
            e[40] = d[40] * (1.0 + o);
            assert!(obj.evaluate(&e, false).unwrap().total() >= r.best_loss);
        }
    }
}
