use crate::geometry::{pixel_center, ray_direction, Camera};
use crate::grid::{DepthMap, Grid, Mask};
use crate::scalar::Real;

/// Pixel radius within which a warped target sample marks a context pixel.
pub const DEFAULT_WARP_RADIUS: f64 = 1.0;

/// Context pixels near at least one forward-warped valid target pixel.
pub fn disocclusion_mask<T: Real>(target_depth: &DepthMap<T>, target: &Camera<T>, context: &Camera<T>, radius: T) -> Mask {
    let (cw, ch) = (context.width(), context.height());
    let mut mask = Grid::new(cw, ch, false);
    let half = T::lit(0.5);
    let r2 = radius * radius;
    for y in 0..target_depth.height() {
        for x in 0..target_depth.width() {
            let Some(d) = target_depth.get(x, y) else { continue };
            let (u, v) = pixel_center(x, y);
            let p = target.pose.camera_to_world(ray_direction(u, v, &target.intrinsics) * d);
            let Some(q) = context.project(p) else { continue };
            let x0 = (q.u - radius - half).ceil().max(T::zero());
            let x1 = (q.u + radius - half).floor().min(T::from_usize_lossy(cw) - T::one());
            let y0 = (q.v - radius - half).ceil().max(T::zero());
            let y1 = (q.v + radius - half).floor().min(T::from_usize_lossy(ch) - T::one());
            if !(x0 <= x1 && y0 <= y1) {
                continue;
            }
            let (x0, x1, y0, y1) = (x0.as_f64() as usize, x1.as_f64() as usize, y0.as_f64() as usize, y1.as_f64() as usize);
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    let (pu, pv) = pixel_center::<T>(cx, cy);
                    if (pu - q.u).powi(2) + (pv - q.v).powi(2) <= r2 {
                        mask[(cx, cy)] = true;
                    }
                }
            }
        }
    }
    mask
}
