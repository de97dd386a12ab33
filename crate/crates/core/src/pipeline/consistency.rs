use rayon::prelude::*;

use crate::geometry::{pixel_center, Camera};
use crate::grid::{DepthMap, Grid, Mask};
use crate::scalar::Real;

/// Keeps a pixel when its point, projected into at least `min_views` other
/// views, lands on a valid pixel whose ray depth agrees within relative `tau`.
pub fn consistency_filter<T: Real>(depths: &[DepthMap<T>], views: &[Camera<T>], tau: T, min_views: usize) -> Vec<Mask> {
    (0..depths.len())
        .into_par_iter()
        .map(|i| {
            let cam = &views[i];
            let d = &depths[i];
            Grid::from_fn(d.width(), d.height(), |x, y| {
                let Some(di) = d.get(x, y) else { return false };
                let (u, v) = pixel_center(x, y);
                let p = cam.pose.center() + cam.world_ray(u, v) * di;
                let mut agree = 0;
                for (j, other) in views.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let Some(q) = other.project(p) else { continue };
                    if q.u < T::zero() || q.v < T::zero() {
                        continue;
                    }
                    let (Some(px), Some(py)) = (q.u.floor().to_usize(), q.v.floor().to_usize()) else { continue };
                    let Some(dj) = depths[j].get(px, py) else { continue };
                    let dproj = (p - other.pose.center()).norm();
                    if (dproj - dj).abs() <= tau * dj {
                        agree += 1;
                    }
                }
                agree >= min_views
            })
        })
        .collect()
}
