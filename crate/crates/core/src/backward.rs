//! Analytic gradients of a render loss with respect to per-pixel depths.
//!
//! Rendering is replayed from the contributor records saved by the forward
//! pass; gate membership and blend order are treated as fixed.

use rayon::prelude::*;

use crate::cloud::PixelGaussianCloud;
use crate::error::{Error, Result};
use crate::geometry::{pixel_center, Camera};
use crate::grid::{ColorImage, Grid};
use crate::linalg::{Sym2, Vec3};
use crate::rasterizer::{jacobian_outer, tiles, RasterSettings, RenderBuffers, SplatProjection, MIN_DEPTH_ALPHA};
use crate::scalar::Real;

/// Upstream gradients of the loss with respect to the render buffers.
#[derive(Clone, Copy, Debug)]
pub struct UpstreamGradients<'a, T> {
    pub color: &'a ColorImage<T>,
    pub depth: Option<&'a Grid<T>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BackwardOptions {
    /// Drop the path through the depth-dependent Gaussian scale.
    pub freeze_scale_grad: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthGradients<T> {
    pub grad: Vec<T>,
    pub touched: Vec<bool>,
}

impl<T: Real> DepthGradients<T> {
    pub fn zeros(n: usize) -> Self {
        Self { grad: vec![T::zero(); n], touched: vec![false; n] }
    }

    pub fn len(&self) -> usize {
        self.grad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grad.is_empty()
    }

    /// Adds `scale · other` into `self`.
    pub fn accumulate(&mut self, other: &Self, scale: T) {
        for (i, (g, o)) in self.grad.iter_mut().zip(&other.grad).enumerate() {
            *g += scale * *o;
            self.touched[i] |= other.touched[i];
        }
    }
}

/// Gradients with respect to the screen-space footprint of every Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct ScreenGradients<T> {
    pub mean2d: Vec<[T; 2]>,
    /// Partials with respect to the covariance entries `(a, b, c)` of `[[a, b], [b, c]]`.
    pub cov2d: Vec<Sym2<T>>,
    pub z: Vec<T>,
    pub touched: Vec<bool>,
}

#[derive(Clone, Copy)]
struct Partial<T> {
    id: u32,
    mean: [T; 2],
    cov: [T; 3],
    z: T,
}

/// Replays blending in reverse and accumulates screen-space gradients.
pub fn blend_backward<T: Real>(
    buffers: &RenderBuffers<T>,
    upstream: &UpstreamGradients<'_, T>,
    proj: &SplatProjection<T>,
    colors: &[[T; 3]],
    settings: &RasterSettings<T>,
) -> Result<ScreenGradients<T>> {
    let (w, h) = (buffers.width(), buffers.height());
    if colors.len() != proj.len() {
        return Err(Error::ShapeMismatch(format!("{} colors for {} projected Gaussians", colors.len(), proj.len())));
    }
    if proj.width != w || proj.height != h {
        return Err(Error::ShapeMismatch("projection and render buffers differ in size".into()));
    }
    if upstream.color.width() != w || upstream.color.height() != h {
        return Err(Error::ShapeMismatch("color gradient does not match render size".into()));
    }
    if let Some(d) = upstream.depth {
        if d.width() != w || d.height() != h {
            return Err(Error::ShapeMismatch("depth gradient does not match render size".into()));
        }
    }
    let kappa = settings.exponent_scale();
    let two = T::lit(2.0);

    let partials: Vec<Vec<Partial<T>>> = tiles(w, h, settings.tile_size)
        .into_par_iter()
        .map(|(x0, y0, x1, y1)| {
            let mut out = Vec::new();
            for y in y0..y1 {
                for x in x0..x1 {
                    let recs = buffers.contributors(x, y);
                    if recs.is_empty() {
                        continue;
                    }
                    let gc = upstream.color[(x, y)];
                    let gd = upstream.depth.map(|g| g[(x, y)]).unwrap_or(T::zero());
                    let acc = buffers.alpha[(x, y)];
                    let depth_active = gd != T::zero() && acc > T::lit(MIN_DEPTH_ALPHA);
                    let num = buffers.depth[(x, y)] * acc;
                    let (u, v) = pixel_center::<T>(x, y);
                    let mut behind = settings.background;
                    let mut behind_z = T::zero();
                    let mut behind_a = T::zero();
                    for rec in recs.iter().rev() {
                        let k = rec.gaussian as usize;
                        let c = colors[k];
                        let a = rec.alpha;
                        let t = rec.transmittance;
                        let zk = proj.z[k];
                        let mut d_alpha = T::zero();
                        for ch in 0..3 {
                            d_alpha += gc[ch] * t * (c[ch] - behind[ch]);
                        }
                        let mut d_z = T::zero();
                        if depth_active {
                            let dn = t * (zk - behind_z);
                            let da = t * (T::one() - behind_a);
                            d_alpha += gd * (dn * acc - num * da) / (acc * acc);
                            d_z = gd * rec.weight / acc;
                        }
                        for ch in 0..3 {
                            behind[ch] = a * c[ch] + (T::one() - a) * behind[ch];
                        }
                        behind_z = a * zk + (T::one() - a) * behind_z;
                        behind_a = a + (T::one() - a) * behind_a;

                        let mut p = Partial { id: rec.gaussian, mean: [T::zero(); 2], cov: [T::zero(); 3], z: d_z };
                        if !rec.capped && d_alpha != T::zero() {
                            // α = G = exp(−κ δᵀQδ)
                            let g = a;
                            let q = proj.conic[k];
                            let [mx, my] = proj.mean2d[k];
                            let (dx, dy) = (u - mx, v - my);
                            let qd = [q.a * dx + q.b * dy, q.b * dx + q.c * dy];
                            let dg = d_alpha * g;
                            p.mean = [dg * two * kappa * qd[0], dg * two * kappa * qd[1]];
                            let m = Sym2::new(-dg * kappa * dx * dx, -dg * kappa * dx * dy, -dg * kappa * dy * dy);
                            let s = q.sandwich(&m);
                            p.cov = [-s.a, -two * s.b, -s.c];
                        }
                        out.push(p);
                    }
                }
            }
            out
        })
        .collect();

    let n = proj.len();
    let mut grads = ScreenGradients {
        mean2d: vec![[T::zero(); 2]; n],
        cov2d: vec![Sym2::default(); n],
        z: vec![T::zero(); n],
        touched: vec![false; n],
    };
    for tile in partials {
        for p in tile {
            let k = p.id as usize;
            grads.mean2d[k][0] += p.mean[0];
            grads.mean2d[k][1] += p.mean[1];
            grads.cov2d[k].a += p.cov[0];
            grads.cov2d[k].b += p.cov[1];
            grads.cov2d[k].c += p.cov[2];
            grads.z[k] += p.z;
            grads.touched[k] = true;
        }
    }
    Ok(grads)
}

/// Chains screen-space gradients through projection, position and scale to depth.
pub fn projection_backward<T: Real>(
    screen: &ScreenGradients<T>,
    proj: &SplatProjection<T>,
    cloud: &PixelGaussianCloud<T>,
    view: &Camera<T>,
    options: BackwardOptions,
) -> Result<DepthGradients<T>> {
    let n = cloud.len();
    if proj.len() != n || screen.z.len() != n {
        return Err(Error::ShapeMismatch(format!("{} Gaussians but {} projected", n, proj.len())));
    }
    let (fx, fy) = (view.intrinsics.fx, view.intrinsics.fy);
    let rot = view.pose.rotation;
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let grad: Vec<T> = (0..n)
        .into_par_iter()
        .map(|k| {
            if !screen.touched[k] {
                return T::zero();
            }
            let p = proj.cam_points[k];
            let s = proj.scales[k];
            let (x, y, z) = (p.x, p.y, p.z);
            let iz = T::one() / z;
            let iz2 = iz * iz;
            let iz3 = iz2 * iz;
            let iz4 = iz2 * iz2;
            let iz5 = iz4 * iz;
            let [gu, gv] = screen.mean2d[k];
            let gcov = screen.cov2d[k];
            let s2 = s * s;
            let (ga, gb, gc) = (gcov.a * s2, gcov.b * s2, gcov.c * s2);

            let mut gp = Vec3::new(gu * fx * iz, gv * fy * iz, -(gu * fx * x + gv * fy * y) * iz2 + screen.z[k]);
            gp.x += ga * two * fx * fx * x * iz4 + gb * fx * fy * y * iz4;
            gp.y += gc * two * fy * fy * y * iz4 + gb * fx * fy * x * iz4;
            gp.z += ga * fx * fx * (-two * iz3 - four * x * x * iz5)
                + gb * (-four * fx * fy * x * y * iz5)
                + gc * fy * fy * (-two * iz3 - four * y * y * iz5);

            let dp_dd = rot.tr_mul_vec(cloud.ray_dirs()[k]);
            let mut g = gp.dot(dp_dd);
            if !options.freeze_scale_grad {
                let jj = jacobian_outer(p, fx, fy);
                let gs = two * s * (gcov.a * jj.a + gcov.b * jj.b + gcov.c * jj.c);
                g += gs * cloud.scale_per_depth()[k];
            }
            if g.is_finite() {
                g
            } else {
                T::zero()
            }
        })
        .collect();
    Ok(DepthGradients { grad, touched: screen.touched.clone() })
}

/// Full chain from render-buffer gradients to depth gradients.
pub fn backward<T: Real>(
    buffers: &RenderBuffers<T>,
    upstream: &UpstreamGradients<'_, T>,
    proj: &SplatProjection<T>,
    cloud: &PixelGaussianCloud<T>,
    view: &Camera<T>,
    settings: &RasterSettings<T>,
    options: BackwardOptions,
) -> Result<DepthGradients<T>> {
    if proj.len() != cloud.len() {
        return Err(Error::ShapeMismatch(format!("{} Gaussians but {} projected", cloud.len(), proj.len())));
    }
    let screen = blend_backward(buffers, upstream, proj, cloud.colors(), settings)?;
    projection_backward(&screen, proj, cloud, view, options)
}
