use crate::cloud::PixelGaussianCloud;
use crate::error::{Error, Result};
use crate::geometry::oriented_normal;
use crate::grid::Grid;
use crate::linalg::Vec3;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct SmoothnessLoss<T> {
    pub value: T,
    /// Gradient with respect to each Gaussian's depth.
    pub grad: Vec<T>,
    /// Pixels whose own normal and right and down neighbour normals are valid.
    pub terms: usize,
}

struct LocalNormal<T> {
    n: Vec3<T>,
    sign: T,
    dx: Vec3<T>,
    dy: Vec3<T>,
}

/// Normal-alignment penalty on untextured pixels, from world-frame normals of
/// the depth parameters `depths`.
pub fn smoothness_loss<T: Real>(
    depths: &[T],
    cloud: &PixelGaussianCloud<T>,
    w_grad: &Grid<T>,
    lambda_s: T,
) -> Result<SmoothnessLoss<T>> {
    if depths.len() != cloud.len() {
        return Err(Error::ShapeMismatch(format!("{} depths for {} Gaussians", depths.len(), cloud.len())));
    }
    let (w, h) = (cloud.camera().width(), cloud.camera().height());
    if w_grad.width() != w || w_grad.height() != h {
        return Err(Error::ShapeMismatch("smoothness weights do not match the target view".into()));
    }
    let mut out = SmoothnessLoss { value: T::zero(), grad: vec![T::zero(); cloud.len()], terms: 0 };
    if w < 3 || h < 3 {
        return Ok(out);
    }
    let origin = cloud.origin();
    let dirs = cloud.ray_dirs();
    let id = |x: usize, y: usize| cloud.gaussian_at(x, y);
    let point = |k: usize| origin + dirs[k] * depths[k];

    let normals: Grid<Option<LocalNormal<T>>> = Grid::from_fn(w, h, |x, y| {
        if x == 0 || y == 0 || x + 1 >= w || y + 1 >= h {
            return None;
        }
        let (c, l, r, u, d) = (id(x, y)?, id(x - 1, y)?, id(x + 1, y)?, id(x, y - 1)?, id(x, y + 1)?);
        let dx = point(r) - point(l);
        let dy = point(d) - point(u);
        let (n, sign) = oriented_normal(dx, dy, point(c), origin)?;
        Some(LocalNormal { n, sign, dx, dy })
    });

    let half = T::lit(0.5);
    let mut terms = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if let (Some(_), Some(_), Some(_)) = (
                normals[(x, y)].as_ref(),
                normals.get(x + 1, y).and_then(|n| n.as_ref()),
                normals.get(x, y + 1).and_then(|n| n.as_ref()),
            ) {
                terms.push((x, y));
            }
        }
    }
    out.terms = terms.len();
    if terms.is_empty() {
        return Ok(out);
    }
    let inv = T::one() / T::from_usize_lossy(terms.len());
    let mut gn = Grid::new(w, h, Vec3::zero());
    let mut value = T::zero();
    for &(x, y) in &terms {
        let ni = normals[(x, y)].as_ref().map(|n| n.n).unwrap_or_default();
        let nr = normals[(x + 1, y)].as_ref().map(|n| n.n).unwrap_or_default();
        let nd = normals[(x, y + 1)].as_ref().map(|n| n.n).unwrap_or_default();
        let coef = lambda_s * half * (T::one() - w_grad[(x, y)]) * inv;
        value += coef * (T::one() - (ni.dot(nr) + ni.dot(nd)) * half);
        let c = -coef * half;
        gn[(x, y)] = gn[(x, y)] + (nr + nd) * c;
        gn[(x + 1, y)] = gn[(x + 1, y)] + ni * c;
        gn[(x, y + 1)] = gn[(x, y + 1)] + ni * c;
    }
    out.value = value;

    let mut gp = vec![Vec3::zero(); cloud.len()];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let Some(ln) = normals[(x, y)].as_ref() else { continue };
            let g = gn[(x, y)];
            if g == Vec3::zero() {
                continue;
            }
            let c = ln.dx.cross(ln.dy);
            let gc = (g - ln.n * ln.n.dot(g)) * (ln.sign / c.norm());
            let ga = ln.dy.cross(gc);
            let gb = gc.cross(ln.dx);
            let (l, r, u, d) = (id(x - 1, y), id(x + 1, y), id(x, y - 1), id(x, y + 1));
            if let (Some(l), Some(r), Some(u), Some(d)) = (l, r, u, d) {
                gp[r] = gp[r] + ga;
                gp[l] = gp[l] - ga;
                gp[d] = gp[d] + gb;
                gp[u] = gp[u] - gb;
            }
        }
    }
    for (k, g) in gp.into_iter().enumerate() {
        out.grad[k] = g.dot(dirs[k]);
    }
    Ok(out)
}
