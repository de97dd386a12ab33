//! Windowed structural similarity with its analytic gradient.

use rayon::prelude::*;

use crate::scalar::Real;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

fn kernel<T: Real>() -> [T; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0f64; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| T::lit(v / s))
}

/// Separable Gaussian blur of a `w × h` plane with zero padding.
pub(crate) fn blur<T: Real>(src: &[T], w: usize, h: usize) -> Vec<T> {
    let k = kernel::<T>();
    let r = SSIM_WINDOW / 2;
    let mut tmp = vec![T::zero(); w * h];
    tmp.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let s = &src[y * w..(y + 1) * w];
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (i, &kv) in k.iter().enumerate() {
                let sx = x as isize + i as isize - r as isize;
                if sx >= 0 && (sx as usize) < w {
                    acc += kv * s[sx as usize];
                }
            }
            *out = acc;
        }
    });
    let mut dst = vec![T::zero(); w * h];
    dst.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (i, &kv) in k.iter().enumerate() {
                let sy = y as isize + i as isize - r as isize;
                if sy >= 0 && (sy as usize) < h {
                    acc += kv * tmp[sy as usize * w + x];
                }
            }
            *out = acc;
        }
    });
    dst
}

#[derive(Clone, Debug)]
pub struct SsimResult<T> {
    /// Mean SSIM over the valid samples.
    pub value: T,
    /// Gradient of `value` with respect to `x`.
    pub grad: Vec<T>,
}

/// Mean SSIM of one channel plane pair averaged over `weights`-selected pixels.
///
/// Both planes are multiplied by `mask` before windowing; `norm` divides the
/// sum of the per-pixel map over masked pixels.
pub(crate) fn ssim_plane<T: Real>(x: &[T], y: &[T], mask: &[bool], w: usize, h: usize, norm: T) -> (T, Vec<T>) {
    let m = |v: &[T]| -> Vec<T> { v.iter().zip(mask).map(|(&a, &k)| if k { a } else { T::zero() }).collect() };
    let xm = m(x);
    let ym = m(y);
    let mu_x = blur(&xm, w, h);
    let mu_y = blur(&ym, w, h);
    let sq = |a: &[T], b: &[T]| -> Vec<T> { a.iter().zip(b).map(|(&p, &q)| p * q).collect() };
    let exx = blur(&sq(&xm, &xm), w, h);
    let eyy = blur(&sq(&ym, &ym), w, h);
    let exy = blur(&sq(&xm, &ym), w, h);
    let (c1, c2) = (T::lit(SSIM_C1), T::lit(SSIM_C2));
    let two = T::lit(2.0);
    let n = w * h;
    let mut total = T::zero();
    let mut ca = vec![T::zero(); n];
    let mut cb = vec![T::zero(); n];
    let mut cc = vec![T::zero(); n];
    for p in 0..n {
        if !mask[p] {
            continue;
        }
        let (mx, my) = (mu_x[p], mu_y[p]);
        let n1 = two * mx * my + c1;
        let n2 = two * (exy[p] - mx * my) + c2;
        let d1 = mx * mx + my * my + c1;
        let d2 = (exx[p] - mx * mx) + (eyy[p] - my * my) + c2;
        let den = d1 * d2;
        let s = n1 * n2 / den;
        total += s;
        let scale = T::one() / norm;
        // Partials of s with respect to μx, E[x²] and E[xy].
        ca[p] = scale * ((two * my * n2 - two * my * n1) / den - s * (two * mx / d1 - two * mx / d2));
        cb[p] = -scale * s / d2;
        cc[p] = scale * two * n1 / den;
    }
    let ba = blur(&ca, w, h);
    let bb = blur(&cb, w, h);
    let bc = blur(&cc, w, h);
    let grad = (0..n)
        .map(|p| if mask[p] { ba[p] + two * xm[p] * bb[p] + ym[p] * bc[p] } else { T::zero() })
        .collect();
    (total / norm, grad)
}

/// Mean SSIM of two interleaved RGB planes over masked pixels, with gradient wrt `x`.
pub fn ssim<T: Real>(x: &[[T; 3]], y: &[[T; 3]], mask: &[bool], w: usize, h: usize) -> SsimResult<T> {
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return SsimResult { value: T::zero(), grad: vec![T::zero(); 3 * w * h] };
    }
    let norm = T::from_usize_lossy(3 * count);
    let mut value = T::zero();
    let mut grad = vec![T::zero(); 3 * w * h];
    for ch in 0..3 {
        let xc: Vec<T> = x.iter().map(|c| c[ch]).collect();
        let yc: Vec<T> = y.iter().map(|c| c[ch]).collect();
        let (v, g) = ssim_plane(&xc, &yc, mask, w, h, norm);
        value += v;
        for (p, gv) in g.into_iter().enumerate() {
            grad[3 * p + ch] = gv;
        }
    }
    SsimResult { value, grad }
}
