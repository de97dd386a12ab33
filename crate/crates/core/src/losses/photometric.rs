use crate::error::Result;
use crate::grid::{check_shape, ColorImage, Grid, Mask};
use crate::losses::ssim::ssim;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct PhotometricLoss<T> {
    pub value: T,
    pub l1: T,
    pub ssim: T,
    /// Gradient of `value` with respect to the rendered image.
    pub grad: ColorImage<T>,
    /// No valid pixel: value and gradient are zero.
    pub empty: bool,
}

/// `(1 − λ)·L1 + λ·(1 − SSIM)` over valid pixels, L1 weighted per pixel by `w_grad`.
pub fn photometric_loss<T: Real>(
    rendered: &ColorImage<T>,
    reference: &ColorImage<T>,
    valid: &Mask,
    w_grad: &Grid<T>,
    lambda_c: T,
) -> Result<PhotometricLoss<T>> {
    check_shape(rendered, reference, "rendered vs reference")?;
    check_shape(rendered, valid, "rendered vs mask")?;
    check_shape(rendered, w_grad, "rendered vs weights")?;
    let (w, h) = (rendered.width(), rendered.height());
    let count = valid.iter().filter(|&&v| v).count();
    if count == 0 {
        return Ok(PhotometricLoss {
            value: T::zero(),
            l1: T::zero(),
            ssim: T::zero(),
            grad: Grid::new(w, h, [T::zero(); 3]),
            empty: true,
        });
    }
    let inv = T::one() / T::from_usize_lossy(3 * count);
    let mut l1 = T::zero();
    let mut grad = Grid::new(w, h, [T::zero(); 3]);
    let one_minus = T::one() - lambda_c;
    for (p, ((r, f), (&m, &wg))) in rendered.iter().zip(reference.iter()).zip(valid.iter().zip(w_grad.iter())).enumerate() {
        if !m {
            continue;
        }
        let g = &mut grad.as_mut_slice()[p];
        for ch in 0..3 {
            let diff = r[ch] - f[ch];
            l1 += wg * diff.abs();
            let sign = if diff > T::zero() {
                T::one()
            } else if diff < T::zero() {
                -T::one()
            } else {
                T::zero()
            };
            g[ch] = one_minus * wg * sign * inv;
        }
    }
    l1 = l1 * inv;
    let mut s = T::one();
    if lambda_c != T::zero() {
        let r = ssim(rendered.as_slice(), reference.as_slice(), valid.as_slice(), w, h);
        s = r.value;
        for (p, g) in grad.as_mut_slice().iter_mut().enumerate() {
            for ch in 0..3 {
                g[ch] -= lambda_c * r.grad[3 * p + ch];
            }
        }
    }
    Ok(PhotometricLoss { value: one_minus * l1 + lambda_c * (T::one() - s), l1, ssim: s, grad, empty: false })
}
