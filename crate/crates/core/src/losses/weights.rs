use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ColorImage, Grid};
use crate::scalar::Real;

/// Per-pixel weight in `[0, 1]`; high on textured pixels.
pub type PixelWeightMap<T> = Grid<T>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Mix between L1 and D-SSIM in the photometric term.
    pub lambda_c: f64,
    pub lambda_s: f64,
    pub grad_min: f64,
    pub grad_max: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda_c: 0.2, lambda_s: 0.2, grad_min: 0.02, grad_max: 0.1 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda_c) {
            return Err(Error::invalid("lambda_c must lie in [0, 1]"));
        }
        if !(self.lambda_s >= 0.0 && self.lambda_s.is_finite()) {
            return Err(Error::invalid("lambda_s must be nonnegative"));
        }
        if !(self.grad_min >= 0.0 && self.grad_max > self.grad_min) {
            return Err(Error::invalid("gradient bounds need 0 <= grad_min < grad_max"));
        }
        Ok(())
    }
}

/// Mean absolute color difference to the 4-neighbours, normalized between the bounds.
pub fn gradient_weight<T: Real>(image: &ColorImage<T>, grad_min: T, grad_max: T) -> Result<PixelWeightMap<T>> {
    if !(grad_max > grad_min) {
        return Err(Error::invalid("grad_max must exceed grad_min"));
    }
    let (w, h) = (image.width(), image.height());
    let third = T::lit(1.0 / 3.0);
    let range = grad_max - grad_min;
    Ok(Grid::from_fn(w, h, |x, y| {
        let c = image[(x, y)];
        let mut sum = T::zero();
        let mut n = 0usize;
        let mut visit = |nx: usize, ny: usize| {
            let o = image[(nx, ny)];
            sum += ((c[0] - o[0]).abs() + (c[1] - o[1]).abs() + (c[2] - o[2]).abs()) * third;
            n += 1;
        };
        if x > 0 {
            visit(x - 1, y);
        }
        if x + 1 < w {
            visit(x + 1, y);
        }
        if y > 0 {
            visit(x, y - 1);
        }
        if y + 1 < h {
            visit(x, y + 1);
        }
        if n == 0 {
            return T::zero();
        }
        let g = sum / T::from_usize_lossy(n);
        ((g - grad_min) / range).max(T::zero()).min(T::one())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_has_zero_weight() {
        let img = Grid::new(5, 4, [0.3f64, 0.6, 0.1]);
        let w = gradient_weight(&img, 0.02, 0.1).unwrap();
        assert!(w.iter().all(|&v| v == 0.0));
    }

    fn stripes(step: f64) -> ColorImage<f64> {
        Grid::from_fn(6, 6, |x, _| [step * x as f64; 3])
    }

    #[test]
    fn interpolates_between_bounds() {
        // Interior pixels of a linear ramp differ by `step` from every horizontal
        // neighbour and by 0 from vertical ones, so g = step / 2.
        let w = gradient_weight(&stripes(0.12), 0.02, 0.1).unwrap();
        assert!((w[(2, 2)] - 0.5).abs() < 1e-12);
        let w = gradient_weight(&stripes(0.2), 0.02, 0.1).unwrap();
        assert_eq!(w[(2, 2)], 1.0);
    }

    #[test]
    fn defaults_and_validation() {
        let d = LossWeights::default();
        assert_eq!((d.lambda_c, d.lambda_s, d.grad_min, d.grad_max), (0.2, 0.2, 0.02, 0.1));
        assert!(d.validate().is_ok());
        assert!(LossWeights { grad_max: 0.01, ..d }.validate().is_err());
        assert!(gradient_weight(&stripes(0.1), 0.1, 0.1).is_err());
    }
}
