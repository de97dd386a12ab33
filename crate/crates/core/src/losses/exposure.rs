use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{check_shape, ColorImage, Mask};
use crate::scalar::Real;

pub const MIN_EXPOSURE_PIXELS: usize = 100;

/// Per-channel affine color correction `gain·c + bias`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExposureModel<T> {
    pub gain: [T; 3],
    pub bias: [T; 3],
}

impl<T: Real> Default for ExposureModel<T> {
    fn default() -> Self {
        Self { gain: [T::one(); 3], bias: [T::zero(); 3] }
    }
}

impl<T: Real> ExposureModel<T> {
    pub fn apply(&self, image: &ColorImage<T>) -> ColorImage<T> {
        image.map(|c| [0, 1, 2].map(|i| self.gain[i] * c[i] + self.bias[i]))
    }

    /// Chains a gradient on the corrected image back to the uncorrected one.
    pub fn backprop(&self, grad: &ColorImage<T>) -> ColorImage<T> {
        grad.map(|g| [0, 1, 2].map(|i| self.gain[i] * g[i]))
    }
}

/// Least-squares `gain, bias` mapping `rendered` onto `reference` per channel.
pub fn fit_exposure<T: Real>(rendered: &ColorImage<T>, reference: &ColorImage<T>, valid: &Mask) -> Result<ExposureModel<T>> {
    check_shape(rendered, reference, "rendered vs reference")?;
    check_shape(rendered, valid, "rendered vs mask")?;
    let idx: Vec<usize> = valid.iter().enumerate().filter(|(_, &v)| v).map(|(i, _)| i).collect();
    if idx.len() < MIN_EXPOSURE_PIXELS {
        return Err(Error::invalid(format!(
            "exposure fit needs at least {MIN_EXPOSURE_PIXELS} valid pixels, got {}",
            idx.len()
        )));
    }
    let n = T::from_usize_lossy(idx.len());
    let (r, f) = (rendered.as_slice(), reference.as_slice());
    let mut model = ExposureModel::default();
    for ch in 0..3 {
        let mr = idx.iter().map(|&i| r[i][ch]).sum::<T>() / n;
        let mf = idx.iter().map(|&i| f[i][ch]).sum::<T>() / n;
        let mut srr = T::zero();
        let mut srf = T::zero();
        for &i in &idx {
            let dr = r[i][ch] - mr;
            srr += dr * dr;
            srf += dr * (f[i][ch] - mf);
        }
        let tiny = T::epsilon() * n * (mr * mr).max(T::one());
        let gain = if srr > tiny { srf / srr } else { T::zero() };
        if gain > T::zero() {
            model.gain[ch] = gain;
            model.bias[ch] = mf - gain * mr;
        } else {
            model.gain[ch] = T::one();
            model.bias[ch] = mf - mr;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn image(seed: u64) -> ColorImage<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid::from_fn(16, 16, |_, _| [rng.random(), rng.random(), rng.random()])
    }

    #[test]
    fn exact_affine_recovery() {
        let r = image(1);
        let f = r.map(|c| c.map(|v| 1.1 * v + 0.05));
        let m = fit_exposure(&r, &f, &Grid::new(16, 16, true)).unwrap();
        for ch in 0..3 {
            assert!((m.gain[ch] - 1.1).abs() < 1e-9 && (m.bias[ch] - 0.05).abs() < 1e-9);
        }
        let id = fit_exposure(&r, &r, &Grid::new(16, 16, true)).unwrap();
        for ch in 0..3 {
            assert!((id.gain[ch] - 1.0).abs() < 1e-12 && id.bias[ch].abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_channel_uses_mean_difference() {
        let r = Grid::new(16, 16, [0.5f64, 0.5, 0.5]);
        let f = image(2);
        let m = fit_exposure(&r, &f, &Grid::new(16, 16, true)).unwrap();
        let mean: f64 = f.iter().map(|c| c[1]).sum::<f64>() / 256.0;
        assert_eq!(m.gain[1], 1.0);
        assert!((m.bias[1] - (mean - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn too_few_pixels() {
        let r = image(3);
        let mask = Grid::from_fn(16, 16, |x, y| x < 5 && y < 5);
        assert!(fit_exposure(&r, &r, &mask).is_err());
    }
}
