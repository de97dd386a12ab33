//! Dense row-major 2D containers: images, masks and depth maps.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Grid<V> {
    width: usize,
    height: usize,
    data: Vec<V>,
}

pub type ColorImage<T> = Grid<[T; 3]>;
pub type Mask = Grid<bool>;

impl<V: Clone> Grid<V> {
    pub fn new(width: usize, height: usize, fill: V) -> Self {
        Self { width, height, data: vec![fill; width * height] }
    }
}

impl<V> Grid<V> {
    pub fn from_vec(width: usize, height: usize, data: Vec<V>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} elements for a {width}x{height} grid",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> V) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn offset(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<&V> {
        if x < self.width && y < self.height {
            self.data.get(y * self.width + x)
        } else {
            None
        }
    }

    pub fn as_slice(&self) -> &[V] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [V] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<V> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, V> {
        self.data.iter()
    }

    pub fn map<U>(&self, f: impl FnMut(&V) -> U) -> Grid<U> {
        Grid { width: self.width, height: self.height, data: self.data.iter().map(f).collect() }
    }
}

impl<V> Index<(usize, usize)> for Grid<V> {
    type Output = V;
    #[inline]
    fn index(&self, (x, y): (usize, usize)) -> &V {
        &self.data[y * self.width + x]
    }
}

impl<V> IndexMut<(usize, usize)> for Grid<V> {
    #[inline]
    fn index_mut(&mut self, (x, y): (usize, usize)) -> &mut V {
        &mut self.data[y * self.width + x]
    }
}

pub(crate) fn check_shape<A, B>(a: &Grid<A>, b: &Grid<B>, what: &str) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{what}: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )))
    }
}

/// Per-pixel depth with an explicit validity mask.
///
/// Values are ray lengths unless a caller documents otherwise. Every valid
/// entry is finite and strictly positive; the constructors enforce this.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap<T> {
    values: Grid<T>,
    valid: Mask,
}

impl<T: Real> DepthMap<T> {
    /// Builds a depth map, treating zero, negative and non-finite values as invalid.
    pub fn from_values(values: Grid<T>) -> Self {
        let valid = values.map(|&d| d.is_finite() && d > T::zero());
        Self::sanitized(values, valid)
    }

    pub fn new(values: Grid<T>, valid: Mask) -> Result<Self> {
        check_shape(&values, &valid, "depth values vs validity")?;
        Ok(Self::sanitized(values, valid))
    }

    fn sanitized(mut values: Grid<T>, mut valid: Mask) -> Self {
        for (v, ok) in values.data.iter_mut().zip(valid.data.iter_mut()) {
            if !(v.is_finite() && *v > T::zero()) {
                *ok = false;
            }
            if !*ok {
                *v = T::zero();
            }
        }
        Self { values, valid }
    }

    pub fn width(&self) -> usize {
        self.values.width
    }

    pub fn height(&self) -> usize {
        self.values.height
    }

    pub fn values(&self) -> &Grid<T> {
        &self.values
    }

    pub fn validity(&self) -> &Mask {
        &self.valid
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<T> {
        match self.valid.get(x, y) {
            Some(true) => Some(self.values[(x, y)]),
            _ => None,
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Restricts validity to `mask` (same resolution).
    pub fn masked(&self, mask: &Mask) -> Result<Self> {
        check_shape(&self.valid, mask, "depth vs mask")?;
        let valid = Grid::from_fn(self.width(), self.height(), |x, y| self.valid[(x, y)] && mask[(x, y)]);
        Ok(Self::sanitized(self.values.clone(), valid))
    }

    pub fn map_valid(&self, mut f: impl FnMut(usize, usize, T) -> T) -> Self {
        let values = Grid::from_fn(self.width(), self.height(), |x, y| {
            if self.valid[(x, y)] {
                f(x, y, self.values[(x, y)])
            } else {
                T::zero()
            }
        });
        Self::sanitized(values, self.valid.clone())
    }

    pub fn cast<U: Real>(&self) -> DepthMap<U> {
        DepthMap {
            values: self.values.map(|&v| U::lit(v.as_f64())),
            valid: self.valid.clone(),
        }
    }
}

fn downsampled_dims(width: usize, height: usize, factor: usize) -> Result<(usize, usize)> {
    if factor == 0 {
        return Err(Error::invalid("downsample factor must be >= 1"));
    }
    let (w, h) = (width / factor, height / factor);
    if w == 0 || h == 0 {
        return Err(Error::invalid(format!("{width}x{height} too small for factor {factor}")));
    }
    Ok((w, h))
}

/// Area-average downsampling by an integer factor; trailing rows/columns are dropped.
pub fn downsample_color<T: Real>(img: &ColorImage<T>, factor: usize) -> Result<ColorImage<T>> {
    if factor == 1 {
        return Ok(img.clone());
    }
    let (w, h) = downsampled_dims(img.width, img.height, factor)?;
    let norm = T::one() / T::from_usize_lossy(factor * factor);
    Ok(Grid::from_fn(w, h, |x, y| {
        let mut acc = [T::zero(); 3];
        for dy in 0..factor {
            for dx in 0..factor {
                let p = img[(x * factor + dx, y * factor + dy)];
                for c in 0..3 {
                    acc[c] += p[c];
                }
            }
        }
        acc.map(|v| v * norm)
    }))
}

/// Mask downsampling: a coarse pixel is set when more than half its footprint is set.
pub fn downsample_mask(mask: &Mask, factor: usize) -> Result<Mask> {
    if factor == 1 {
        return Ok(mask.clone());
    }
    let (w, h) = downsampled_dims(mask.width, mask.height, factor)?;
    Ok(Grid::from_fn(w, h, |x, y| {
        let mut n = 0;
        for dy in 0..factor {
            for dx in 0..factor {
                n += mask[(x * factor + dx, y * factor + dy)] as usize;
            }
        }
        2 * n > factor * factor
    }))
}

/// Valid-aware area average. A coarse pixel is valid when at least half its
/// footprint is valid; its value is the mean of the valid samples.
pub fn downsample_depth<T: Real>(depth: &DepthMap<T>, factor: usize) -> Result<DepthMap<T>> {
    if factor == 1 {
        return Ok(depth.clone());
    }
    let (w, h) = downsampled_dims(depth.width(), depth.height(), factor)?;
    let mut valid = Grid::new(w, h, false);
    let values = Grid::from_fn(w, h, |x, y| {
        let mut n = 0usize;
        let mut acc = T::zero();
        for dy in 0..factor {
            for dx in 0..factor {
                if let Some(d) = depth.get(x * factor + dx, y * factor + dy) {
                    acc += d;
                    n += 1;
                }
            }
        }
        if 2 * n >= factor * factor {
            valid[(x, y)] = true;
            acc / T::from_usize_lossy(n)
        } else {
            T::zero()
        }
    });
    DepthMap::new(values, valid)
}

/// Bilinear resampling to `width`×`height` using pixel-center alignment.
/// Invalid source samples are excluded and the remaining weights renormalized.
pub fn resample_depth_bilinear<T: Real>(depth: &DepthMap<T>, width: usize, height: usize) -> DepthMap<T> {
    resample_bilinear_impl(depth, width, height, false)
}

/// Like [`resample_depth_bilinear`], but a sample is valid only when all four taps are.
pub fn resample_depth_bilinear_strict<T: Real>(depth: &DepthMap<T>, width: usize, height: usize) -> DepthMap<T> {
    resample_bilinear_impl(depth, width, height, true)
}

fn resample_bilinear_impl<T: Real>(depth: &DepthMap<T>, width: usize, height: usize, strict: bool) -> DepthMap<T> {
    if width == depth.width() && height == depth.height() {
        return depth.clone();
    }
    let sx = depth.width() as f64 / width as f64;
    let sy = depth.height() as f64 / height as f64;
    let mut valid = Grid::new(width, height, false);
    let values = Grid::from_fn(width, height, |x, y| {
        let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (depth.width() - 1) as f64);
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (depth.height() - 1) as f64);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(depth.width() - 1), (y0 + 1).min(depth.height() - 1));
        let (tx, ty) = (T::lit(fx - x0 as f64), T::lit(fy - y0 as f64));
        let one = T::one();
        let taps = [
            (x0, y0, (one - tx) * (one - ty)),
            (x1, y0, tx * (one - ty)),
            (x0, y1, (one - tx) * ty),
            (x1, y1, tx * ty),
        ];
        let mut acc = T::zero();
        let mut wsum = T::zero();
        let mut missing = false;
        for (px, py, w) in taps {
            match depth.get(px, py) {
                Some(d) => {
                    acc += w * d;
                    wsum += w;
                }
                None => missing = true,
            }
        }
        if !(strict && missing) && wsum > T::lit(1e-12) {
            valid[(x, y)] = true;
            acc / wsum
        } else {
            T::zero()
        }
    });
    DepthMap::sanitized(values, valid)
}
