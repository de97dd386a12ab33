use crate::error::{Error, Result};
use crate::scalar::Real;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Moment estimates for one parameter per Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

/// Per-parameter box constraint applied after each step.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthBounds<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Real> DepthBounds<T> {
    /// `[d·(1 − δ), d·(1 + δ)]` floored at `1e-6`; infinite `δ` leaves only the floor.
    pub fn relative(reference: &[T], delta: T) -> Self {
        let floor = T::lit(1e-6);
        let lo = reference.iter().map(|&d| (d * (T::one() - delta)).max(floor)).collect();
        let hi = reference.iter().map(|&d| if delta.is_finite() { d * (T::one() + delta) } else { T::infinity() }).collect();
        Self { lo, hi }
    }
}

impl<T: Real> AdamState<T> {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
            beta1: T::lit(ADAM_BETA1),
            beta2: T::lit(ADAM_BETA2),
            eps: T::lit(ADAM_EPS),
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One bias-corrected step. Non-finite gradient components leave their
    /// parameter and moments untouched; their count is returned.
    pub fn step(&mut self, params: &mut [T], grads: &[T], lr: T, bounds: Option<&DepthBounds<T>>) -> Result<usize> {
        if params.len() != self.len() || grads.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "adam state {} vs params {} vs grads {}",
                self.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(b) = bounds {
            if b.lo.len() != self.len() || b.hi.len() != self.len() {
                return Err(Error::ShapeMismatch("depth bounds do not match parameter count".into()));
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        let mut skipped = 0;
        for i in 0..params.len() {
            let g = grads[i];
            if !g.is_finite() {
                skipped += 1;
                continue;
            }
            self.m[i] = self.beta1 * self.m[i] + (T::one() - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (T::one() - self.beta2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            let mut p = params[i] - lr * mhat / (vhat.sqrt() + self.eps);
            if let Some(b) = bounds {
                p = p.max(b.lo[i]).min(b.hi[i]);
            }
            params[i] = p;
        }
        Ok(skipped)
    }
}
