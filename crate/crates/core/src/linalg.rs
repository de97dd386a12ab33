//! Small fixed-size vector and matrix types.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_f64(x: f64, y: f64, z: f64) -> Self {
        Self::new(T::lit(x), T::lit(y), T::lit(z))
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    /// Unit vector, or `None` for a zero or non-finite input.
    pub fn try_normalize(self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self * (T::one() / n))
        } else {
            None
        }
    }

    pub fn normalize(self) -> Self {
        self.try_normalize().unwrap_or_else(Self::zero)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()), U::lit(self.z.as_f64()))
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Row-major 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> Mat3<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self { m: [[o, z, z], [z, o, z], [z, z, o]] }
    }

    pub fn from_rows(m: [[T; 3]; 3]) -> Self {
        Self { m }
    }

    pub fn from_columns(c0: Vec3<T>, c1: Vec3<T>, c2: Vec3<T>) -> Self {
        Self { m: [[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]] }
    }

    pub fn column(&self, j: usize) -> Vec3<T> {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn row(&self, i: usize) -> Vec3<T> {
        Vec3::from_array(self.m[i])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Self {
            m: [[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]],
        }
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }

    /// `selfᵀ · v` without materializing the transpose.
    #[inline]
    pub fn tr_mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        Vec3::new(self.column(0).dot(v), self.column(1).dot(v), self.column(2).dot(v))
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut out = [[T::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.row(i).dot(o.column(j));
            }
        }
        Self { m: out }
    }

    pub fn determinant(&self) -> T {
        self.row(0).dot(self.row(1).cross(self.row(2)))
    }

    /// Rotation of `angle` radians about the unit `axis` (Rodrigues).
    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let a = axis.normalize();
        let (s, c) = angle.sin_cos();
        let t = T::one() - c;
        Self {
            m: [
                [t * a.x * a.x + c, t * a.x * a.y - s * a.z, t * a.x * a.z + s * a.y],
                [t * a.x * a.y + s * a.z, t * a.y * a.y + c, t * a.y * a.z - s * a.x],
                [t * a.x * a.z - s * a.y, t * a.y * a.z + s * a.x, t * a.z * a.z + c],
            ],
        }
    }

    /// Largest entry of `|selfᵀ·self − I|`.
    pub fn orthonormality_error(&self) -> T {
        let p = self.transpose().mul_mat(self);
        let mut e = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { T::one() } else { T::zero() };
                e = e.max((p.m[i][j] - target).abs());
            }
        }
        e
    }
}

/// Symmetric 2×2 matrix `[[a, b], [b, c]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sym2<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Real> Sym2<T> {
    pub fn new(a: T, b: T, c: T) -> Self {
        Self { a, b, c }
    }

    pub fn determinant(&self) -> T {
        self.a * self.c - self.b * self.b
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.determinant();
        if !(det > T::zero()) || !det.is_finite() {
            return None;
        }
        let inv = T::one() / det;
        Some(Self::new(self.c * inv, -self.b * inv, self.a * inv))
    }

    pub fn max_eigenvalue(&self) -> T {
        let half = T::lit(0.5);
        let mean = (self.a + self.c) * half;
        let diff = (self.a - self.c) * half;
        mean + (diff * diff + self.b * self.b).sqrt()
    }

    /// `xᵀ·self·x`.
    #[inline]
    pub fn quad_form(&self, x: T, y: T) -> T {
        self.a * x * x + (self.b + self.b) * x * y + self.c * y * y
    }

    /// `self · other · self` for symmetric arguments; the result is symmetric.
    pub fn sandwich(&self, o: &Self) -> Self {
        // (S O) entries, then (S O) S.
        let p00 = self.a * o.a + self.b * o.b;
        let p01 = self.a * o.b + self.b * o.c;
        let p10 = self.b * o.a + self.c * o.b;
        let p11 = self.b * o.b + self.c * o.c;
        Self::new(p00 * self.a + p01 * self.b, p00 * self.b + p01 * self.c, p10 * self.b + p11 * self.c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_angle_is_a_rotation() {
        let r = Mat3::<f64>::from_axis_angle(Vec3::new(0.3, -1.0, 0.5), 0.7);
        assert!(r.orthonormality_error() < 1e-14);
        assert!((r.determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sym2_inverse_and_sandwich() {
        let s = Sym2::new(2.0_f64, 0.5, 1.0);
        let inv = s.inverse().unwrap();
        // S · S⁻¹ · S == S
        let back = s.sandwich(&inv);
        assert!((back.a - s.a).abs() < 1e-14);
        assert!((back.b - s.b).abs() < 1e-14);
        assert!((back.c - s.c).abs() < 1e-14);
        assert!(Sym2::new(1.0_f64, 1.0, 1.0).inverse().is_none());
    }

    #[test]
    fn cross_product_orientation() {
        let x = Vec3::<f64>::new(1.0, 0.0, 0.0);
        let y = Vec3::new(0.0, 1.0, 0.0);
        assert_eq!(x.cross(y), Vec3::new(0.0, 0.0, 1.0));
    }
}
