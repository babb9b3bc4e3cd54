use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Vec3<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Scalar> Vec3<S> {
    #[inline]
    pub const fn new(x: S, y: S, z: S) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero(), S::zero())
    }

    pub fn from_f64(x: f64, y: f64, z: f64) -> Self {
        Self::new(S::lit(x), S::lit(y), S::lit(z))
    }

    pub fn from_array(a: [S; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [S; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(self, o: Self) -> S {
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
    pub fn norm_squared(self) -> S {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> S {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction; zero stays zero.
    #[inline]
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > S::zero() {
            self / n
        } else {
            self
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn cast<T: Scalar>(self) -> Vec3<T> {
        Vec3::new(
            crate::scalar::cast(self.x),
            crate::scalar::cast(self.y),
            crate::scalar::cast(self.z),
        )
    }

    pub fn max_abs_component(self) -> S {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }
}

impl<S: Scalar> Add for Vec3<S> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<S: Scalar> AddAssign for Vec3<S> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<S: Scalar> Sub for Vec3<S> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<S: Scalar> Neg for Vec3<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<S: Scalar> Mul<S> for Vec3<S> {
    type Output = Self;
    #[inline]
    fn mul(self, s: S) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<S: Scalar> Div<S> for Vec3<S> {
    type Output = Self;
    #[inline]
    fn div(self, s: S) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Row-major 3x3 matrix, used for camera orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3<S> {
    pub rows: [Vec3<S>; 3],
}

impl<S: Scalar> Mat3<S> {
    pub fn from_rows(r0: Vec3<S>, r1: Vec3<S>, r2: Vec3<S>) -> Self {
        Self { rows: [r0, r1, r2] }
    }

    pub fn rot_x(a: S) -> Self {
        let (s, c) = a.sin_cos();
        let (o, l) = (S::zero(), S::one());
        Self::from_rows(Vec3::new(l, o, o), Vec3::new(o, c, -s), Vec3::new(o, s, c))
    }

    pub fn rot_y(a: S) -> Self {
        let (s, c) = a.sin_cos();
        let (o, l) = (S::zero(), S::one());
        Self::from_rows(Vec3::new(c, o, s), Vec3::new(o, l, o), Vec3::new(-s, o, c))
    }

    pub fn rot_z(a: S) -> Self {
        let (s, c) = a.sin_cos();
        let (o, l) = (S::zero(), S::one());
        Self::from_rows(Vec3::new(c, -s, o), Vec3::new(s, c, o), Vec3::new(o, o, l))
    }

    pub fn col(&self, j: usize) -> Vec3<S> {
        let pick = |r: &Vec3<S>| match j {
            0 => r.x,
            1 => r.y,
            _ => r.z,
        };
        Vec3::new(pick(&self.rows[0]), pick(&self.rows[1]), pick(&self.rows[2]))
    }

    pub fn mul_vec(&self, v: Vec3<S>) -> Vec3<S> {
        Vec3::new(self.rows[0].dot(v), self.rows[1].dot(v), self.rows[2].dot(v))
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let c = [o.col(0), o.col(1), o.col(2)];
        let row = |r: Vec3<S>| Vec3::new(r.dot(c[0]), r.dot(c[1]), r.dot(c[2]));
        Self::from_rows(row(self.rows[0]), row(self.rows[1]), row(self.rows[2]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_is_right_handed() {
        let x = Vec3::<f64>::from_f64(1.0, 0.0, 0.0);
        let y = Vec3::<f64>::from_f64(0.0, 1.0, 0.0);
        assert_eq!(x.cross(y), Vec3::from_f64(0.0, 0.0, 1.0));
    }

    #[test]
    fn rotations_compose() {
        let a = Mat3::<f64>::rot_y(0.3).mul_mat(&Mat3::rot_y(0.4));
        let b = Mat3::<f64>::rot_y(0.7);
        for i in 0..3 {
            assert!((a.rows[i] - b.rows[i]).norm() < 1e-12);
        }
    }
}
