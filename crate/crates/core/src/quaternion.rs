//! Real quaternions and the embedding of unit directions as pure-imaginary
//! unit quaternions.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of `|n|` from 1 before a direction is rejected.
pub const DIRECTION_TOLERANCE: f64 = 1e-9;

/// `w + x I + y J + z K`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Self = Self::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Self = Self::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Self = Self::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Self = Self::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn norm_sq(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(s * self.w, s * self.x, s * self.y, s * self.z)
    }

    pub fn is_zero(self) -> bool {
        self == Self::ZERO || self.norm_sq() == 0.0
    }

    /// Euclidean inner product on the four components.
    pub fn inner(self, other: Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }
}

/// Hamilton product.
pub fn quat_mul(a: Quaternion, b: Quaternion) -> Quaternion {
    Quaternion::new(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )
}

pub fn quat_inner(a: Quaternion, b: Quaternion) -> f64 {
    a.inner(b)
}

impl From<[f64; 4]> for Quaternion {
    fn from([w, x, y, z]: [f64; 4]) -> Self {
        Self::new(w, x, y, z)
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        q.to_array()
    }
}

impl Add for Quaternion {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Quaternion {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for Quaternion {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Quaternion {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl Mul for Quaternion {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        quat_mul(self, o)
    }
}

impl Mul<Quaternion> for f64 {
    type Output = Quaternion;
    fn mul(self, q: Quaternion) -> Quaternion {
        q.scale(self)
    }
}

/// A unit 3-vector. Construction rejects inputs whose length deviates from 1
/// by more than [`DIRECTION_TOLERANCE`]; accepted inputs are stored as given.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Direction([f64; 3]);

impl Direction {
    pub const X: Self = Self([1.0, 0.0, 0.0]);
    pub const Y: Self = Self([0.0, 1.0, 0.0]);
    pub const Z: Self = Self([0.0, 0.0, 1.0]);

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > DIRECTION_TOLERANCE {
            return Err(Error::NonUnitDirection { norm });
        }
        Ok(Self([x, y, z]))
    }

    /// Normalizes an arbitrary nonzero vector. Intended for generated
    /// directions, not user input.
    pub fn normalized(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NonUnitDirection { norm });
        }
        Ok(Self([v[0] / norm, v[1] / norm, v[2] / norm]))
    }

    /// Direction in the x-z plane at polar angle `theta` from +z.
    pub fn in_xz_plane(theta: f64) -> Self {
        Self([theta.sin(), 0.0, theta.cos()])
    }

    /// Direction from spherical angles (polar `theta` from +z, azimuth `phi`).
    pub fn spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self([st * cp, st * sp, ct])
    }

    pub fn components(self) -> [f64; 3] {
        self.0
    }

    pub fn dot(self, other: Self) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }
}

impl<'de> Deserialize<'de> for Direction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = <[f64; 3]>::deserialize(d)?;
        Direction::new(v[0], v[1], v[2]).map_err(serde::de::Error::custom)
    }
}

/// `(n.i) I + (n.j) J + (n.k) K`.
pub fn unit_quat_from_direction(n: Direction) -> Quaternion {
    let [x, y, z] = n.0;
    Quaternion::new(0.0, x, y, z)
}
