//! 3-vector and rotation primitives, plus seeded random streams.
//!
//! Rotations are always 3x3 matrices mapping body coordinates to inertial
//! coordinates. `e3` is the inertial up axis.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Inertial up axis.
#[inline]
pub fn e3() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

/// Skew-symmetric matrix with `hat(v) * w == v.cross(&w)`.
#[inline]
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]; reads the skew part of `m`.
#[inline]
pub fn vee(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Element of SO(3), body to inertial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rot3(Mat3);

impl Default for Rot3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rot3 {
    pub fn identity() -> Self {
        Rot3(Mat3::identity())
    }

    /// Wraps a matrix that the caller guarantees is a rotation.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rot3(m)
    }

    /// Projects an arbitrary near-rotation matrix back onto SO(3).
    pub fn from_matrix_orthonormalized(m: Mat3) -> Self {
        Rot3(m).orthonormalized()
    }

    /// Row-major 3x3 entries.
    pub fn from_row_major(r: &[f64; 9]) -> Self {
        Rot3(Mat3::from_row_slice(r))
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    #[inline]
    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    #[inline]
    pub fn transpose(&self) -> Rot3 {
        Rot3(self.0.transpose())
    }

    #[inline]
    pub fn compose(&self, other: &Rot3) -> Rot3 {
        Rot3(self.0 * other.0)
    }

    /// Body vector expressed in the inertial frame.
    #[inline]
    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Inertial vector expressed in the body frame.
    #[inline]
    pub fn apply_inverse(&self, v: &Vec3) -> Vec3 {
        self.0.tr_mul(v)
    }

    /// Body z axis in inertial coordinates, `R e3`.
    #[inline]
    pub fn body_z(&self) -> Vec3 {
        self.0.column(2).into_owned()
    }

    /// Gram-Schmidt on the columns, keeping the third column's direction.
    pub fn orthonormalized(&self) -> Rot3 {
        let z = self.0.column(2).normalize();
        let x0 = self.0.column(0).into_owned();
        let x = (x0 - z * z.dot(&x0)).normalize();
        let y = z.cross(&x);
        Rot3(Mat3::from_columns(&[x, y, z]))
    }

    /// Max-abs deviation of `R^T R` from identity and of `det R` from one.
    pub fn orthonormality_error(&self) -> f64 {
        let d = (self.0.transpose() * self.0 - Mat3::identity()).abs().max();
        d.max((self.0.determinant() - 1.0).abs())
    }

    /// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn from_euler_zyx(roll: f64, pitch: f64, yaw: f64) -> Rot3 {
        let (sr, cr) = roll.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let (sy, cy) = yaw.sin_cos();
        Rot3(Mat3::new(
            cy * cp,
            cy * sp * sr - sy * cr,
            cy * sp * cr + sy * sr,
            sy * cp,
            sy * sp * sr + cy * cr,
            sy * sp * cr - cy * sr,
            -sp,
            cp * sr,
            cp * cr,
        ))
    }

    /// `(roll, pitch, yaw)` of the ZYX decomposition.
    pub fn euler_zyx(&self) -> (f64, f64, f64) {
        let m = &self.0;
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        (roll, pitch, yaw)
    }
}

/// Rodrigues exponential of a rotation vector.
pub fn so3_exp(w: &Vec3) -> Rot3 {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let k = hat(w);
    let (a, b) = if theta < 1e-8 {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Rot3(Mat3::identity() + k * a + k * k * b)
}

/// Inverse right-trivialised differential of the exponential, truncated
/// after the second-order term. Used to integrate `R = R0 exp(phi)`.
#[inline]
pub fn dexp_inv(phi: &Vec3, omega: &Vec3) -> Vec3 {
    omega - 0.5 * phi.cross(omega) + phi.cross(&phi.cross(omega)) / 12.0
}

/// SplitMix64 finaliser; derives well-separated seeds from `(seed, stream)`.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded random stream. One owner; never shared between environments.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for sub-component `stream` of this seed.
    pub fn derive(seed: u64, stream: u64) -> Self {
        Self::new(mix_seed(seed, stream))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on `[lo, hi]`; returns `lo` exactly when the range is empty.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform on `[-half, half]` per component.
    pub fn uniform_box(&mut self, half: f64) -> Vec3 {
        Vec3::new(
            self.uniform(-half, half),
            self.uniform(-half, half),
            self.uniform(-half, half),
        )
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform direction on the unit sphere.
    pub fn unit_vector(&mut self) -> Vec3 {
        loop {
            let v = Vec3::new(self.normal(), self.normal(), self.normal());
            let n = v.norm();
            if n > 1e-12 {
                return v / n;
            }
        }
    }

    /// Uniform direction on the upper (z >= 0) hemisphere.
    pub fn upper_hemisphere(&mut self) -> Vec3 {
        let mut v = self.unit_vector();
        v.z = v.z.abs();
        v
    }

    /// Picks `a` or `b` with equal probability.
    pub fn choose(&mut self, a: f64, b: f64) -> f64 {
        if self.unit() < 0.5 {
            a
        } else {
            b
        }
    }

    /// Random index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn e1() -> Vec3 {
        Vec3::new(1.0, 0.0, 0.0)
    }

    #[test]
    fn hat_zero_is_zero() {
        assert_eq!(hat(&Vec3::zeros()), Mat3::zeros());
    }

    #[test]
    fn hat_e3_e1_is_e2() {
        assert_eq!(hat(&e3()) * e1(), Vec3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn hat_is_skew() {
        let h = hat(&Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(h + h.transpose(), Mat3::zeros());
        assert_eq!(vee(&h), Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn exp_zero_is_identity() {
        assert_eq!(so3_exp(&Vec3::zeros()), Rot3::identity());
    }

    #[test]
    fn exp_quarter_turn() {
        let r = so3_exp(&Vec3::new(0.0, 0.0, PI / 2.0));
        let v = r.apply(&e1());
        assert!((v - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn exp_small_angle_branch_matches_rodrigues() {
        let w = Vec3::new(3e-9, -2e-9, 5e-9);
        let small = so3_exp(&w);
        let expected = Mat3::identity() + hat(&w) + 0.5 * hat(&w) * hat(&w);
        assert!((small.matrix() - expected).abs().max() < 1e-20);
    }

    #[test]
    fn euler_roundtrip() {
        let r = Rot3::from_euler_zyx(0.3, -0.2, 1.1);
        let (a, b, c) = r.euler_zyx();
        assert!((a - 0.3).abs() < 1e-12 && (b + 0.2).abs() < 1e-12 && (c - 1.1).abs() < 1e-12);
        assert!(r.orthonormality_error() < 1e-12);
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngStream::new(11);
        let mut b = RngStream::new(11);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let n = 100_000;
        let mut a = RngStream::derive(5, 0);
        let mut b = RngStream::derive(5, 1);
        let xs: Vec<f64> = (0..n).map(|_| a.unit()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.unit()).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr.abs() < 0.01, "corr = {corr}");
    }

    proptest! {
        #[test]
        fn hat_is_cross(v in prop::array::uniform3(-10.0f64..10.0), w in prop::array::uniform3(-10.0f64..10.0)) {
            let v = Vec3::from(v);
            let w = Vec3::from(w);
            let d = hat(&v) * w - v.cross(&w);
            prop_assert!(d.norm() < 1e-12);
        }

        #[test]
        fn exp_is_rotation(w in prop::array::uniform3(-10.0f64..10.0)) {
            let r = so3_exp(&Vec3::from(w));
            prop_assert!(r.orthonormality_error() < 1e-9);
        }

        #[test]
        fn exp_inverse(w in prop::array::uniform3(-1.8f64..1.8)) {
            let w = Vec3::from(w);
            prop_assume!(w.norm() < PI);
            let p = so3_exp(&w).compose(&so3_exp(&(-w)));
            prop_assert!((p.matrix() - Mat3::identity()).abs().max() < 1e-12);
        }
    }
}
