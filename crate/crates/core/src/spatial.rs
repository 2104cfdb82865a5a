//! Rotations, rigid transforms, and 6-D velocity/force vectors.
//!
//! Rotations are plain 3x3 matrices such that `p_A = R_AB * p_B`. Six-vectors
//! always store the linear (or force) part first and the angular (or moment)
//! part second.

use std::ops::Mul;

use nalgebra::{Matrix3, Vector3, Vector6};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Orthonormality and determinant tolerance for [`Rotation`].
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Below this rotation angle `exp_so3` switches to its Taylor expansion.
const SMALL_ANGLE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpatialError {
    #[error("matrix is not a rotation (orthonormality error {orthonormality:e}, det {det})")]
    InvalidRotation { orthonormality: f64, det: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Skew-symmetric matrix `S(x)` with `S(x) y = x × y`.
pub fn skew(x: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -x.z, x.y, x.z, 0.0, -x.x, -x.y, x.x, 0.0)
}

/// Inverse of [`skew`]: extracts `x` from the skew-symmetric part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// A proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Checks `RᵀR = I` and `det R = +1` to [`ROTATION_TOLERANCE`].
    pub fn try_from_matrix(m: Matrix3<f64>) -> Result<Self, SpatialError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(SpatialError::NonFinite("rotation"));
        }
        let orthonormality = orthonormality_error(&m);
        let det = m.determinant();
        if orthonormality > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(SpatialError::InvalidRotation { orthonormality, det });
        }
        Ok(Self(m))
    }

    /// Wraps `m` without checks, e.g. for values read back from storage.
    /// Consumers that need the invariants call
    /// [`RobotConfiguration::validate`](crate::RobotConfiguration::validate).
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Rotation of `angle` radians about the unit vector `axis`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        exp_so3(&(axis * angle), 1.0)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Largest absolute entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.0)
    }

    /// Projects back onto SO(3) by Gram-Schmidt on the columns.
    pub fn orthonormalized(&self) -> Self {
        let x = self.0.column(0).normalize();
        let y = self.0.column(1) - x * x.dot(&self.0.column(1));
        let y = y.normalize();
        let z = x.cross(&y);
        Self(Matrix3::from_columns(&[x, y, z]))
    }

    /// URDF convention: fixed-axis X, then Y, then Z (`Rz(yaw) Ry(pitch) Rx(roll)`).
    pub(crate) fn from_rpy(roll: f64, pitch: f64, yaw: f64) -> Self {
        let r = nalgebra::Rotation3::from_euler_angles(roll, pitch, yaw);
        Self(*r.matrix())
    }

    pub(crate) fn to_rpy(self) -> (f64, f64, f64) {
        nalgebra::Rotation3::from_matrix_unchecked(self.0).euler_angles()
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;

    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for &Rotation {
    type Output = Vec3;

    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

fn orthonormality_error(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).amax()
}

/// Rotation reached after spinning at constant angular velocity `omega` for
/// `dt` seconds (Rodrigues formula).
pub fn exp_so3(omega: &Vec3, dt: f64) -> Rotation {
    let phi = omega * dt;
    let angle = phi.norm();
    let k = skew(&phi);
    let k2 = k * k;
    let (a, b) = if angle < SMALL_ANGLE {
        let a2 = angle * angle;
        (1.0 - a2 / 6.0, 0.5 - a2 / 24.0)
    } else {
        (angle.sin() / angle, (1.0 - angle.cos()) / (angle * angle))
    };
    Rotation(Matrix3::identity() + k * a + k2 * b)
}

/// Rigid transform `p ↦ R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Transform {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Transform {
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self { rotation: Rotation::identity(), translation }
    }

    pub fn from_rotation(rotation: Rotation) -> Self {
        Self { rotation, translation: Vec3::zeros() }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Transform {
        let rt = self.rotation.transpose();
        Transform { rotation: rt, translation: -(rt * self.translation) }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        transform_point(self, p)
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * *v
    }
}

impl Mul for Transform {
    type Output = Transform;

    fn mul(self, rhs: Transform) -> Transform {
        self.compose(&rhs)
    }
}

pub fn transform_point(t: &Transform, p: &Vec3) -> Vec3 {
    t.rotation * *p + t.translation
}

/// Linear and angular velocity of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub linear: Vec3,
    pub angular: Vec3,
}

impl Twist {
    pub fn new(linear: Vec3, angular: Vec3) -> Self {
        Self { linear, angular }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        stack(&self.linear, &self.angular)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self { linear: v.fixed_rows::<3>(0).into(), angular: v.fixed_rows::<3>(3).into() }
    }
}

/// Force and moment pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force: Vec3,
    pub moment: Vec3,
}

impl Wrench {
    pub fn new(force: Vec3, moment: Vec3) -> Self {
        Self { force, moment }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.moment.iter()).all(|v| v.is_finite())
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        stack(&self.force, &self.moment)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self { force: v.fixed_rows::<3>(0).into(), moment: v.fixed_rows::<3>(3).into() }
    }
}

fn stack(top: &Vec3, bottom: &Vec3) -> Vector6<f64> {
    Vector6::new(top.x, top.y, top.z, bottom.x, bottom.y, bottom.z)
}
