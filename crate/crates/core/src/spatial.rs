//! Rigid-body math: rotations, transforms, wrenches and the SO(3)
//! exponential/log maps.
//!
//! Rotations are kept as 3x3 matrices. Quaternions only appear when values
//! cross a file boundary (see [`Rotation::from_quaternion_wxyz`] and
//! [`Rotation::to_quaternion_wxyz`]).

use std::ops::Mul;

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Norm below which an axis-angle vector is treated as the zero rotation.
const EXP_ZERO_NORM: f64 = 1e-12;

/// Margin from pi inside which the log map refuses to answer.
pub const LOG_SINGULAR_MARGIN: f64 = 1e-6;

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Skew-symmetric (cross product) matrix of `v`.
pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn vee(m: &Matrix3<f64>) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// A proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps a matrix after checking orthonormality and a positive determinant.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument(
                "rotation has non-finite entries".into(),
            ));
        }
        let err = (m * m.transpose() - Matrix3::identity()).amax();
        if err > ORTHONORMAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "matrix is not orthonormal (max deviation {err:e})"
            )));
        }
        if (m.determinant() - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidArgument(
                "rotation determinant is not +1".into(),
            ));
        }
        Ok(Rotation(m))
    }

    /// Builds a rotation from a `[w, x, y, z]` quaternion. The quaternion
    /// must have unit norm within `tol`; it is renormalized afterwards.
    pub fn from_quaternion_wxyz(q: [f64; 4], tol: f64) -> Result<Self> {
        if !q.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument(
                "quaternion has non-finite entries".into(),
            ));
        }
        let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "quaternion norm {norm} deviates from 1 by more than {tol}"
            )));
        }
        let uq = UnitQuaternion::new_normalize(Quaternion::new(q[0], q[1], q[2], q[3]));
        Ok(Rotation(*uq.to_rotation_matrix().matrix()))
    }

    /// Quaternion `[w, x, y, z]` with `w >= 0`.
    pub fn to_quaternion_wxyz(&self) -> [f64; 4] {
        let uq = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.0));
        let q = uq.quaternion();
        let s = if q.w < 0.0 { -1.0 } else { 1.0 };
        [s * q.w, s * q.i, s * q.j, s * q.k]
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        let c = ((self.0.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        let s = 0.5 * vee(&(self.0 - self.0.transpose())).norm();
        s.atan2(c)
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

/// Exponential map: axis-angle vector to rotation matrix (Rodrigues).
pub fn rot_exp(v: &Vec3) -> Result<Rotation> {
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidArgument("rot_exp input is not finite".into()));
    }
    Ok(rot_exp_unchecked(v))
}

pub(crate) fn rot_exp_unchecked(v: &Vec3) -> Rotation {
    let theta = v.norm();
    if theta < EXP_ZERO_NORM {
        return Rotation::identity();
    }
    let k = skew(&(v / theta));
    Rotation(Matrix3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos()))
}

/// Log map on the principal branch. Fails within [`LOG_SINGULAR_MARGIN`] of pi.
pub fn rot_log(r: &Rotation) -> Result<Vec3> {
    let m = r.matrix();
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let w = 0.5 * vee(&(m - m.transpose()));
    let s = w.norm();
    let theta = s.atan2(c);
    if theta >= std::f64::consts::PI - LOG_SINGULAR_MARGIN {
        return Err(Error::NearSingular { angle: theta });
    }
    if s < 1e-12 {
        // theta/sin(theta) -> 1
        return Ok(w * (1.0 + theta * theta / 6.0));
    }
    Ok(w * (theta / s))
}

/// Inverse of the left Jacobian of SO(3) at `phi`.
///
/// For `R = exp(phi)`, `log(exp(w) R) ~ phi + jl_inv(phi) w` for small `w`.
pub fn left_jacobian_inverse(phi: &Vec3) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    let coeff = if theta < 1e-6 {
        1.0 / 12.0 + theta * theta / 720.0
    } else {
        1.0 / (theta * theta) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    Matrix3::identity() - 0.5 * k + coeff * k * k
}

/// A rigid transform: `x_world = rotation * x_local + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Rotation::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        RigidTransform {
            rotation: Rotation::identity(),
            translation,
        }
    }

    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * *p + self.translation
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|x| x.is_finite())
            && self.rotation.matrix().iter().all(|x| x.is_finite())
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;
    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

/// Wire form of a transform: translation plus `[w, x, y, z]` quaternion.
#[derive(Serialize, Deserialize)]
struct TransformRepr {
    translation: [f64; 3],
    quaternion: [f64; 4],
}

/// Tolerance on the unit norm of quaternions read from files.
pub const QUATERNION_NORM_TOL: f64 = 1e-6;

impl Serialize for RigidTransform {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TransformRepr {
            translation: self.translation.into(),
            quaternion: self.rotation.to_quaternion_wxyz(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = TransformRepr::deserialize(d)?;
        let rotation = Rotation::from_quaternion_wxyz(repr.quaternion, QUATERNION_NORM_TOL)
            .map_err(serde::de::Error::custom)?;
        Ok(RigidTransform::new(rotation, Vec3::from(repr.translation)))
    }
}

/// Force and torque acting on a link, both expressed in the world frame.
/// The torque is taken about the link origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Wrench {
    pub fn zero() -> Self {
        Wrench::default()
    }

    pub fn new(force: Vec3, torque: Vec3) -> Self {
        Wrench { force, torque }
    }

    pub fn scaled(&self, s: f64) -> Wrench {
        Wrench {
            force: self.force * s,
            torque: self.torque * s,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.force == Vec3::zeros() && self.torque == Vec3::zeros()
    }

    pub fn is_finite(&self) -> bool {
        self.force
            .iter()
            .chain(self.torque.iter())
            .all(|x| x.is_finite())
    }
}
