//! Rigid transforms and their axis-angle parameterization.

use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Below this `sin θ` the axis is recovered from the symmetric part of `R`.
const NEAR_PI_SIN: f64 = 1e-4;

/// A proper rigid motion `x ↦ R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Mat3,
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
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Builds a transform, rejecting rotations that are not orthonormal with det +1.
    pub fn new(rotation: Mat3, translation: Vec3, tolerance: f64) -> Result<Self> {
        let t = RigidTransform {
            rotation,
            translation,
        };
        if !t.is_proper(tolerance) {
            return Err(Error::invalid("rotation is not orthonormal with determinant +1"));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite translation"));
        }
        Ok(t)
    }

    pub fn from_rotation_vector(r: &RotationVector, translation: Vec3) -> Self {
        RigidTransform {
            rotation: r.to_matrix(),
            translation,
        }
    }

    pub fn translation(t: Vec3) -> Self {
        RigidTransform {
            rotation: Mat3::identity(),
            translation: t,
        }
    }

    /// Rotation by `angle` radians about the global Y axis.
    pub fn rotation_y(angle: f64) -> Self {
        RigidTransform {
            rotation: *Rotation3::from_axis_angle(&Vec3::y_axis(), angle).matrix(),
            translation: Vec3::zeros(),
        }
    }

    /// Orthonormality and unit determinant within `tolerance` (max-abs entry error).
    pub fn is_proper(&self, tolerance: f64) -> bool {
        let r = &self.rotation;
        if !r.iter().all(|v| v.is_finite()) {
            return false;
        }
        let gram = r.transpose() * r - Mat3::identity();
        gram.amax() <= tolerance && (r.determinant() - 1.0).abs() <= tolerance
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
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

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Reads the upper 3×4 block; the bottom row must be `(0, 0, 0, 1)`.
    pub fn from_homogeneous(m: &Matrix4<f64>, tolerance: f64) -> Result<Self> {
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom[..3].iter().any(|v| v.abs() > tolerance) || (bottom[3] - 1.0).abs() > tolerance {
            return Err(Error::invalid("bottom row of homogeneous matrix is not (0,0,0,1)"));
        }
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
            tolerance,
        )
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        RotationVector::from_matrix(&self.rotation).angle()
    }

    /// Angle of the relative rotation `selfᵀ·other`, radians.
    pub fn rotation_error(&self, other: &RigidTransform) -> f64 {
        RotationVector::from_matrix(&(self.rotation.transpose() * other.rotation)).angle()
    }
}

/// Axis-angle vector `θ·α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationVector(pub Vec3);

impl RotationVector {
    pub fn zero() -> Self {
        RotationVector(Vec3::zeros())
    }

    pub fn angle(&self) -> f64 {
        self.0.norm()
    }

    /// Unit axis, or `None` for the identity.
    pub fn axis(&self) -> Option<Vec3> {
        let theta = self.angle();
        (theta > 0.0).then(|| self.0 / theta)
    }

    /// Exponential map. Any norm is accepted; angles beyond π wrap.
    pub fn to_matrix(&self) -> Mat3 {
        *Rotation3::new(self.0).matrix()
    }

    /// Logarithm of a rotation matrix, returning `‖r‖ ∈ [0, π]`.
    pub fn from_matrix(r: &Mat3) -> Self {
        // vee(R - Rᵀ) = 2 sin θ · α
        let w = Vec3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        );
        let sin_theta = 0.5 * w.norm();
        let cos_theta = 0.5 * (r.trace() - 1.0);
        let theta = sin_theta.atan2(cos_theta);
        if theta == 0.0 {
            return RotationVector::zero();
        }
        if sin_theta > NEAR_PI_SIN || cos_theta > 0.0 {
            return RotationVector(w * (theta / (2.0 * sin_theta)));
        }
        // Near π: R + Rᵀ = 2cosθ·I + 2(1 - cosθ)·ααᵀ
        let one_minus_cos = 1.0 - cos_theta;
        let sym = (r + r.transpose()) * 0.5;
        let diag = Vec3::new(
            (sym[(0, 0)] - cos_theta) / one_minus_cos,
            (sym[(1, 1)] - cos_theta) / one_minus_cos,
            (sym[(2, 2)] - cos_theta) / one_minus_cos,
        );
        let i = diag.imax();
        let ai = diag[i].max(0.0).sqrt();
        let mut axis = Vec3::zeros();
        for j in 0..3 {
            axis[j] = if j == i {
                ai
            } else {
                sym[(i, j)] / (one_minus_cos * ai)
            };
        }
        axis.normalize_mut();
        if axis.dot(&w) < 0.0 {
            axis = -axis;
        }
        RotationVector(axis * theta)
    }
}
