//! Rigid and similarity transforms.

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("quaternion norm {0} is not 1")]
    NonUnitQuaternion(f64),
    #[error("non-finite pose component")]
    NonFinite,
    #[error("scale {0} must be positive")]
    NonPositiveScale(f64),
    #[error("matrix is not a proper rotation")]
    NotRotation,
}

/// World-to-camera rigid transform as stored by COLMAP: `p_cam = R(q) p_world + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    /// Unit quaternion `(w, x, y, z)`.
    pub q: [f64; 4],
    pub t: Vector3<f64>,
    pub image_name: String,
}

impl Pose {
    /// Quaternions within 1e-9 of unit norm are kept bit-for-bit; slightly
    /// denormalized input (up to 1e-4) is renormalized.
    pub fn new(q: [f64; 4], t: Vector3<f64>, image_name: impl Into<String>) -> Result<Self, GeometryError> {
        if !q.iter().chain(t.iter()).all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let q = if (norm - 1.0).abs() <= 1e-9 {
            q
        } else if (norm - 1.0).abs() <= 1e-4 {
            q.map(|v| v / norm)
        } else {
            return Err(GeometryError::NonUnitQuaternion(norm));
        };
        Ok(Pose { q, t, image_name: image_name.into() })
    }

    pub fn identity(image_name: impl Into<String>) -> Self {
        Pose { q: [1.0, 0.0, 0.0, 0.0], t: Vector3::zeros(), image_name: image_name.into() }
    }

    pub fn from_rotation(rotation: &Matrix3<f64>, t: Vector3<f64>, image_name: impl Into<String>) -> Self {
        let uq = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*rotation));
        let mut q = [uq.w, uq.i, uq.j, uq.k];
        if q[0] < 0.0 {
            q = q.map(|v| -v);
        }
        Pose { q, t, image_name: image_name.into() }
    }

    /// Pose whose camera sits at `center` with world-to-camera rotation `rotation`.
    pub fn from_center(rotation: &Matrix3<f64>, center: &Vector3<f64>, image_name: impl Into<String>) -> Self {
        Self::from_rotation(rotation, -(rotation * center), image_name)
    }

    pub fn unit_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::new_normalize(Quaternion::new(self.q[0], self.q[1], self.q[2], self.q[3]))
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.unit_quaternion().to_rotation_matrix().into_inner()
    }

    /// World point to camera frame.
    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p + self.t
    }

    /// Camera-frame point to world frame: `R^T (p - t)`.
    pub fn inverse_transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation().transpose() * (p - self.t)
    }

    /// Camera center `C = -R^T t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation().transpose() * self.t)
    }
}

/// `p -> s R p + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn new(scale: f64, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(GeometryError::NonPositiveScale(scale));
        }
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if ortho > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(GeometryError::NotRotation);
        }
        Ok(SimilarityTransform { scale, rotation, translation })
    }

    pub fn identity() -> Self {
        SimilarityTransform { scale: 1.0, rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let rt = self.rotation.transpose();
        SimilarityTransform { scale: 1.0 / self.scale, rotation: rt, translation: -(rt * self.translation) / self.scale }
    }

    /// Rotation angle in radians.
    pub fn rotation_angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }

    /// Expresses a world-to-camera pose of the source frame in the target frame.
    pub fn transform_pose(&self, pose: &Pose) -> Pose {
        let rotation = pose.rotation() * self.rotation.transpose();
        let center = self.apply(&pose.center());
        Pose::from_center(&rotation, &center, pose.image_name.clone())
    }
}

/// Angle of a rotation matrix, robust near 0 and pi.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let skew = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let sin = 0.5 * skew.norm();
    let cos = 0.5 * (r.trace() - 1.0);
    sin.atan2(cos)
}
