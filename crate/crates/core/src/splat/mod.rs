//! 3D Gaussians and their projection into fisheye images.
//!
//! Two projection routes are provided: EWA linearization of the camera map at
//! the Gaussian mean ([`project_ewa`]) and the Unscented Transform over seven
//! sigma points ([`project_ut`]). [`mc_project`] estimates the true projected
//! moments by sampling and serves as the reference for both.

mod compare;
mod ewa;
mod monte_carlo;
mod unscented;

use nalgebra::{Matrix2, Matrix3, UnitQuaternion, Vector2, Vector3};
use thiserror::Error;

pub use compare::{
    run_comparison, summarize, write_comparison_csv, BinSummary, CompareCamera, CompareConfig, Reference, TrialRecord, CSV_HEADER,
};
pub use ewa::{ewa_moments, project_ewa};
pub use monte_carlo::{mc_project, MonteCarloEstimate, MIN_MC_SAMPLES};
pub use unscented::{project_ut, sigma_points, ut_moments, SigmaPoints, UtConfig};

/// Added to every projected covariance, in pixel².
pub const COV_REGULARIZATION: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplatError {
    #[error("invalid gaussian: {0}")]
    InvalidGaussian(String),
    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("unscented spread n + kappa = {0} must be positive")]
    InvalidKappa(f64),
    #[error("monte carlo needs at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("monte carlo oracle unreliable: only {valid} of {total} samples projected")]
    UnreliableOracle { valid: usize, total: usize },
    #[error("invalid comparison setup: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian3D {
    pub mean: Vector3<f64>,
    /// Standard deviations along the local axes.
    pub scale: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
    pub opacity: f64,
    pub color: [f64; 3],
}

impl Gaussian3D {
    pub fn new(
        mean: Vector3<f64>,
        scale: Vector3<f64>,
        rotation: UnitQuaternion<f64>,
        opacity: f64,
        color: [f64; 3],
    ) -> Result<Self, SplatError> {
        if !mean.iter().all(|v| v.is_finite()) {
            return Err(SplatError::InvalidGaussian("non-finite mean".into()));
        }
        if !scale.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(SplatError::InvalidGaussian(format!("scales must be positive, got {scale:?}")));
        }
        if !(opacity > 0.0 && opacity <= 1.0) {
            return Err(SplatError::InvalidGaussian(format!("opacity {opacity} not in (0, 1]")));
        }
        if !color.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(SplatError::InvalidGaussian(format!("color {color:?} not in [0, 1]")));
        }
        if !rotation.coords.iter().all(|v| v.is_finite()) {
            return Err(SplatError::InvalidGaussian("non-finite rotation".into()));
        }
        Ok(Gaussian3D { mean, scale, rotation, opacity, color })
    }

    pub fn isotropic(mean: Vector3<f64>, sigma: f64, opacity: f64, color: [f64; 3]) -> Result<Self, SplatError> {
        Self::new(mean, Vector3::repeat(sigma), UnitQuaternion::identity(), opacity, color)
    }

    /// `R diag(scale) `, a square root of the covariance.
    pub fn covariance_sqrt(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner() * Matrix3::from_diagonal(&self.scale)
    }

    /// World covariance `R diag(scale²) Rᵀ`.
    pub fn covariance(&self) -> Matrix3<f64> {
        let m = self.covariance_sqrt();
        let c = m * m.transpose();
        0.5 * (c + c.transpose())
    }
}

/// Unregularized projected moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments2D {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedGaussian {
    pub mean2d: Vector2<f64>,
    pub cov2d: Matrix2<f64>,
    /// Distance from the camera center to the mean.
    pub depth: f64,
    pub valid: bool,
}

impl ProjectedGaussian {
    pub fn invalid(depth: f64) -> Self {
        ProjectedGaussian { mean2d: Vector2::new(f64::NAN, f64::NAN), cov2d: Matrix2::zeros(), depth, valid: false }
    }

    pub(crate) fn from_moments(m: Moments2D, depth: f64) -> Self {
        let cov = m.cov + Matrix2::identity() * COV_REGULARIZATION;
        let cov = 0.5 * (cov + cov.transpose());
        let det = cov.determinant();
        let ok = m.mean.iter().all(|v| v.is_finite()) && cov.iter().all(|v| v.is_finite()) && cov[(0, 0)] > 0.0 && det > 0.0;
        if !ok {
            return Self::invalid(depth);
        }
        ProjectedGaussian { mean2d: m.mean, cov2d: cov, depth, valid: true }
    }
}

/// Relative Frobenius distance `|a - b|_F / |reference|_F`.
pub fn relative_frobenius(a: &Matrix2<f64>, b: &Matrix2<f64>, reference: &Matrix2<f64>) -> f64 {
    (a - b).norm() / reference.norm()
}
