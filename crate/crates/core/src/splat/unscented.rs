use nalgebra::{Cholesky, Matrix2, Matrix3, Vector2, Vector3};

use super::ewa::camera_distance;
use super::{Gaussian3D, Moments2D, ProjectedGaussian, SplatError};
use crate::camera::Projector;
use crate::geometry::Pose;

const DIM: f64 = 3.0;

/// Symmetric sigma-point set parameters with `alpha = 1`, `beta = 0`, so
/// `lambda = kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtConfig {
    pub kappa: f64,
}

impl Default for UtConfig {
    fn default() -> Self {
        UtConfig { kappa: 0.0 }
    }
}

impl UtConfig {
    pub fn new(kappa: f64) -> Result<Self, SplatError> {
        if !(DIM + kappa > 0.0) || !kappa.is_finite() {
            return Err(SplatError::InvalidKappa(DIM + kappa));
        }
        Ok(UtConfig { kappa })
    }

    pub fn lambda(&self) -> f64 {
        self.kappa
    }
}

/// `[mu, mu + c L_1, mu + c L_2, mu + c L_3, mu - c L_1, mu - c L_2, mu - c L_3]`
/// with `c = sqrt(n + lambda)` and `L` the Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPoints {
    pub points: [Vector3<f64>; 7],
    pub weights: [f64; 7],
}

pub fn sigma_points(mu: &Vector3<f64>, sigma: &Matrix3<f64>, cfg: &UtConfig) -> Result<SigmaPoints, SplatError> {
    let spread = DIM + cfg.lambda();
    if !(spread > 0.0) {
        return Err(SplatError::InvalidKappa(spread));
    }
    let chol = Cholesky::new(*sigma).ok_or(SplatError::NotPositiveDefinite)?;
    let l = chol.l() * spread.sqrt();
    let mut points = [*mu; 7];
    for i in 0..3 {
        let col: Vector3<f64> = l.column(i).into();
        points[1 + i] = mu + col;
        points[4 + i] = mu - col;
    }
    let side = 1.0 / (2.0 * spread);
    let mut weights = [side; 7];
    weights[0] = cfg.lambda() / spread;
    Ok(SigmaPoints { points, weights })
}

/// Weighted moments of the projected sigma points. `None` when the
/// covariance is not SPD or any sigma point fails to project.
pub fn ut_moments<P: Projector + ?Sized>(g: &Gaussian3D, pose: &Pose, cam: &P, cfg: &UtConfig) -> Option<Moments2D> {
    let sp = sigma_points(&g.mean, &g.covariance(), cfg).ok()?;
    let rotation = pose.rotation();
    let mut pixels = [Vector2::zeros(); 7];
    for (px, p) in pixels.iter_mut().zip(&sp.points) {
        let proj = cam.project_point(&(rotation * p + pose.t)).ok()?;
        if !proj.valid {
            return None;
        }
        *px = proj.pixel;
    }
    let mean: Vector2<f64> = pixels.iter().zip(&sp.weights).map(|(p, w)| p * *w).sum();
    let mut cov = Matrix2::zeros();
    for (p, w) in pixels.iter().zip(&sp.weights) {
        let d = p - mean;
        cov += *w * d * d.transpose();
    }
    Some(Moments2D { mean, cov: 0.5 * (cov + cov.transpose()) })
}

/// Unscented projection; invalid whenever any sigma point leaves the
/// camera's valid field of view.
pub fn project_ut<P: Projector + ?Sized>(g: &Gaussian3D, pose: &Pose, cam: &P, cfg: &UtConfig) -> ProjectedGaussian {
    let depth = camera_distance(g, pose);
    match ut_moments(g, pose, cam, cfg) {
        Some(m) => ProjectedGaussian::from_moments(m, depth),
        None => ProjectedGaussian::invalid(depth),
    }
}
