use nalgebra::Vector3;

use super::{Gaussian3D, Moments2D, ProjectedGaussian};
use crate::camera::Projector;
use crate::geometry::Pose;

/// First-order moments: the mean is projected directly and the covariance is
/// pushed through the Jacobian of the full camera map at the mean.
pub fn ewa_moments<P: Projector + ?Sized>(g: &Gaussian3D, pose: &Pose, cam: &P) -> Option<Moments2D> {
    let rotation = pose.rotation();
    let p_cam = rotation * g.mean + pose.t;
    let proj = cam.project_point(&p_cam).ok()?;
    if !proj.valid {
        return None;
    }
    let jac = cam.jacobian(&p_cam)? * rotation;
    let cov = jac * g.covariance() * jac.transpose();
    Some(Moments2D { mean: proj.pixel, cov: 0.5 * (cov + cov.transpose()) })
}

pub fn project_ewa<P: Projector + ?Sized>(g: &Gaussian3D, pose: &Pose, cam: &P) -> ProjectedGaussian {
    let depth = camera_distance(g, pose);
    match ewa_moments(g, pose, cam) {
        Some(m) => ProjectedGaussian::from_moments(m, depth),
        None => ProjectedGaussian::invalid(depth),
    }
}

pub(super) fn camera_distance(g: &Gaussian3D, pose: &Pose) -> f64 {
    let p: Vector3<f64> = pose.transform(&g.mean);
    p.norm()
}
