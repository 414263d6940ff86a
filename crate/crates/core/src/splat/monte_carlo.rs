use nalgebra::{Matrix2, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Gaussian3D, SplatError};
use crate::camera::Projector;
use crate::geometry::Pose;

pub const MIN_MC_SAMPLES: usize = 1000;

/// Empirical projected moments over the samples that projected validly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
    pub valid_fraction: f64,
}

/// Samples `N(mu, Σ)` as `mu + R diag(scale) z`, projects every sample and
/// returns the moments of the valid ones. Identical for identical seeds.
pub fn mc_project<P: Projector + ?Sized>(
    g: &Gaussian3D,
    pose: &Pose,
    cam: &P,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate, SplatError> {
    if samples < MIN_MC_SAMPLES {
        return Err(SplatError::TooFewSamples { min: MIN_MC_SAMPLES, got: samples });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotation = pose.rotation();
    let sqrt = rotation * g.covariance_sqrt();
    let mu_cam = rotation * g.mean + pose.t;
    let mut pixels = Vec::with_capacity(samples);
    for _ in 0..samples {
        let z = Vector3::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        let p = mu_cam + sqrt * z;
        if let Ok(proj) = cam.project_point(&p) {
            if proj.valid {
                pixels.push(proj.pixel);
            }
        }
    }
    let valid = pixels.len();
    if 2 * valid < samples || valid < 2 {
        return Err(SplatError::UnreliableOracle { valid, total: samples });
    }
    let n = valid as f64;
    let mean: Vector2<f64> = pixels.iter().sum::<Vector2<f64>>() / n;
    let mut cov = Matrix2::zeros();
    for p in &pixels {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= n - 1.0;
    Ok(MonteCarloEstimate { mean, cov: 0.5 * (cov + cov.transpose()), valid_fraction: n / samples as f64 })
}
