//! Seeded EWA/UT comparison against a reference covariance, binned by the
//! incidence angle of the Gaussian mean.

use std::io::Write;

use nalgebra::{Matrix2x3, Matrix3, Quaternion, UnitQuaternion, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{ewa_moments, mc_project, relative_frobenius, ut_moments, Gaussian3D, SplatError, UtConfig};
use crate::camera::{AffineCamera, FisheyeCamera, Projector};
use crate::geometry::Pose;

const MAX_DRAWS_PER_TRIAL: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareCamera {
    /// Centered equidistant camera, 1000 px square.
    Fisheye,
    /// Fixed affine map; the reference is the exact pushforward.
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    Analytic,
    MonteCarlo,
}

impl Reference {
    pub fn name(self) -> &'static str {
        match self {
            Reference::Analytic => "analytic",
            Reference::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub fov_deg: f64,
    pub trials: usize,
    pub seed: u64,
    pub camera: CompareCamera,
    pub mc_samples: usize,
    /// Incidence-angle bins in degrees, `[lo, hi]`.
    pub bins: Vec<(f64, f64)>,
    pub ut: UtConfig,
    pub image_size: u32,
    /// Range of the camera distance of the mean, scene units.
    pub depth_range: (f64, f64),
    /// Range of each axis scale relative to the mean's distance, sampled log-uniformly.
    pub relative_scale_range: (f64, f64),
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            fov_deg: 200.0,
            trials: 100,
            seed: 7,
            camera: CompareCamera::Fisheye,
            mc_samples: 100_000,
            bins: vec![(0.0, 20.0), (20.0, 40.0), (40.0, 60.0), (60.0, 70.0), (70.0, 95.0)],
            ut: UtConfig::default(),
            image_size: 1000,
            depth_range: (2.0, 6.0),
            relative_scale_range: (0.005, 0.05),
        }
    }
}

impl CompareConfig {
    fn validate(&self) -> Result<(), SplatError> {
        let bad = |m: String| Err(SplatError::InvalidConfig(m));
        if !(self.fov_deg > 0.0 && self.fov_deg <= 360.0) {
            return bad(format!("field of view {} deg", self.fov_deg));
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.bins.is_empty() {
            return bad("no bins".into());
        }
        for &(lo, hi) in &self.bins {
            if !(lo >= 0.0 && lo < hi && hi < self.fov_deg / 2.0) {
                return bad(format!("bin [{lo}, {hi}] must lie inside [0, {})", self.fov_deg / 2.0));
            }
        }
        let (d0, d1) = self.depth_range;
        if !(d0 > 0.0 && d0 <= d1 && d1.is_finite()) {
            return bad(format!("depth range {:?}", self.depth_range));
        }
        let (s0, s1) = self.relative_scale_range;
        if !(s0 > 0.0 && s0 <= s1 && s1.is_finite()) {
            return bad(format!("scale range {:?}", self.relative_scale_range));
        }
        if self.camera == CompareCamera::Fisheye && self.mc_samples < super::MIN_MC_SAMPLES {
            return Err(SplatError::TooFewSamples { min: super::MIN_MC_SAMPLES, got: self.mc_samples });
        }
        UtConfig::new(self.ut.kappa)?;
        Ok(())
    }
}

/// One trial. Errors are relative Frobenius distances of unregularized
/// covariances, normalized by the reference covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub bin_lo_deg: f64,
    pub bin_hi_deg: f64,
    pub trial: usize,
    pub theta_deg: f64,
    pub reference: Reference,
    pub ewa_err: f64,
    pub ut_err: f64,
    pub ewa_ut_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinSummary {
    pub bin_lo_deg: f64,
    pub bin_hi_deg: f64,
    pub trials: usize,
    pub ut_wins: usize,
    pub median_ewa_err: f64,
    pub median_ut_err: f64,
    pub max_ewa_err: f64,
    pub max_ut_err: f64,
    pub max_ewa_ut_diff: f64,
}

enum Camera {
    Fisheye(FisheyeCamera),
    Affine(AffineCamera),
}

impl Camera {
    fn projector(&self) -> &dyn Projector {
        match self {
            Camera::Fisheye(c) => c,
            Camera::Affine(c) => c,
        }
    }
}

/// Records ordered by bin, then trial.
pub fn run_comparison(cfg: &CompareConfig) -> Result<Vec<TrialRecord>, SplatError> {
    cfg.validate()?;
    let fisheye =
        FisheyeCamera::centered_equidistant(cfg.image_size, cfg.fov_deg).map_err(|e| SplatError::InvalidConfig(e.to_string()))?;
    let camera = match cfg.camera {
        CompareCamera::Fisheye => Camera::Fisheye(fisheye.clone()),
        CompareCamera::Affine => {
            let f = fisheye.fx();
            let c = fisheye.cx();
            Camera::Affine(AffineCamera::new(Matrix2x3::new(f, 0.1 * f, 0.2 * f, -0.05 * f, f, 0.3 * f), Vector2::new(c, c)))
        }
    };
    let theta_max = fisheye.theta_max();
    let jobs: Vec<(usize, usize)> = (0..cfg.bins.len()).flat_map(|b| (0..cfg.trials).map(move |t| (b, t))).collect();
    jobs.par_iter().map(|&(bin, trial)| run_trial(cfg, &camera, theta_max, bin, trial)).collect()
}

fn run_trial(cfg: &CompareConfig, camera: &Camera, theta_max: f64, bin: usize, trial: usize) -> Result<TrialRecord, SplatError> {
    let (lo, hi) = cfg.bins[bin];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(((bin as u64) << 32) | trial as u64);
    let cam = camera.projector();
    for _ in 0..MAX_DRAWS_PER_TRIAL {
        let (g, pose, theta) = draw_gaussian(cfg, &mut rng, lo, hi);
        let oracle_seed: u64 = rng.random();
        let sigma_max = g.scale.max();
        let dist = pose.transform(&g.mean).norm();
        if theta + 4.0 * sigma_max / dist > theta_max {
            continue;
        }
        let (Some(ewa), Some(ut)) = (ewa_moments(&g, &pose, cam), ut_moments(&g, &pose, cam, &cfg.ut)) else {
            continue;
        };
        let (reference, ref_cov) = match camera {
            Camera::Affine(a) => {
                let r = pose.rotation();
                let m = a.matrix * r;
                (Reference::Analytic, m * g.covariance() * m.transpose())
            }
            Camera::Fisheye(_) => match mc_project(&g, &pose, cam, cfg.mc_samples, oracle_seed) {
                Ok(est) => (Reference::MonteCarlo, est.cov),
                Err(SplatError::UnreliableOracle { .. }) => continue,
                Err(e) => return Err(e),
            },
        };
        return Ok(TrialRecord {
            bin_lo_deg: lo,
            bin_hi_deg: hi,
            trial,
            theta_deg: theta.to_degrees(),
            reference,
            ewa_err: relative_frobenius(&ewa.cov, &ref_cov, &ref_cov),
            ut_err: relative_frobenius(&ut.cov, &ref_cov, &ref_cov),
            ewa_ut_diff: relative_frobenius(&ewa.cov, &ut.cov, &ref_cov),
        });
    }
    Err(SplatError::InvalidConfig(format!("no admissible gaussian for bin [{lo}, {hi}] after {MAX_DRAWS_PER_TRIAL} draws")))
}

/// Gaussian whose mean sits at incidence angle `theta` in `[lo, hi]` degrees
/// of a randomly placed camera. Returns the Gaussian, the pose and `theta`.
fn draw_gaussian(cfg: &CompareConfig, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> (Gaussian3D, Pose, f64) {
    let theta = rng.random_range(lo..=hi).to_radians();
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let dist = rng.random_range(cfg.depth_range.0..=cfg.depth_range.1);
    let dir = Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
    let cam_rotation: Matrix3<f64> = random_rotation(rng).to_rotation_matrix().into_inner();
    let center = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
    let pose = Pose::from_center(&cam_rotation, &center, "trial");
    let mean = cam_rotation.transpose() * (dist * dir) + center;
    let (s0, s1) = cfg.relative_scale_range;
    let mut scale = Vector3::zeros();
    for s in scale.iter_mut() {
        *s = dist * rng.random_range(s0.ln()..=s1.ln()).exp();
    }
    let g = Gaussian3D::new(mean, scale, random_rotation(rng), 1.0, [0.5; 3]).expect("valid by construction");
    // incidence angle as seen through the stored pose, not the drawn value
    let p = pose.transform(&mean);
    let theta = p.x.hypot(p.y).atan2(p.z);
    (g, pose, theta)
}

fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    loop {
        let q = Quaternion::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        if q.norm() > 1e-6 {
            return UnitQuaternion::from_quaternion(q);
        }
    }
}

pub fn summarize(records: &[TrialRecord]) -> Vec<BinSummary> {
    let mut out: Vec<BinSummary> = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let key = (records[start].bin_lo_deg, records[start].bin_hi_deg);
        let end = start + records[start..].iter().take_while(|r| (r.bin_lo_deg, r.bin_hi_deg) == key).count();
        let bin = &records[start..end];
        let mut ewa: Vec<f64> = bin.iter().map(|r| r.ewa_err).collect();
        let mut ut: Vec<f64> = bin.iter().map(|r| r.ut_err).collect();
        out.push(BinSummary {
            bin_lo_deg: key.0,
            bin_hi_deg: key.1,
            trials: bin.len(),
            ut_wins: bin.iter().filter(|r| r.ut_err < r.ewa_err).count(),
            median_ewa_err: median(&mut ewa),
            median_ut_err: median(&mut ut),
            max_ewa_err: ewa.iter().copied().fold(0.0, f64::max),
            max_ut_err: ut.iter().copied().fold(0.0, f64::max),
            max_ewa_ut_diff: bin.iter().map(|r| r.ewa_ut_diff).fold(0.0, f64::max),
        });
        start = end;
    }
    out
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub const CSV_HEADER: &str = "bin_lo_deg,bin_hi_deg,trial,theta_deg,reference,ewa_rel_err,ut_rel_err,ewa_ut_rel_diff";

pub fn write_comparison_csv<W: Write>(mut w: W, records: &[TrialRecord]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{:e},{},{:e},{:e},{:e}",
            r.bin_lo_deg,
            r.bin_hi_deg,
            r.trial,
            r.theta_deg,
            r.reference.name(),
            r.ewa_err,
            r.ut_err,
            r.ewa_ut_diff
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(camera: CompareCamera) -> CompareConfig {
        CompareConfig { trials: 8, mc_samples: 2000, camera, ..CompareConfig::default() }
    }

    #[test]
    fn affine_reference_makes_ut_exact() {
        let records = run_comparison(&small(CompareCamera::Affine)).unwrap();
        assert_eq!(records.len(), 40);
        for r in &records {
            assert_eq!(r.reference, Reference::Analytic);
            assert!(r.ut_err <= 1e-9, "{r:?}");
        }
    }

    #[test]
    fn records_are_ordered_and_inside_bins() {
        let records = run_comparison(&small(CompareCamera::Fisheye)).unwrap();
        for (i, r) in records.iter().enumerate() {
            assert_eq!(r.trial, i % 8);
            assert!(r.theta_deg >= r.bin_lo_deg - 1e-9 && r.theta_deg <= r.bin_hi_deg + 1e-9);
            assert_eq!(r.reference, Reference::MonteCarlo);
        }
        let summary = summarize(&records);
        assert_eq!(summary.len(), 5);
        assert!(summary.iter().all(|s| s.trials == 8));
    }

    #[test]
    fn csv_is_deterministic() {
        let cfg = small(CompareCamera::Fisheye);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_comparison_csv(&mut a, &run_comparison(&cfg).unwrap()).unwrap();
        write_comparison_csv(&mut b, &run_comparison(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(text.lines().count(), 41);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = CompareConfig { bins: vec![(90.0, 110.0)], ..CompareConfig::default() };
        assert!(run_comparison(&cfg).is_err());
        let cfg = CompareConfig { trials: 0, ..CompareConfig::default() };
        assert!(run_comparison(&cfg).is_err());
    }
}
