//! Dense point-cloud initialization from monocular fisheye depth maps.
//!
//! Per-view depth grids are unprojected into camera-frame clouds, fused into
//! one cloud using the predicted camera poses, aligned to the SfM frame with a
//! least-squares similarity transform and thinned to a point budget.

use log::warn;
use nalgebra::{Matrix3, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::camera::FisheyeCamera;
use crate::geometry::{Pose, SimilarityTransform};
use crate::raster::Image;
use crate::scene_io::DepthGrid;

/// Point budget the depth-initialized scenes operated at.
pub const DEFAULT_POINT_BUDGET: usize = 2_130_000;
/// Default pixel stride when unprojecting full-resolution depth grids.
pub const DEFAULT_STRIDE: u32 = 2;
/// Default sampling seed.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Error)]
pub enum DepthInitError {
    #[error("depth grid {grid_w}x{grid_h} is not an integer subsampling of camera {cam_w}x{cam_h}")]
    DimensionMismatch { grid_w: u32, grid_h: u32, cam_w: u32, cam_h: u32 },
    #[error("color image {0}x{1} does not match the camera resolution")]
    ColorMismatch(u32, u32),
    #[error("{clouds} clouds but {poses} poses")]
    CountMismatch { clouds: usize, poses: usize },
    #[error("cloud {0} is not in the camera frame")]
    WrongFrame(usize),
    #[error("alignment needs at least 3 correspondences, got {0}")]
    TooFewPoints(usize),
    #[error("source and target have {0} and {1} points")]
    UnequalCounts(usize, usize),
    #[error("degenerate (collinear or coincident) correspondence configuration")]
    Degenerate,
    #[error("stride must be at least 1")]
    ZeroStride,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Camera,
    PredWorld,
    Colmap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<Vector3<f64>>,
    pub colors: Option<Vec<[u8; 3]>>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn empty(frame: Frame) -> Self {
        PointCloud { positions: Vec::new(), colors: None, frame }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Checks that positions are finite and colors, when present, line up.
    pub fn is_consistent(&self) -> bool {
        self.positions.iter().all(|p| p.iter().all(|v| v.is_finite()))
            && self.colors.as_ref().is_none_or(|c| c.len() == self.positions.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthKind {
    /// Euclidean distance along the pixel ray.
    Range,
    /// Distance along the optical axis.
    ZDepth,
}

#[derive(Debug, Clone, Copy)]
pub struct UnprojectOptions {
    /// Use every `stride`-th grid pixel in both directions.
    pub stride: u32,
    pub kind: DepthKind,
}

impl Default for UnprojectOptions {
    fn default() -> Self {
        UnprojectOptions { stride: 1, kind: DepthKind::Range }
    }
}

/// Lifts a depth grid into a camera-frame cloud.
///
/// The grid may be an integer subsampling of the camera resolution. Ray
/// directions stored in the grid take precedence over the camera model.
pub fn unproject_depth(
    grid: &DepthGrid,
    cam: &FisheyeCamera,
    image: Option<&Image>,
    opts: &UnprojectOptions,
) -> Result<PointCloud, DepthInitError> {
    if opts.stride == 0 {
        return Err(DepthInitError::ZeroStride);
    }
    let mismatch = || DepthInitError::DimensionMismatch {
        grid_w: grid.width(),
        grid_h: grid.height(),
        cam_w: cam.width(),
        cam_h: cam.height(),
    };
    if grid.width() == 0
        || grid.height() == 0
        || !cam.width().is_multiple_of(grid.width())
        || !cam.height().is_multiple_of(grid.height())
    {
        return Err(mismatch());
    }
    let factor = cam.width() / grid.width();
    if cam.height() / grid.height() != factor {
        return Err(mismatch());
    }
    if let Some(img) = image {
        if img.width() != cam.width() || img.height() != cam.height() {
            return Err(DepthInitError::ColorMismatch(img.width(), img.height()));
        }
    }
    let f = f64::from(factor);
    type Row = (Vec<Vector3<f64>>, Vec<[u8; 3]>);
    let rows: Vec<Row> = (0..grid.height())
        .into_par_iter()
        .filter(|j| j % opts.stride == 0)
        .map(|j| {
            let mut pts = Vec::new();
            let mut cols = Vec::new();
            for i in (0..grid.width()).step_by(opts.stride as usize) {
                let depth = f64::from(grid.value(i, j));
                if !(depth > 0.0) || !depth.is_finite() {
                    continue;
                }
                let pixel = Vector2::new((f64::from(i) + 0.5) * f - 0.5, (f64::from(j) + 0.5) * f - 0.5);
                let direction = match grid.ray(i, j) {
                    Some(r) => Vector3::new(f64::from(r[0]), f64::from(r[1]), f64::from(r[2])).normalize(),
                    None => match cam.unproject(&pixel) {
                        Ok(ray) => ray.direction,
                        Err(_) => continue,
                    },
                };
                let point = match opts.kind {
                    DepthKind::Range => depth * direction,
                    DepthKind::ZDepth => {
                        if direction.z <= 0.0 {
                            continue;
                        }
                        (depth / direction.z) * direction
                    }
                };
                pts.push(point);
                if let Some(img) = image {
                    let x = pixel.x.round().clamp(0.0, f64::from(img.width() - 1)) as u32;
                    let y = pixel.y.round().clamp(0.0, f64::from(img.height() - 1)) as u32;
                    let p = img.pixel(x, y);
                    cols.push(if p.len() == 3 { [p[0], p[1], p[2]] } else { [p[0]; 3] });
                }
            }
            (pts, cols)
        })
        .collect();
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    for (p, c) in rows {
        positions.extend(p);
        colors.extend(c);
    }
    Ok(PointCloud { positions, colors: image.map(|_| colors), frame: Frame::Camera })
}

/// Maps each camera-frame cloud to the world with its pose and concatenates.
/// Colors survive only when every input carries them.
pub fn fuse_clouds(clouds: &[PointCloud], poses: &[Pose]) -> Result<PointCloud, DepthInitError> {
    if clouds.len() != poses.len() {
        return Err(DepthInitError::CountMismatch { clouds: clouds.len(), poses: poses.len() });
    }
    if let Some(i) = clouds.iter().position(|c| c.frame != Frame::Camera) {
        return Err(DepthInitError::WrongFrame(i));
    }
    let keep_colors = !clouds.is_empty() && clouds.iter().all(|c| c.colors.is_some());
    let mut out = PointCloud::empty(Frame::PredWorld);
    let mut colors = Vec::new();
    for (cloud, pose) in clouds.iter().zip(poses) {
        let rt = pose.rotation().transpose();
        out.positions.extend(cloud.positions.iter().map(|p| rt * (p - pose.t)));
        if keep_colors {
            colors.extend_from_slice(cloud.colors.as_ref().expect("checked"));
        }
    }
    if keep_colors {
        out.colors = Some(colors);
    }
    Ok(out)
}

/// Closed-form least-squares similarity with `s R src + t ≈ tgt` (Umeyama).
pub fn umeyama_align(source: &[Vector3<f64>], target: &[Vector3<f64>]) -> Result<SimilarityTransform, DepthInitError> {
    if source.len() != target.len() {
        return Err(DepthInitError::UnequalCounts(source.len(), target.len()));
    }
    let n = source.len();
    if n < 3 {
        return Err(DepthInitError::TooFewPoints(n));
    }
    let inv_n = 1.0 / n as f64;
    let mean_s = source.iter().sum::<Vector3<f64>>() * inv_n;
    let mean_t = target.iter().sum::<Vector3<f64>>() * inv_n;

    let mut var_s = 0.0;
    let mut scatter_s = Matrix3::zeros();
    let mut cross = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        let ds = s - mean_s;
        let dt = t - mean_t;
        var_s += ds.norm_squared();
        scatter_s += ds * ds.transpose();
        cross += dt * ds.transpose();
    }
    var_s *= inv_n;
    cross *= inv_n;

    // collinear sources leave rotation about the line undetermined
    let spread = scatter_s.symmetric_eigenvalues();
    let mut ev: Vec<f64> = spread.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if !(ev[0] > 0.0) || ev[1] <= 1e-12 * ev[0] {
        return Err(DepthInitError::Degenerate);
    }

    let svd = cross.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut sign = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        sign[(2, 2)] = -1.0;
    }
    let rotation = u * sign * v_t;
    let trace_ds: f64 = (0..3).map(|i| svd.singular_values[i] * sign[(i, i)]).sum();
    let scale = trace_ds / var_s;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(DepthInitError::Degenerate);
    }
    let translation = mean_t - scale * (rotation * mean_s);
    Ok(SimilarityTransform { scale, rotation, translation })
}

pub fn apply_similarity(cloud: &PointCloud, transform: &SimilarityTransform) -> PointCloud {
    PointCloud {
        positions: cloud.positions.iter().map(|p| transform.apply(p)).collect(),
        colors: cloud.colors.clone(),
        frame: Frame::Colmap,
    }
}

/// Uniform random subset of exactly `target_count` points (input order kept),
/// or the cloud unchanged when it is not larger than the budget.
pub fn downsample(cloud: &PointCloud, target_count: usize, seed: u64) -> PointCloud {
    let target_count = target_count.max(1);
    if cloud.len() <= target_count {
        return cloud.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, cloud.len(), target_count).into_vec();
    picked.sort_unstable();
    PointCloud {
        positions: picked.iter().map(|&i| cloud.positions[i]).collect(),
        colors: cloud.colors.as_ref().map(|c| picked.iter().map(|&i| c[i]).collect()),
        frame: cloud.frame,
    }
}

/// Correspondences between predicted-frame and SfM camera poses.
///
/// Each view contributes its center plus the three points one "spread" unit
/// along the camera axes, where the spread is the RMS distance of that
/// frame's centers from their centroid. The spread scales with the frame, so
/// the augmented points stay consistent under a similarity. With one view
/// the spread is undefined and a unit length is used in both frames.
pub fn pose_correspondences(predicted: &[Pose], colmap: &[Pose]) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
    fn augment(poses: &[Pose]) -> Vec<Vector3<f64>> {
        let centers: Vec<Vector3<f64>> = poses.iter().map(Pose::center).collect();
        let spread = if centers.len() >= 2 {
            let mean = centers.iter().sum::<Vector3<f64>>() / centers.len() as f64;
            (centers.iter().map(|c| (c - mean).norm_squared()).sum::<f64>() / centers.len() as f64).sqrt()
        } else {
            1.0
        };
        let spread = if spread > 0.0 { spread } else { 1.0 };
        let mut out = Vec::with_capacity(poses.len() * 4);
        for (pose, c) in poses.iter().zip(&centers) {
            let rt = pose.rotation().transpose();
            out.push(*c);
            for axis in [Vector3::x(), Vector3::y(), Vector3::z()] {
                out.push(c + spread * (rt * axis));
            }
        }
        out
    }
    (augment(predicted), augment(colmap))
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub transform: SimilarityTransform,
    /// RMS correspondence residual after alignment.
    pub rms_residual: f64,
    pub correspondences: usize,
}

/// Estimates the predicted-to-SfM similarity from matching camera poses.
pub fn align_poses(predicted: &[Pose], colmap: &[Pose]) -> Result<Alignment, DepthInitError> {
    if predicted.len() != colmap.len() {
        return Err(DepthInitError::CountMismatch { clouds: predicted.len(), poses: colmap.len() });
    }
    if predicted.len() == 1 {
        warn!("single view: alignment scale is unobservable and relies on axis points only");
    }
    let (src, tgt) = pose_correspondences(predicted, colmap);
    let transform = umeyama_align(&src, &tgt)?;
    Ok(Alignment { rms_residual: rms_residual(&transform, &src, &tgt), correspondences: src.len(), transform })
}

pub fn rms_residual(transform: &SimilarityTransform, source: &[Vector3<f64>], target: &[Vector3<f64>]) -> f64 {
    if source.is_empty() {
        return 0.0;
    }
    let sum: f64 = source.iter().zip(target).map(|(s, t)| (transform.apply(s) - t).norm_squared()).sum();
    (sum / source.len() as f64).sqrt()
}
