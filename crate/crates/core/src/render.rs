//! Tile-based forward rasterizer for projected Gaussians.
//!
//! Gaussians are projected once, sorted front to back by camera distance and
//! binned into screen-space tiles. Each tile then composites its pixels
//! independently.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use thiserror::Error;

use crate::camera::{FisheyeCamera, GuardBand};
use crate::geometry::Pose;
use crate::raster::Image;
use crate::scene_io::DepthGrid;
use crate::splat::{project_ewa, project_ut, Gaussian3D, ProjectedGaussian, UtConfig};
use crate::warp::quantize;

/// Depth is reported only where the accumulated alpha reaches this.
pub const MIN_DEPTH_ALPHA: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("invalid render configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown backend {0:?}, expected \"ewa\" or \"ut\"")]
    UnknownBackend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Ewa,
    Ut,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Ewa => "ewa",
            Backend::Ut => "ut",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ewa" => Ok(Backend::Ewa),
            "ut" => Ok(Backend::Ut),
            _ => Err(RenderError::UnknownBackend(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub backend: Backend,
    pub tile_size: u32,
    /// Contributions below this alpha are skipped.
    pub alpha_threshold: f64,
    /// Gaussians are cut off at this Mahalanobis radius.
    pub extent_sigmas: f64,
    /// RGB in `[0, 1]`.
    pub background: [f64; 3],
    pub alpha_max: f64,
    /// Gaussians are projected up to this many degrees past the field of
    /// view, so splats centered just outside the image circle still cover it.
    pub guard_deg: f64,
    /// Compositing stops once transmittance drops below this.
    pub min_transmittance: f64,
    pub ut: UtConfig,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            backend: Backend::Ut,
            tile_size: 16,
            alpha_threshold: 1.0 / 255.0,
            extent_sigmas: 3.0,
            background: [0.0; 3],
            alpha_max: 0.99,
            guard_deg: 10.0,
            min_transmittance: 1e-4,
            ut: UtConfig::default(),
        }
    }
}

impl RenderConfig {
    pub fn with_backend(backend: Backend) -> Self {
        RenderConfig { backend, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        let bad = |m: String| Err(RenderError::InvalidConfig(m));
        if self.tile_size == 0 {
            return bad("tile size must be at least 1".into());
        }
        if !(self.extent_sigmas > 0.0 && self.extent_sigmas.is_finite()) {
            return bad(format!("extent {} must be positive", self.extent_sigmas));
        }
        if !(0.0..1.0).contains(&self.alpha_threshold) {
            return bad(format!("alpha threshold {} not in [0, 1)", self.alpha_threshold));
        }
        if !(self.alpha_max > 0.0 && self.alpha_max < 1.0) {
            return bad(format!("alpha clamp {} not in (0, 1)", self.alpha_max));
        }
        if !(self.guard_deg >= 0.0 && self.guard_deg.is_finite()) {
            return bad(format!("guard band {} deg must be non-negative", self.guard_deg));
        }
        if !(0.0..1.0).contains(&self.min_transmittance) {
            return bad(format!("transmittance cutoff {} not in [0, 1)", self.min_transmittance));
        }
        if !self.background.iter().all(|c| (0.0..=1.0).contains(c)) {
            return bad(format!("background {:?} not in [0, 1]", self.background));
        }
        UtConfig::new(self.ut.kappa).map_err(|e| RenderError::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderStats {
    pub input: usize,
    /// Projection invalid under the chosen backend.
    pub culled: usize,
    /// Projected but with a covariance that could not be inverted.
    pub skipped_singular: usize,
    pub rasterized: usize,
}

/// Floating-point render result. Colors are in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub width: u32,
    pub height: u32,
    pub color: Vec<[f64; 3]>,
    /// Alpha-weighted camera distance, NaN where alpha < [`MIN_DEPTH_ALPHA`].
    pub depth: Vec<f64>,
    /// `1 - T` after compositing.
    pub alpha: Vec<f64>,
    pub mask: Vec<bool>,
    pub stats: RenderStats,
}

impl RenderOutput {
    pub fn to_image(&self) -> Image {
        let data = self.color.iter().flat_map(|c| c.map(|v| quantize(255.0 * v))).collect();
        Image::new(self.width, self.height, 3, data).and_then(|img| img.with_mask(self.mask.clone())).expect("consistent size")
    }

    pub fn to_depth_grid(&self) -> DepthGrid {
        let values = self.depth.iter().map(|&d| if d.is_finite() && d > 0.0 { d as f32 } else { f32::NAN }).collect();
        DepthGrid::new(self.width, self.height, values, None).expect("depths are positive or NaN")
    }
}

#[derive(Debug, Clone, Copy)]
struct Splat {
    mean: Vector2<f64>,
    cov: Matrix2<f64>,
    conic: Matrix2<f64>,
    depth: f64,
    opacity: f64,
    color: [f64; 3],
}

/// Projection used by the rasterizer, through the guard-banded camera.
pub fn project(g: &Gaussian3D, pose: &Pose, cam: &FisheyeCamera, cfg: &RenderConfig) -> ProjectedGaussian {
    project_banded(g, pose, &cam.guard_band(cfg.guard_deg.to_radians()), cfg)
}

fn project_banded(g: &Gaussian3D, pose: &Pose, band: &GuardBand<'_>, cfg: &RenderConfig) -> ProjectedGaussian {
    match cfg.backend {
        Backend::Ewa => project_ewa(g, pose, band),
        Backend::Ut => project_ut(g, pose, band, &cfg.ut),
    }
}

pub fn render(
    gaussians: &[Gaussian3D],
    pose: &Pose,
    cam: &FisheyeCamera,
    cfg: &RenderConfig,
) -> Result<RenderOutput, RenderError> {
    cfg.validate()?;
    let band = cam.guard_band(cfg.guard_deg.to_radians());
    let projected: Vec<ProjectedGaussian> = gaussians.par_iter().map(|g| project_banded(g, pose, &band, cfg)).collect();
    let mut stats = RenderStats { input: gaussians.len(), ..RenderStats::default() };
    let mut splats = Vec::with_capacity(gaussians.len());
    for (g, p) in gaussians.iter().zip(&projected) {
        if !p.valid {
            stats.culled += 1;
            continue;
        }
        match p.cov2d.try_inverse().filter(|c| c.iter().all(|v| v.is_finite())) {
            Some(conic) => {
                splats.push(Splat { mean: p.mean2d, cov: p.cov2d, conic, depth: p.depth, opacity: g.opacity, color: g.color })
            }
            None => stats.skipped_singular += 1,
        }
    }
    if stats.skipped_singular > 0 {
        log::warn!("skipped {} gaussians with singular projected covariance", stats.skipped_singular);
    }
    stats.rasterized = splats.len();
    // stable: equal depths keep input order
    let mut order: Vec<usize> = (0..splats.len()).collect();
    order.sort_by(|&a, &b| splats[a].depth.total_cmp(&splats[b].depth));
    let splats: Vec<Splat> = order.into_iter().map(|i| splats[i]).collect();

    let (w, h) = (cam.width(), cam.height());
    let ts = cfg.tile_size;
    let tiles_x = w.div_ceil(ts);
    let tiles_y = h.div_ceil(ts);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_x as usize * tiles_y as usize];
    for (i, s) in splats.iter().enumerate() {
        let Some((x0, x1, y0, y1)) = pixel_bounds(s, w, h, cfg.extent_sigmas) else {
            continue;
        };
        for ty in y0 / ts..=y1 / ts {
            for tx in x0 / ts..=x1 / ts {
                bins[(ty * tiles_x + tx) as usize].push(i as u32);
            }
        }
    }

    let tiles: Vec<Vec<PixelResult>> = (0..bins.len())
        .into_par_iter()
        .map(|t| {
            let tx = t as u32 % tiles_x;
            let ty = t as u32 / tiles_x;
            let mut out = Vec::with_capacity((ts * ts) as usize);
            for y in ty * ts..((ty + 1) * ts).min(h) {
                for x in tx * ts..((tx + 1) * ts).min(w) {
                    out.push(shade_pixel(x, y, &bins[t], &splats, cam, cfg));
                }
            }
            out
        })
        .collect();

    let n = w as usize * h as usize;
    let mut color = vec![[0.0; 3]; n];
    let mut depth = vec![f64::NAN; n];
    let mut alpha = vec![0.0; n];
    let mut mask = vec![false; n];
    for (t, pixels) in tiles.into_iter().enumerate() {
        let tx = t as u32 % tiles_x;
        let ty = t as u32 / tiles_x;
        let mut it = pixels.into_iter();
        for y in ty * ts..((ty + 1) * ts).min(h) {
            for x in tx * ts..((tx + 1) * ts).min(w) {
                let p = it.next().expect("one result per pixel");
                let k = y as usize * w as usize + x as usize;
                color[k] = p.color;
                depth[k] = p.depth;
                alpha[k] = p.alpha;
                mask[k] = p.valid;
            }
        }
    }
    Ok(RenderOutput { width: w, height: h, color, depth, alpha, mask, stats })
}

pub fn render_image(
    gaussians: &[Gaussian3D],
    pose: &Pose,
    cam: &FisheyeCamera,
    cfg: &RenderConfig,
) -> Result<Image, RenderError> {
    Ok(render(gaussians, pose, cam, cfg)?.to_image())
}

pub fn render_depth(
    gaussians: &[Gaussian3D],
    pose: &Pose,
    cam: &FisheyeCamera,
    cfg: &RenderConfig,
) -> Result<DepthGrid, RenderError> {
    Ok(render(gaussians, pose, cam, cfg)?.to_depth_grid())
}

/// Inclusive pixel range covered by the `extent`-sigma ellipse, clipped to
/// the image. The box of `dᵀ C⁻¹ d <= k²` has half widths `k·sqrt(C_xx)` and
/// `k·sqrt(C_yy)`.
fn pixel_bounds(s: &Splat, w: u32, h: u32, extent: f64) -> Option<(u32, u32, u32, u32)> {
    let rx = extent * s.cov[(0, 0)].sqrt();
    let ry = extent * s.cov[(1, 1)].sqrt();
    // one pixel of slack absorbs rounding between cov and its inverse
    let x0 = (s.mean.x - rx - 1.0).floor().max(0.0);
    let x1 = (s.mean.x + rx + 1.0).ceil().min(f64::from(w) - 1.0);
    let y0 = (s.mean.y - ry - 1.0).floor().max(0.0);
    let y1 = (s.mean.y + ry + 1.0).ceil().min(f64::from(h) - 1.0);
    if !(x0 <= x1 && y0 <= y1) {
        return None;
    }
    Some((x0 as u32, x1 as u32, y0 as u32, y1 as u32))
}

struct PixelResult {
    color: [f64; 3],
    depth: f64,
    alpha: f64,
    valid: bool,
}

fn shade_pixel(x: u32, y: u32, list: &[u32], splats: &[Splat], cam: &FisheyeCamera, cfg: &RenderConfig) -> PixelResult {
    let pixel = Vector2::new(f64::from(x), f64::from(y));
    if cam.unproject(&pixel).is_err() {
        return PixelResult { color: cfg.background, depth: f64::NAN, alpha: 0.0, valid: false };
    }
    let cutoff = cfg.extent_sigmas * cfg.extent_sigmas;
    let mut color = [0.0; 3];
    let mut t = 1.0;
    let mut depth_sum = 0.0;
    let mut weight_sum = 0.0;
    for &i in list {
        let s = &splats[i as usize];
        let d = pixel - s.mean;
        let power = (d.transpose() * s.conic * d)[0];
        if !(power <= cutoff) {
            continue;
        }
        let a = (s.opacity * (-0.5 * power).exp()).min(cfg.alpha_max);
        if a < cfg.alpha_threshold {
            continue;
        }
        let w = t * a;
        for (c, sc) in color.iter_mut().zip(s.color) {
            *c += w * sc;
        }
        depth_sum += w * s.depth;
        weight_sum += w;
        t *= 1.0 - a;
        if t < cfg.min_transmittance {
            break;
        }
    }
    for (c, b) in color.iter_mut().zip(cfg.background) {
        *c += t * b;
    }
    let depth = if weight_sum >= MIN_DEPTH_ALPHA { depth_sum / weight_sum } else { f64::NAN };
    PixelResult { color, depth, alpha: 1.0 - t, valid: true }
}
