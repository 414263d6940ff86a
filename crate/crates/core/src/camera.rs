//! Fisheye and pinhole camera models.
//!
//! All models share the radial form `pixel = c + f * d(theta) * (x, y) / rho`
//! where `theta` is the incidence angle of the camera-frame point and `rho` its
//! distance from the optical axis. The models differ only in the radial mapping
//! `d(theta)`:
//!
//! * equidistant: `d(theta) = theta`
//! * polynomial (Kannala-Brandt / OpenCV fisheye):
//!   `d(theta) = theta + k1 theta^3 + k2 theta^5 + k3 theta^7 + k4 theta^9`
//! * pinhole: `d(theta) = tan(theta)`, defined only below 90°
//!
//! Pixel coordinates put the center of pixel `(i, j)` at `(i, j)`; a pixel is
//! inside the image when it lies in `[-0.5, width - 0.5) x [-0.5, height - 0.5)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2x3, Vector2, Vector3};
use thiserror::Error;

/// Number of samples used to verify that `d(theta)` is strictly increasing.
const MONOTONE_SAMPLES: usize = 4096;
/// Absolute tolerance on `theta` for the polynomial inversion.
const INVERSE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("invalid camera parameter: {0}")]
    InvalidParameter(String),
    #[error("radial mapping is not strictly increasing near theta = {theta:.6} rad")]
    NonMonotoneDistortion { theta: f64 },
    #[error("point has non-finite coordinates")]
    NonFinite,
    #[error("point (0, 0, 0) has no direction")]
    DegeneratePoint,
    #[error("pixel ({x:.3}, {y:.3}) is outside the image")]
    OutOfImage { x: f64, y: f64 },
    #[error("pixel ({x:.3}, {y:.3}) is beyond the maximum incidence angle")]
    OutOfFov { x: f64, y: f64 },
    #[error("camera text line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CameraModel {
    Equidistant,
    Polynomial,
    Pinhole,
}

impl CameraModel {
    pub fn name(self) -> &'static str {
        match self {
            CameraModel::Equidistant => "EQUIDISTANT",
            CameraModel::Polynomial => "POLYNOMIAL",
            CameraModel::Pinhole => "PINHOLE",
        }
    }
}

impl fmt::Display for CameraModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CameraModel {
    type Err = CameraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EQUIDISTANT" => Ok(CameraModel::Equidistant),
            "POLYNOMIAL" => Ok(CameraModel::Polynomial),
            "PINHOLE" => Ok(CameraModel::Pinhole),
            other => Err(CameraError::InvalidParameter(format!("unknown camera model '{other}'"))),
        }
    }
}

/// Unit viewing direction in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub direction: Vector3<f64>,
    /// Angle between `direction` and the optical axis `(0, 0, 1)`.
    pub theta: f64,
}

/// Result of projecting a camera-frame point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: Vector2<f64>,
    pub theta: f64,
    /// `false` when the point is beyond the maximum incidence angle or lands
    /// outside the image. `pixel` is always finite when `valid` is set.
    pub valid: bool,
}

/// Anything that maps camera-frame points to the image plane.
///
/// Implemented by [`FisheyeCamera`] and by [`AffineCamera`], an exactly affine
/// test camera used to check the moment propagation routines.
pub trait Projector: Sync {
    fn project_point(&self, point: &Vector3<f64>) -> Result<Projection, CameraError>;

    /// Analytic 2x3 Jacobian of the pixel with respect to the camera-frame point.
    fn jacobian(&self, point: &Vector3<f64>) -> Option<Matrix2x3<f64>>;
}

/// Intrinsic camera with a radially symmetric projection.
///
/// Values are validated on construction and immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct FisheyeCamera {
    model: CameraModel,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    k: [f64; 4],
    width: u32,
    height: u32,
    fov_deg: f64,
    theta_max: f64,
}

impl FisheyeCamera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: CameraModel,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        k: [f64; 4],
        width: u32,
        height: u32,
        fov_deg: f64,
    ) -> Result<Self, CameraError> {
        let invalid = |msg: String| Err(CameraError::InvalidParameter(msg));
        let all_finite = [fx, fy, cx, cy, fov_deg].iter().chain(k.iter()).all(|v| v.is_finite());
        if !all_finite {
            return invalid("non-finite intrinsic".into());
        }
        if fx <= 0.0 || fy <= 0.0 {
            return invalid(format!("focal lengths must be positive (fx={fx}, fy={fy})"));
        }
        if width == 0 || height == 0 {
            return invalid(format!("empty image size {width}x{height}"));
        }
        if !(0.0..f64::from(width)).contains(&cx) || !(0.0..f64::from(height)).contains(&cy) {
            return invalid(format!("principal point ({cx}, {cy}) outside {width}x{height} image"));
        }
        if !(fov_deg > 0.0 && fov_deg <= 360.0) {
            return invalid(format!("field of view {fov_deg} deg not in (0, 360]"));
        }
        if model != CameraModel::Polynomial && k.iter().any(|&c| c != 0.0) {
            return invalid(format!("{model} camera must have zero distortion coefficients"));
        }
        let theta_max = (fov_deg / 2.0).to_radians();
        if model == CameraModel::Pinhole && theta_max >= FRAC_PI_2 {
            return invalid(format!("pinhole field of view {fov_deg} deg must be below 180"));
        }
        let camera = FisheyeCamera { model, fx, fy, cx, cy, k, width, height, fov_deg, theta_max };
        camera.check_monotone()?;
        Ok(camera)
    }

    pub fn equidistant(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32, fov_deg: f64) -> Result<Self, CameraError> {
        Self::new(CameraModel::Equidistant, fx, fy, cx, cy, [0.0; 4], width, height, fov_deg)
    }

    /// Equidistant camera whose image circle of `fov_deg` is inscribed in a
    /// `size x size` frame, principal point at the frame center.
    pub fn centered_equidistant(size: u32, fov_deg: f64) -> Result<Self, CameraError> {
        let focal = fov_to_focal(fov_deg, f64::from(size) / 2.0)?;
        let c = (f64::from(size) - 1.0) / 2.0;
        Self::equidistant(focal, focal, c, c, size, size, fov_deg)
    }

    /// Builds a camera whose maximum incidence angle is derived from the
    /// intrinsics: the largest image-centered circle (fisheye models) or the
    /// farthest image corner (pinhole).
    ///
    /// Used for cameras read from SfM models, which carry no field of view.
    #[allow(clippy::too_many_arguments)]
    pub fn with_derived_fov(
        model: CameraModel,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        k: [f64; 4],
        width: u32,
        height: u32,
    ) -> Result<Self, CameraError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(CameraError::InvalidParameter(format!("focal lengths must be positive (fx={fx}, fy={fy})")));
        }
        let (w, h) = (f64::from(width), f64::from(height));
        let theta = match model {
            CameraModel::Pinhole => {
                let corner = |u: f64, v: f64| ((u - cx) / fx).hypot((v - cy) / fy);
                let r = corner(-0.5, -0.5).max(corner(w - 0.5, -0.5)).max(corner(-0.5, h - 0.5)).max(corner(w - 0.5, h - 0.5));
                r.atan().min(FRAC_PI_2 * (1.0 - 1e-9))
            }
            CameraModel::Equidistant | CameraModel::Polynomial => {
                let r = ((cx + 0.5).min(w - 0.5 - cx) / fx).min((cy + 0.5).min(h - 0.5 - cy) / fy);
                if !(r > 0.0) {
                    return Err(CameraError::InvalidParameter(format!(
                        "principal point ({cx}, {cy}) outside {width}x{height} image"
                    )));
                }
                let limit = monotone_limit(model, &k) * (1.0 - 1e-9);
                if radial_map(model, &k, limit) <= r {
                    limit
                } else {
                    invert_increasing(|t| radial_map(model, &k, t), |t| radial_slope(model, &k, t), r, limit)
                }
            }
        };
        Self::new(model, fx, fy, cx, cy, k, width, height, 2.0 * theta.to_degrees())
    }

    /// Copy of this camera with the selected distortion coefficients set to
    /// zero (`mask[i] == true` zeroes `k[i+1]`).
    pub fn with_masked_coefficients(&self, mask: [bool; 4]) -> Result<Self, CameraError> {
        let mut k = self.k;
        for (c, &m) in k.iter_mut().zip(mask.iter()) {
            if m {
                *c = 0.0;
            }
        }
        Self::new(self.model, self.fx, self.fy, self.cx, self.cy, k, self.width, self.height, self.fov_deg)
    }

    pub fn model(&self) -> CameraModel {
        self.model
    }
    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn k(&self) -> [f64; 4] {
        self.k
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn fov_deg(&self) -> f64 {
        self.fov_deg
    }
    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    /// Radial distance `d(theta)` in normalized (focal = 1) units.
    pub fn radial_distance(&self, theta: f64) -> f64 {
        radial_map(self.model, &self.k, theta)
    }

    /// Derivative of [`Self::radial_distance`].
    pub fn radial_slope(&self, theta: f64) -> f64 {
        radial_slope(self.model, &self.k, theta)
    }

    /// Inverse of the radial mapping on `[0, theta_max]`.
    pub fn incidence_angle(&self, radial: f64) -> Option<f64> {
        let r_max = self.radial_distance(self.theta_max);
        if !(radial >= 0.0) || radial > r_max * (1.0 + 1e-12) {
            return None;
        }
        Some(match self.model {
            CameraModel::Equidistant => radial.min(self.theta_max),
            CameraModel::Pinhole => radial.atan().min(self.theta_max),
            CameraModel::Polynomial => {
                invert_increasing(|t| self.radial_distance(t), |t| self.radial_slope(t), radial.min(r_max), self.theta_max)
            }
        })
    }

    /// Largest incidence angle up to which the radial map is strictly increasing.
    pub fn model_domain(&self) -> f64 {
        match self.model {
            CameraModel::Equidistant => PI,
            CameraModel::Pinhole => FRAC_PI_2,
            CameraModel::Polynomial => monotone_limit(self.model, &self.k),
        }
    }

    /// Projection valid up to `theta_max + guard_rad`, kept strictly inside
    /// [`Self::model_domain`] and never below `theta_max`.
    pub fn guard_band(&self, guard_rad: f64) -> GuardBand<'_> {
        let domain = self.model_domain();
        let cap = domain - 1e-3 * domain;
        let theta_limit = (self.theta_max + guard_rad.max(0.0)).min(cap).max(self.theta_max);
        GuardBand { camera: self, theta_limit }
    }

    pub fn contains_pixel(&self, pixel: &Vector2<f64>) -> bool {
        pixel.x >= -0.5 && pixel.x < f64::from(self.width) - 0.5 && pixel.y >= -0.5 && pixel.y < f64::from(self.height) - 0.5
    }

    pub fn project(&self, point: &Vector3<f64>) -> Result<Projection, CameraError> {
        if !(point.x.is_finite() && point.y.is_finite() && point.z.is_finite()) {
            return Err(CameraError::NonFinite);
        }
        if point.x == 0.0 && point.y == 0.0 && point.z == 0.0 {
            return Err(CameraError::DegeneratePoint);
        }
        let rho = point.x.hypot(point.y);
        let theta = rho.atan2(point.z);
        if self.model == CameraModel::Pinhole && theta >= FRAC_PI_2 {
            return Ok(Projection { pixel: Vector2::new(f64::NAN, f64::NAN), theta, valid: false });
        }
        let pixel = if rho == 0.0 {
            Vector2::new(self.cx, self.cy)
        } else {
            let scale = self.radial_distance(theta) / rho;
            Vector2::new(self.cx + self.fx * scale * point.x, self.cy + self.fy * scale * point.y)
        };
        let valid = theta <= self.theta_max && pixel.x.is_finite() && pixel.y.is_finite() && self.contains_pixel(&pixel);
        Ok(Projection { pixel, theta, valid })
    }

    pub fn unproject(&self, pixel: &Vector2<f64>) -> Result<Ray, CameraError> {
        if !(pixel.x.is_finite() && pixel.y.is_finite()) {
            return Err(CameraError::NonFinite);
        }
        if !self.contains_pixel(pixel) {
            return Err(CameraError::OutOfImage { x: pixel.x, y: pixel.y });
        }
        let mx = (pixel.x - self.cx) / self.fx;
        let my = (pixel.y - self.cy) / self.fy;
        let r = mx.hypot(my);
        let theta = self.incidence_angle(r).ok_or(CameraError::OutOfFov { x: pixel.x, y: pixel.y })?;
        let direction = if r == 0.0 {
            Vector3::new(0.0, 0.0, 1.0)
        } else {
            let s = theta.sin() / r;
            Vector3::new(s * mx, s * my, theta.cos())
        };
        Ok(Ray { direction, theta })
    }

    /// Jacobian of the pixel with respect to the camera-frame point, including
    /// the radial mapping. Returns `None` where the projection is singular.
    pub fn projection_jacobian(&self, point: &Vector3<f64>) -> Option<Matrix2x3<f64>> {
        let (x, y, z) = (point.x, point.y, point.z);
        let rho2 = x * x + y * y;
        let rho = rho2.sqrt();
        let r2 = rho2 + z * z;
        if !(r2 > 0.0) || !r2.is_finite() {
            return None;
        }
        let theta = rho.atan2(z);
        if self.model == CameraModel::Pinhole && theta >= FRAC_PI_2 {
            return None;
        }
        let jac = if rho <= 1e-12 * r2.sqrt() {
            // on-axis limit: d(theta)/rho -> d'(0)/z, lateral derivatives only
            if z <= 0.0 {
                return None;
            }
            let s = self.radial_slope(0.0) / z;
            Matrix2x3::new(self.fx * s, 0.0, 0.0, 0.0, self.fy * s, 0.0)
        } else {
            let d = self.radial_distance(theta);
            let dd = self.radial_slope(theta);
            let s = d / rho;
            // s = d(theta)/rho; ds/dx = x*a, ds/dy = y*a, ds/dz = -d'/|p|^2
            let a = dd * z / (rho2 * r2) - d / (rho2 * rho);
            let sz = -dd / r2;
            Matrix2x3::new(
                self.fx * (s + x * x * a),
                self.fx * x * y * a,
                self.fx * x * sz,
                self.fy * x * y * a,
                self.fy * (s + y * y * a),
                self.fy * y * sz,
            )
        };
        jac.iter().all(|v| v.is_finite()).then_some(jac)
    }

    /// Serializes the camera as a `key = value` text block.
    pub fn to_text_block(&self) -> String {
        format!(
            "model = {}\nfx = {}\nfy = {}\ncx = {}\ncy = {}\nk1 = {}\nk2 = {}\nk3 = {}\nk4 = {}\nwidth = {}\nheight = {}\nfov_deg = {}\n",
            self.model, self.fx, self.fy, self.cx, self.cy, self.k[0], self.k[1], self.k[2], self.k[3],
            self.width, self.height, self.fov_deg
        )
    }

    pub fn parse_text_block(text: &str) -> Result<Self, CameraError> {
        let mut model = None;
        let mut values: [Option<f64>; 11] = [None; 11];
        const KEYS: [&str; 11] = ["fx", "fy", "cx", "cy", "k1", "k2", "k3", "k4", "width", "height", "fov_deg"];
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| CameraError::Parse { line: line_no, message: format!("expected 'key = value', got '{line}'") })?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            if key == "model" {
                model =
                    Some(value.parse::<CameraModel>().map_err(|e| CameraError::Parse { line: line_no, message: e.to_string() })?);
                continue;
            }
            let slot = KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| CameraError::Parse { line: line_no, message: format!("unknown key '{key}'") })?;
            let parsed = value
                .parse::<f64>()
                .map_err(|_| CameraError::Parse { line: line_no, message: format!("invalid number '{value}' for '{key}'") })?;
            values[slot] = Some(parsed);
        }
        let missing = |name: &str| CameraError::Parse { line: 0, message: format!("missing key '{name}'") };
        let model = model.ok_or_else(|| missing("model"))?;
        let get = |i: usize| values[i].ok_or_else(|| missing(KEYS[i]));
        let dim = |i: usize| -> Result<u32, CameraError> {
            let v = get(i)?;
            if v.fract() != 0.0 || !(1.0..=f64::from(u32::MAX)).contains(&v) {
                return Err(CameraError::Parse { line: 0, message: format!("'{}' must be a positive integer", KEYS[i]) });
            }
            Ok(v as u32)
        };
        let k = [values[4].unwrap_or(0.0), values[5].unwrap_or(0.0), values[6].unwrap_or(0.0), values[7].unwrap_or(0.0)];
        Self::new(model, get(0)?, get(1)?, get(2)?, get(3)?, k, dim(8)?, dim(9)?, get(10)?)
    }

    fn check_monotone(&self) -> Result<(), CameraError> {
        let mut prev = self.radial_distance(0.0);
        for i in 1..=MONOTONE_SAMPLES {
            let theta = self.theta_max * i as f64 / MONOTONE_SAMPLES as f64;
            let d = self.radial_distance(theta);
            if !(d > prev) || !(self.radial_slope(theta) > 0.0) {
                return Err(CameraError::NonMonotoneDistortion { theta });
            }
            prev = d;
        }
        Ok(())
    }
}

impl fmt::Display for FisheyeCamera {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text_block())
    }
}

impl FromStr for FisheyeCamera {
    type Err = CameraError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_text_block(s)
    }
}

impl Projector for FisheyeCamera {
    fn project_point(&self, point: &Vector3<f64>) -> Result<Projection, CameraError> {
        self.project(point)
    }

    fn jacobian(&self, point: &Vector3<f64>) -> Option<Matrix2x3<f64>> {
        self.projection_jacobian(point)
    }
}

/// Projection of a [`FisheyeCamera`] with the validity domain widened past
/// the field of view and without the image-bounds test, so primitives
/// straddling the image circle still reach the pixels they cover.
#[derive(Debug, Clone, Copy)]
pub struct GuardBand<'a> {
    camera: &'a FisheyeCamera,
    theta_limit: f64,
}

impl GuardBand<'_> {
    pub fn theta_limit(&self) -> f64 {
        self.theta_limit
    }
}

impl Projector for GuardBand<'_> {
    fn project_point(&self, point: &Vector3<f64>) -> Result<Projection, CameraError> {
        let mut proj = self.camera.project(point)?;
        proj.valid = proj.theta <= self.theta_limit && proj.pixel.x.is_finite() && proj.pixel.y.is_finite();
        Ok(proj)
    }

    fn jacobian(&self, point: &Vector3<f64>) -> Option<Matrix2x3<f64>> {
        self.camera.projection_jacobian(point)
    }
}

/// Exactly affine camera `pixel = A p + b`, always valid.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCamera {
    pub matrix: Matrix2x3<f64>,
    pub offset: Vector2<f64>,
}

impl AffineCamera {
    pub fn new(matrix: Matrix2x3<f64>, offset: Vector2<f64>) -> Self {
        AffineCamera { matrix, offset }
    }

    /// Orthographic camera looking down +z with `scale` pixels per unit.
    pub fn orthographic(scale: f64, cx: f64, cy: f64) -> Self {
        AffineCamera { matrix: Matrix2x3::new(scale, 0.0, 0.0, 0.0, scale, 0.0), offset: Vector2::new(cx, cy) }
    }
}

impl Projector for AffineCamera {
    fn project_point(&self, point: &Vector3<f64>) -> Result<Projection, CameraError> {
        if !(point.x.is_finite() && point.y.is_finite() && point.z.is_finite()) {
            return Err(CameraError::NonFinite);
        }
        let theta = point.x.hypot(point.y).atan2(point.z);
        Ok(Projection { pixel: self.matrix * point + self.offset, theta, valid: true })
    }

    fn jacobian(&self, _point: &Vector3<f64>) -> Option<Matrix2x3<f64>> {
        Some(self.matrix)
    }
}

/// Equidistant focal length mapping the half field of view onto the image
/// circle radius.
pub fn fov_to_focal(fov_deg: f64, image_radius_px: f64) -> Result<f64, CameraError> {
    if !(fov_deg > 0.0 && fov_deg <= 360.0) {
        return Err(CameraError::InvalidParameter(format!("field of view {fov_deg} deg not in (0, 360]")));
    }
    if !(image_radius_px > 0.0) || !image_radius_px.is_finite() {
        return Err(CameraError::InvalidParameter(format!("image radius {image_radius_px} must be positive")));
    }
    Ok(image_radius_px / (fov_deg / 2.0).to_radians())
}

fn radial_map(model: CameraModel, k: &[f64; 4], theta: f64) -> f64 {
    match model {
        CameraModel::Equidistant => theta,
        CameraModel::Pinhole => theta.tan(),
        CameraModel::Polynomial => {
            let t2 = theta * theta;
            theta * (1.0 + t2 * (k[0] + t2 * (k[1] + t2 * (k[2] + t2 * k[3]))))
        }
    }
}

fn radial_slope(model: CameraModel, k: &[f64; 4], theta: f64) -> f64 {
    match model {
        CameraModel::Equidistant => 1.0,
        CameraModel::Pinhole => {
            let c = theta.cos();
            1.0 / (c * c)
        }
        CameraModel::Polynomial => {
            let t2 = theta * theta;
            1.0 + t2 * (3.0 * k[0] + t2 * (5.0 * k[1] + t2 * (7.0 * k[2] + t2 * 9.0 * k[3])))
        }
    }
}

/// Largest angle up to pi on which the radial map stays strictly increasing.
fn monotone_limit(model: CameraModel, k: &[f64; 4]) -> f64 {
    let steps = MONOTONE_SAMPLES * 4;
    let mut prev = 0.0;
    for i in 1..=steps {
        let theta = PI * i as f64 / steps as f64;
        if !(radial_slope(model, k, theta) > 0.0) {
            return prev;
        }
        prev = theta;
    }
    PI
}

/// Solves `f(t) = target` for `t` in `[0, hi]` with `f` strictly increasing.
/// Newton steps are kept inside the bracket, falling back to bisection.
fn invert_increasing(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, target: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, hi);
    if target <= f(lo) {
        return lo;
    }
    if target >= f(hi) {
        return hi;
    }
    let mut t = target.clamp(lo, hi);
    for _ in 0..200 {
        let residual = f(t) - target;
        if residual == 0.0 {
            return t;
        }
        if residual > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let slope = df(t);
        let newton = t - residual / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - t).abs() < INVERSE_TOL || hi - lo < INVERSE_TOL {
            return next;
        }
        t = next;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn equi_400() -> FisheyeCamera {
        FisheyeCamera::equidistant(100.0, 100.0, 200.0, 200.0, 400, 400, 200.0).unwrap()
    }

    #[test]
    fn on_axis_point_maps_to_principal_point() {
        let p = equi_400().project(&Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!(p.valid);
        assert_eq!(p.pixel, Vector2::new(200.0, 200.0));
    }

    #[test]
    fn lateral_45_degrees() {
        let cam = FisheyeCamera::equidistant(100.0, 100.0, 200.0, 200.0, 400, 400, 200.0).unwrap();
        assert_abs_diff_eq!(cam.theta_max(), PI * 100.0 / 180.0, epsilon = 1e-15);
        let p = cam.project(&Vector3::new(1.0, 0.0, 1.0)).unwrap();
        assert!(p.valid);
        // 200 + 100 * pi / 4
        assert_abs_diff_eq!(p.pixel.x, 278.539_816_339_744_8, epsilon = 1e-9);
        assert_abs_diff_eq!(p.pixel.y, 200.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_polynomial_matches_equidistant() {
        let eq = equi_400();
        let poly = FisheyeCamera::new(CameraModel::Polynomial, 100.0, 100.0, 200.0, 200.0, [0.0; 4], 400, 400, 200.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let p = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let a = eq.project(&p).unwrap();
            let b = poly.project(&p).unwrap();
            assert!((a.pixel - b.pixel).norm() < 1e-12);
            assert_eq!(a.valid, b.valid);
        }
    }

    #[test]
    fn polynomial_radial_distance() {
        let cam = FisheyeCamera::new(CameraModel::Polynomial, 1.0, 1.0, 0.0, 0.0, [0.1, 0.0, 0.0, 0.0], 1, 1, 120.0).unwrap();
        assert_abs_diff_eq!(cam.radial_distance(0.5), 0.5125, epsilon = 1e-15);
        let p = cam.project(&Vector3::new(0.5_f64.sin(), 0.0, 0.5_f64.cos())).unwrap();
        assert_abs_diff_eq!(p.pixel.x, 0.5125, epsilon = 1e-12);
    }

    #[test]
    fn pinhole_is_tangent_and_limited() {
        let cam = FisheyeCamera::new(CameraModel::Pinhole, 50.0, 50.0, 100.0, 100.0, [0.0; 4], 200, 200, 150.0).unwrap();
        let p = cam.project(&Vector3::new(0.5, 0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(p.pixel.x, 125.0, epsilon = 1e-12);
        let behind = cam.project(&Vector3::new(1.0, 0.0, -0.1)).unwrap();
        assert!(!behind.valid);
        assert!(FisheyeCamera::new(CameraModel::Pinhole, 50.0, 50.0, 100.0, 100.0, [0.0; 4], 200, 200, 180.0).is_err());
    }

    #[test]
    fn rejects_bad_points() {
        let cam = equi_400();
        assert_eq!(cam.project(&Vector3::zeros()), Err(CameraError::DegeneratePoint));
        assert_eq!(cam.project(&Vector3::new(f64::NAN, 0.0, 1.0)), Err(CameraError::NonFinite));
        assert_eq!(cam.project(&Vector3::new(0.0, f64::INFINITY, 1.0)), Err(CameraError::NonFinite));
    }

    #[test]
    fn beyond_180_degrees_is_valid_within_theta_max() {
        let cam = FisheyeCamera::centered_equidistant(512, 200.0).unwrap();
        let theta: f64 = 1.74;
        assert!(theta > FRAC_PI_2 && theta < cam.theta_max());
        let p = cam.project(&Vector3::new(theta.sin(), 0.0, theta.cos())).unwrap();
        assert!(p.valid);
        let theta: f64 = cam.theta_max() + 1e-6;
        let p = cam.project(&Vector3::new(0.0, theta.sin(), theta.cos())).unwrap();
        assert!(!p.valid);
    }

    #[test]
    fn unproject_principal_point_and_lateral() {
        let cam = FisheyeCamera::equidistant(100.0, 100.0, 200.0, 200.0, 400, 400, 200.0).unwrap();
        let ray = cam.unproject(&Vector2::new(200.0, 200.0)).unwrap();
        assert_eq!(ray.direction, Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(ray.theta, 0.0);
        let ray = cam.unproject(&Vector2::new(200.0 + 100.0 * FRAC_PI_2, 200.0)).unwrap();
        assert_abs_diff_eq!(ray.theta, FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(ray.direction.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ray.direction.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ray.direction.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn unproject_errors() {
        let cam = FisheyeCamera::equidistant(100.0, 100.0, 200.0, 200.0, 400, 400, 120.0).unwrap();
        assert!(matches!(cam.unproject(&Vector2::new(399.0, 200.0)), Err(CameraError::OutOfFov { .. })));
        assert!(matches!(cam.unproject(&Vector2::new(400.0, 200.0)), Err(CameraError::OutOfImage { .. })));
    }

    #[test]
    fn unproject_round_trip_polynomial() {
        let cam = FisheyeCamera::new(
            CameraModel::Polynomial,
            410.0,
            405.0,
            511.5,
            508.25,
            [0.03, -0.004, 0.0007, -0.00005],
            1024,
            1024,
            200.0,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 1000 {
            let px = Vector2::new(rng.random_range(-0.5..1023.5), rng.random_range(-0.5..1023.5));
            let Ok(ray) = cam.unproject(&px) else { continue };
            assert_abs_diff_eq!(ray.direction.norm(), 1.0, epsilon = 1e-12);
            let p = cam.project(&(ray.direction * 3.7)).unwrap();
            assert!((p.pixel - px).norm() < 1e-8, "{px} -> {}", p.pixel);
            checked += 1;
        }
    }

    #[test]
    fn non_monotone_polynomial_is_rejected() {
        let err = FisheyeCamera::new(CameraModel::Polynomial, 100.0, 100.0, 50.0, 50.0, [-0.5, 0.0, 0.0, 0.0], 100, 100, 180.0)
            .unwrap_err();
        assert!(matches!(err, CameraError::NonMonotoneDistortion { .. }));
    }

    #[test]
    fn coefficient_mask_zeroes_selected_terms() {
        let cam =
            FisheyeCamera::new(CameraModel::Polynomial, 100.0, 100.0, 50.0, 50.0, [0.1, 0.01, 0.001, 0.0001], 100, 100, 180.0)
                .unwrap();
        let masked = cam.with_masked_coefficients([true, false, false, false]).unwrap();
        assert_eq!(masked.k(), [0.0, 0.01, 0.001, 0.0001]);
        assert_eq!(masked.fx(), cam.fx());
    }

    #[test]
    fn fov_to_focal_values() {
        assert_abs_diff_eq!(fov_to_focal(200.0, 1632.0).unwrap(), 935.0671, epsilon = 1e-4);
        assert_abs_diff_eq!(fov_to_focal(180.0, PI).unwrap(), 2.0, epsilon = 1e-15);
        let a = fov_to_focal(160.0, 300.0).unwrap();
        let b = fov_to_focal(160.0, 600.0).unwrap();
        assert_abs_diff_eq!(b, 2.0 * a, epsilon = 1e-12);
        assert!(fov_to_focal(0.0, 10.0).is_err());
        assert!(fov_to_focal(361.0, 10.0).is_err());
        assert!(fov_to_focal(90.0, 0.0).is_err());
    }

    #[test]
    fn construction_invariants() {
        assert!(FisheyeCamera::equidistant(0.0, 1.0, 1.0, 1.0, 4, 4, 90.0).is_err());
        assert!(FisheyeCamera::equidistant(1.0, 1.0, 4.0, 1.0, 4, 4, 90.0).is_err());
        assert!(FisheyeCamera::equidistant(1.0, 1.0, 1.0, 1.0, 4, 4, 361.0).is_err());
        assert!(FisheyeCamera::new(CameraModel::Equidistant, 1.0, 1.0, 1.0, 1.0, [0.1, 0.0, 0.0, 0.0], 4, 4, 90.0).is_err());
    }

    #[test]
    fn derived_fov_matches_inscribed_circle() {
        let cam = FisheyeCamera::centered_equidistant(3264, 200.0).unwrap();
        let derived = FisheyeCamera::with_derived_fov(
            CameraModel::Polynomial,
            cam.fx(),
            cam.fy(),
            cam.cx(),
            cam.cy(),
            [0.0; 4],
            3264,
            3264,
        )
        .unwrap();
        assert_abs_diff_eq!(derived.fov_deg(), 200.0, epsilon = 1e-9);
    }

    #[test]
    fn text_block_round_trip() {
        let cam = FisheyeCamera::new(
            CameraModel::Polynomial,
            935.069,
            934.5,
            1631.5,
            1630.25,
            [0.01, -0.002, 0.0003, -1e-5],
            3264,
            3264,
            200.0,
        )
        .unwrap();
        let parsed: FisheyeCamera = cam.to_text_block().parse().unwrap();
        assert_eq!(parsed, cam);
    }

    #[test]
    fn text_block_errors() {
        let err = FisheyeCamera::parse_text_block("model = FOO\n").unwrap_err();
        assert!(matches!(err, CameraError::Parse { line: 1, .. }));
        let err = FisheyeCamera::parse_text_block("model = EQUIDISTANT\nfx = abc\n").unwrap_err();
        assert!(matches!(err, CameraError::Parse { line: 2, .. }));
        let err = FisheyeCamera::parse_text_block("model = EQUIDISTANT\nfx = 1\n").unwrap_err();
        assert!(err.to_string().contains("missing"));
    }

    #[test]
    fn jacobian_pinhole_matches_classical_form() {
        let cam = FisheyeCamera::new(CameraModel::Pinhole, 300.0, 280.0, 200.0, 150.0, [0.0; 4], 400, 300, 120.0).unwrap();
        let (x, y) = (0.2, -0.1);
        let j = cam.projection_jacobian(&Vector3::new(x, y, 1.0)).unwrap();
        let expected = Matrix2x3::new(300.0, 0.0, -300.0 * x, 0.0, 280.0, -280.0 * y);
        assert!((j - expected).norm() < 1e-9, "{j}");
    }

    #[test]
    fn guard_band_widens_validity_only() {
        let cam = FisheyeCamera::centered_equidistant(201, 160.0).unwrap();
        let band = cam.guard_band(10f64.to_radians());
        assert!((band.theta_limit() - 90f64.to_radians()).abs() < 1e-12);
        let t = 85f64.to_radians();
        let p = Vector3::new(t.sin(), 0.0, t.cos());
        let raw = cam.project(&p).unwrap();
        let wide = band.project_point(&p).unwrap();
        assert!(!raw.valid && wide.valid);
        assert_eq!(raw.pixel, wide.pixel);
        let t = 95f64.to_radians();
        assert!(!band.project_point(&Vector3::new(t.sin(), 0.0, t.cos())).unwrap().valid);
        // capped inside the model's monotone domain
        let pin = FisheyeCamera::new(CameraModel::Pinhole, 100.0, 100.0, 100.0, 100.0, [0.0; 4], 201, 201, 170.0).unwrap();
        let limit = pin.guard_band(1.0).theta_limit();
        assert!(limit < FRAC_PI_2 && limit >= pin.theta_max());
        assert_eq!(cam.guard_band(-1.0).theta_limit(), cam.theta_max());
    }

    #[test]
    fn jacobian_on_axis_is_focal_over_depth() {
        let j = equi_400().projection_jacobian(&Vector3::new(0.0, 0.0, 2.0)).unwrap();
        assert_abs_diff_eq!(j[(0, 0)], 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(j[(1, 1)], 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(j[(0, 2)], 0.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn projection_is_radially_symmetric(theta in 0.01f64..1.7, phi in 0.0f64..std::f64::consts::TAU, rot in 0.0f64..std::f64::consts::TAU, dist in 0.5f64..20.0) {
            let cam = FisheyeCamera::new(CameraModel::Polynomial, 150.0, 150.0, 255.5, 255.5, [0.02, -0.003, 0.0, 0.0], 512, 512, 200.0).unwrap();
            let p = dist * Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            let q = dist * Vector3::new(theta.sin() * (phi + rot).cos(), theta.sin() * (phi + rot).sin(), theta.cos());
            let a = cam.project(&p).unwrap().pixel - Vector2::new(255.5, 255.5);
            let b = cam.project(&q).unwrap().pixel - Vector2::new(255.5, 255.5);
            let (c, s) = (rot.cos(), rot.sin());
            let rotated = Vector2::new(c * a.x - s * a.y, s * a.x + c * a.y);
            prop_assert!((rotated - b).norm() < 1e-10);
        }

        #[test]
        fn unproject_project_round_trip(u in -0.5f64..511.4, v in -0.5f64..511.4) {
            let cam = FisheyeCamera::centered_equidistant(512, 200.0).unwrap();
            let px = Vector2::new(u, v);
            if let Ok(ray) = cam.unproject(&px) {
                let p = cam.project(&ray.direction).unwrap();
                prop_assert!(p.valid);
                prop_assert!((p.pixel - px).norm() < 1e-8);
            }
        }
    }
}
