//! COLMAP text models (`cameras.txt`, `images.txt`, `points3D.txt`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

use crate::camera::{CameraError, CameraModel, FisheyeCamera};
use crate::depth_init::{Frame, PointCloud};
use crate::geometry::Pose;

#[derive(Debug, Error)]
pub enum ColmapError {
    #[error("missing model file {0}")]
    MissingFile(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: unknown camera model '{model}'")]
    UnknownModel { file: String, line: usize, model: String },
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("image {image} references unknown camera {camera_id}")]
    UnknownCamera { image: String, camera_id: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub image_id: u32,
    pub camera_id: u32,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseModel {
    pub cameras: BTreeMap<u32, FisheyeCamera>,
    pub images: Vec<ImageRecord>,
    pub points: PointCloud,
}

impl SparseModel {
    pub fn empty() -> Self {
        SparseModel {
            cameras: BTreeMap::new(),
            images: Vec::new(),
            points: PointCloud { positions: Vec::new(), colors: Some(Vec::new()), frame: Frame::Colmap },
        }
    }

    pub fn image(&self, name: &str) -> Option<&ImageRecord> {
        self.images.iter().find(|r| r.pose.image_name == name)
    }

    pub fn camera_for(&self, record: &ImageRecord) -> Option<&FisheyeCamera> {
        self.cameras.get(&record.camera_id)
    }

    pub fn image_names(&self) -> Vec<&str> {
        self.images.iter().map(|r| r.pose.image_name.as_str()).collect()
    }
}

pub fn read_colmap_text(dir: impl AsRef<Path>) -> Result<SparseModel, ColmapError> {
    let dir = dir.as_ref();
    let cameras = parse_cameras(&read_model_file(dir, "cameras.txt")?)?;
    let images = parse_images(&read_model_file(dir, "images.txt")?)?;
    let points = parse_points(&read_model_file(dir, "points3D.txt")?)?;
    for record in &images {
        if !cameras.contains_key(&record.camera_id) {
            return Err(ColmapError::UnknownCamera { image: record.pose.image_name.clone(), camera_id: record.camera_id });
        }
    }
    Ok(SparseModel { cameras, images, points })
}

/// Writes the three model files. Equidistant cameras are written as
/// `OPENCV_FISHEYE` with zero coefficients.
pub fn write_colmap_text(model: &SparseModel, dir: impl AsRef<Path>) -> Result<(), ColmapError> {
    let dir = dir.as_ref();
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| ColmapError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    for (name, text) in
        [("cameras.txt", format_cameras(model)), ("images.txt", format_images(model)), ("points3D.txt", format_points(model))]
    {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io(&path))?;
    }
    Ok(())
}

fn read_model_file(dir: &Path, name: &str) -> Result<String, ColmapError> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(ColmapError::MissingFile(path.display().to_string()));
    }
    fs::read_to_string(&path).map_err(|source| ColmapError::Io { path: path.display().to_string(), source })
}

fn parse_error(file: &str, line: usize, message: impl Into<String>) -> ColmapError {
    ColmapError::Parse { file: file.to_string(), line, message: message.into() }
}

fn field<T: std::str::FromStr>(file: &str, line: usize, what: &str, token: Option<&str>) -> Result<T, ColmapError> {
    let token = token.ok_or_else(|| parse_error(file, line, format!("missing {what}")))?;
    token.parse().map_err(|_| parse_error(file, line, format!("invalid {what} '{token}'")))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim_start().starts_with('#'))
}

fn parse_cameras(text: &str) -> Result<BTreeMap<u32, FisheyeCamera>, ColmapError> {
    const FILE: &str = "cameras.txt";
    let mut cameras = BTreeMap::new();
    for (line, raw) in data_lines(text) {
        let mut tok = raw.split_whitespace();
        let Some(first) = tok.next() else { continue };
        let id: u32 = field(FILE, line, "camera id", Some(first))?;
        let model_name: String = field(FILE, line, "model", tok.next())?;
        let width: u32 = field(FILE, line, "width", tok.next())?;
        let height: u32 = field(FILE, line, "height", tok.next())?;
        let params = tok
            .map(|t| t.parse::<f64>().map_err(|_| parse_error(FILE, line, format!("invalid parameter '{t}'"))))
            .collect::<Result<Vec<f64>, _>>()?;
        let (model, expected) = match model_name.as_str() {
            "OPENCV_FISHEYE" => (CameraModel::Polynomial, 8),
            "PINHOLE" => (CameraModel::Pinhole, 4),
            _ => return Err(ColmapError::UnknownModel { file: FILE.into(), line, model: model_name }),
        };
        if params.len() != expected {
            return Err(parse_error(FILE, line, format!("{model_name} expects {expected} parameters, found {}", params.len())));
        }
        let k = if expected == 8 { [params[4], params[5], params[6], params[7]] } else { [0.0; 4] };
        let cam = FisheyeCamera::with_derived_fov(model, params[0], params[1], params[2], params[3], k, width, height)
            .map_err(|e: CameraError| parse_error(FILE, line, e.to_string()))?;
        if cameras.insert(id, cam).is_some() {
            return Err(parse_error(FILE, line, format!("duplicate camera id {id}")));
        }
    }
    Ok(cameras)
}

fn parse_images(text: &str) -> Result<Vec<ImageRecord>, ColmapError> {
    const FILE: &str = "images.txt";
    let mut images = Vec::new();
    let mut lines = data_lines(text);
    while let Some((line, raw)) = lines.next() {
        if raw.trim().is_empty() {
            continue;
        }
        let mut tok = raw.trim().splitn(10, char::is_whitespace);
        let image_id: u32 = field(FILE, line, "image id", tok.next())?;
        let mut q = [0.0; 4];
        for (i, v) in q.iter_mut().enumerate() {
            *v = field(FILE, line, ["QW", "QX", "QY", "QZ"][i], tok.next())?;
        }
        let mut t = Vector3::zeros();
        for i in 0..3 {
            t[i] = field(FILE, line, ["TX", "TY", "TZ"][i], tok.next())?;
        }
        let camera_id: u32 = field(FILE, line, "camera id", tok.next())?;
        let name =
            tok.next().map(str::trim).filter(|n| !n.is_empty()).ok_or_else(|| parse_error(FILE, line, "missing image name"))?;
        // second line holds the 2D observations, which are not needed
        if lines.next().is_none() {
            return Err(parse_error(FILE, line, "missing observation line"));
        }
        let pose = Pose::new(q, t, name).map_err(|e| parse_error(FILE, line, e.to_string()))?;
        images.push(ImageRecord { image_id, camera_id, pose });
    }
    Ok(images)
}

fn parse_points(text: &str) -> Result<PointCloud, ColmapError> {
    const FILE: &str = "points3D.txt";
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    for (line, raw) in data_lines(text) {
        let mut tok = raw.split_whitespace();
        let Some(first) = tok.next() else { continue };
        let _id: u64 = field(FILE, line, "point id", Some(first))?;
        let x: f64 = field(FILE, line, "X", tok.next())?;
        let y: f64 = field(FILE, line, "Y", tok.next())?;
        let z: f64 = field(FILE, line, "Z", tok.next())?;
        let r: u8 = field(FILE, line, "R", tok.next())?;
        let g: u8 = field(FILE, line, "G", tok.next())?;
        let b: u8 = field(FILE, line, "B", tok.next())?;
        let _error: f64 = field(FILE, line, "error", tok.next())?;
        if tok.count() % 2 != 0 {
            return Err(parse_error(FILE, line, "track must hold (image id, point2d index) pairs"));
        }
        if ![x, y, z].iter().all(|v| v.is_finite()) {
            return Err(parse_error(FILE, line, "non-finite point"));
        }
        positions.push(Vector3::new(x, y, z));
        colors.push([r, g, b]);
    }
    Ok(PointCloud { positions, colors: Some(colors), frame: Frame::Colmap })
}

fn format_cameras(model: &SparseModel) -> String {
    let mut s = String::from("# Camera list with one line of data per camera:\n#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n");
    let _ = writeln!(s, "# Number of cameras: {}", model.cameras.len());
    for (id, cam) in &model.cameras {
        let mut params = vec![cam.fx(), cam.fy(), cam.cx(), cam.cy()];
        let name = match cam.model() {
            CameraModel::Pinhole => "PINHOLE",
            CameraModel::Equidistant | CameraModel::Polynomial => {
                params.extend(cam.k());
                "OPENCV_FISHEYE"
            }
        };
        let _ = write!(s, "{id} {name} {} {}", cam.width(), cam.height());
        for p in params {
            let _ = write!(s, " {p}");
        }
        s.push('\n');
    }
    s
}

fn format_images(model: &SparseModel) -> String {
    let mut s = String::from(
        "# Image list with two lines of data per image:\n#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n#   POINTS2D[] as (X, Y, POINT3D_ID)\n",
    );
    let _ = writeln!(s, "# Number of images: {}, mean observations per image: 0", model.images.len());
    for r in &model.images {
        let (q, t) = (&r.pose.q, &r.pose.t);
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {} {} {}\n",
            r.image_id, q[0], q[1], q[2], q[3], t.x, t.y, t.z, r.camera_id, r.pose.image_name
        );
    }
    s
}

fn format_points(model: &SparseModel) -> String {
    let mut s = String::from(
        "# 3D point list with one line of data per point:\n#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n",
    );
    let _ = writeln!(s, "# Number of points: {}, mean track length: 0", model.points.len());
    for (i, p) in model.points.positions.iter().enumerate() {
        let c = model.points.colors.as_ref().map_or([0, 0, 0], |c| c[i]);
        let _ = writeln!(s, "{} {} {} {} {} {} {} 0", i + 1, p.x, p.y, p.z, c[0], c[1], c[2]);
    }
    s
}
