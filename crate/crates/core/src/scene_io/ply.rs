//! PLY point clouds and Gaussian sets (`ascii 1.0` and `binary_little_endian 1.0`).
//!
//! Only files with a single `vertex` element of scalar properties are
//! accepted; list properties (mesh faces) are rejected.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::depth_init::{Frame, PointCloud};
use crate::splat::Gaussian3D;

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("ply header: {0}")]
    Header(String),
    #[error("unsupported ply layout: {0}")]
    Unsupported(String),
    #[error("missing vertex property '{0}'")]
    MissingProperty(String),
    #[error("truncated ply body: {0}")]
    Truncated(String),
    #[error("ply body: {0}")]
    Body(String),
    #[error("invalid gaussian {index}: {message}")]
    InvalidGaussian { index: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => f64::from(b[0] as i8),
            Scalar::U8 => f64::from(b[0]),
            Scalar::I16 => f64::from(i16::from_le_bytes([b[0], b[1]])),
            Scalar::U16 => f64::from(u16::from_le_bytes([b[0], b[1]])),
            Scalar::I32 => f64::from(i32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Scalar::U32 => f64::from(u32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Scalar::F32 => f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }

    fn parse_ascii(self, token: &str) -> Option<f64> {
        match self {
            Scalar::F32 => token.parse::<f32>().ok().map(f64::from),
            Scalar::F64 => token.parse::<f64>().ok(),
            Scalar::I8 => token.parse::<i8>().ok().map(f64::from),
            Scalar::U8 => token.parse::<u8>().ok().map(f64::from),
            Scalar::I16 => token.parse::<i16>().ok().map(f64::from),
            Scalar::U16 => token.parse::<u16>().ok().map(f64::from),
            Scalar::I32 => token.parse::<i32>().ok().map(f64::from),
            Scalar::U32 => token.parse::<u32>().ok().map(f64::from),
        }
    }
}

/// Parsed vertex element, stored column-wise.
struct VertexTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl VertexTable {
    fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    fn require(&self, name: &str) -> Result<&[f64], PlyError> {
        self.column(name).ok_or_else(|| PlyError::MissingProperty(name.to_string()))
    }

    fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

fn parse_ply(bytes: &[u8]) -> Result<VertexTable, PlyError> {
    const END: &[u8] = b"end_header";
    let header_end =
        bytes.windows(END.len()).position(|w| w == END).ok_or_else(|| PlyError::Header("missing end_header".into()))?;
    let mut body_start = header_end + END.len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) != Some(&b'\n') {
        return Err(PlyError::Header("end_header must end its line".into()));
    }
    body_start += 1;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| PlyError::Header("header is not utf-8".into()))?;

    let mut lines = header.lines().map(str::trim);
    if lines.next() != Some("ply") {
        return Err(PlyError::Header("missing 'ply' magic".into()));
    }
    let mut encoding = None;
    let mut vertex_count: Option<usize> = None;
    let mut props: Vec<(String, Scalar)> = Vec::new();
    let mut in_vertex = false;
    for line in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, version] => {
                if *version != "1.0" {
                    return Err(PlyError::Unsupported(format!("format version {version}")));
                }
                encoding = Some(match *fmt {
                    "ascii" => PlyEncoding::Ascii,
                    "binary_little_endian" => PlyEncoding::BinaryLittleEndian,
                    other => return Err(PlyError::Unsupported(format!("format {other}"))),
                });
            }
            ["element", name, count] => {
                if *name != "vertex" || vertex_count.is_some() {
                    return Err(PlyError::Unsupported(format!("element '{name}'")));
                }
                vertex_count = Some(count.parse().map_err(|_| PlyError::Header(format!("bad element count '{count}'")))?);
                in_vertex = true;
            }
            ["property", "list", ..] => return Err(PlyError::Unsupported("list properties".into())),
            ["property", ty, name] => {
                if !in_vertex {
                    return Err(PlyError::Header("property before element".into()));
                }
                let ty = Scalar::parse(ty).ok_or_else(|| PlyError::Header(format!("unknown property type '{ty}'")))?;
                props.push((name.to_string(), ty));
            }
            _ => return Err(PlyError::Header(format!("unrecognized line '{line}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| PlyError::Header("missing format line".into()))?;
    let count = vertex_count.ok_or_else(|| PlyError::Unsupported("no vertex element".into()))?;
    let body = &bytes[body_start..];
    let mut columns: Vec<Vec<f64>> = props.iter().map(|_| Vec::with_capacity(count)).collect();

    match encoding {
        PlyEncoding::BinaryLittleEndian => {
            let stride: usize = props.iter().map(|(_, t)| t.size()).sum();
            let needed = stride * count;
            if body.len() < needed {
                return Err(PlyError::Truncated(format!("expected {needed} bytes, found {}", body.len())));
            }
            if body.len() > needed {
                return Err(PlyError::Body(format!("{} trailing bytes", body.len() - needed)));
            }
            for record in body.chunks_exact(stride.max(1)).take(count) {
                let mut offset = 0;
                for ((_, ty), col) in props.iter().zip(columns.iter_mut()) {
                    col.push(ty.read_le(&record[offset..]));
                    offset += ty.size();
                }
            }
        }
        PlyEncoding::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| PlyError::Body("ascii body is not utf-8".into()))?;
            let mut rows = text.lines().filter(|l| !l.trim().is_empty());
            for i in 0..count {
                let row = rows.next().ok_or_else(|| PlyError::Truncated(format!("expected {count} vertices, found {i}")))?;
                let tokens: Vec<&str> = row.split_whitespace().collect();
                if tokens.len() != props.len() {
                    return Err(PlyError::Body(format!("vertex {i} has {} values, expected {}", tokens.len(), props.len())));
                }
                for ((tok, (name, ty)), col) in tokens.iter().zip(&props).zip(columns.iter_mut()) {
                    let v = ty
                        .parse_ascii(tok)
                        .ok_or_else(|| PlyError::Body(format!("vertex {i}: bad value '{tok}' for '{name}'")))?;
                    col.push(v);
                }
            }
            if rows.next().is_some() {
                return Err(PlyError::Body("data after the last vertex".into()));
            }
        }
    }
    Ok(VertexTable { names: props.into_iter().map(|(n, _)| n).collect(), columns })
}

fn header(encoding: PlyEncoding, count: usize, props: &[(&str, &str)]) -> String {
    let fmt = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLittleEndian => "binary_little_endian",
    };
    let mut h = format!("ply\nformat {fmt} 1.0\nelement vertex {count}\n");
    for (ty, name) in props {
        h.push_str(&format!("property {ty} {name}\n"));
    }
    h.push_str("end_header\n");
    h
}

/// Serializes positions as 32-bit floats and colors as 8-bit channels.
pub fn write_ply_bytes(cloud: &PointCloud, encoding: PlyEncoding) -> Vec<u8> {
    let mut props = vec![("float", "x"), ("float", "y"), ("float", "z")];
    if cloud.colors.is_some() {
        props.extend([("uchar", "red"), ("uchar", "green"), ("uchar", "blue")]);
    }
    let mut out = header(encoding, cloud.len(), &props).into_bytes();
    for (i, p) in cloud.positions.iter().enumerate() {
        let xyz = [p.x as f32, p.y as f32, p.z as f32];
        let rgb = cloud.colors.as_ref().map(|c| c[i]);
        match encoding {
            PlyEncoding::BinaryLittleEndian => {
                for v in xyz {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                if let Some(rgb) = rgb {
                    out.extend_from_slice(&rgb);
                }
            }
            PlyEncoding::Ascii => {
                let mut line = format!("{} {} {}", xyz[0], xyz[1], xyz[2]);
                if let Some(rgb) = rgb {
                    line.push_str(&format!(" {} {} {}", rgb[0], rgb[1], rgb[2]));
                }
                line.push('\n');
                out.extend_from_slice(line.as_bytes());
            }
        }
    }
    out
}

/// Parses a point cloud; colors are read when `red`, `green` and `blue` are all present.
pub fn read_ply_bytes(bytes: &[u8]) -> Result<PointCloud, PlyError> {
    let table = parse_ply(bytes)?;
    let (x, y, z) = (table.require("x")?, table.require("y")?, table.require("z")?);
    let positions: Vec<Vector3<f64>> = (0..table.len()).map(|i| Vector3::new(x[i], y[i], z[i])).collect();
    if positions.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(PlyError::Body("non-finite vertex position".into()));
    }
    let colors = match (table.column("red"), table.column("green"), table.column("blue")) {
        (Some(r), Some(g), Some(b)) => Some(
            (0..table.len())
                .map(|i| [r[i].clamp(0.0, 255.0) as u8, g[i].clamp(0.0, 255.0) as u8, b[i].clamp(0.0, 255.0) as u8])
                .collect(),
        ),
        (None, None, None) => None,
        _ => return Err(PlyError::Unsupported("partial color properties".into())),
    };
    Ok(PointCloud { positions, colors, frame: Frame::Colmap })
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PointCloud, PlyError> {
    read_ply_bytes(&read_file(path.as_ref())?)
}

pub fn write_ply(path: impl AsRef<Path>, cloud: &PointCloud, encoding: PlyEncoding) -> Result<(), PlyError> {
    write_file(path.as_ref(), &write_ply_bytes(cloud, encoding))
}

const GAUSSIAN_PROPS: [&str; 14] =
    ["x", "y", "z", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3", "opacity", "red", "green", "blue"];

/// Gaussian sets as binary PLY with float properties
/// `x y z scale_0..2 rot_0..3 opacity red green blue`. Scales are standard
/// deviations, `rot_0` is the quaternion's scalar part, colors are in `[0, 1]`.
pub fn write_gaussians_ply(path: impl AsRef<Path>, gaussians: &[Gaussian3D]) -> Result<(), PlyError> {
    let props: Vec<(&str, &str)> = GAUSSIAN_PROPS.iter().map(|n| ("float", *n)).collect();
    let mut out = header(PlyEncoding::BinaryLittleEndian, gaussians.len(), &props).into_bytes();
    for g in gaussians {
        let q = g.rotation.quaternion();
        let values = [
            g.mean.x, g.mean.y, g.mean.z, g.scale.x, g.scale.y, g.scale.z, q.w, q.i, q.j, q.k, g.opacity, g.color[0], g.color[1],
            g.color[2],
        ];
        for v in values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    write_file(path.as_ref(), &out)
}

pub fn read_gaussians_ply(path: impl AsRef<Path>) -> Result<Vec<Gaussian3D>, PlyError> {
    let table = parse_ply(&read_file(path.as_ref())?)?;
    let cols = GAUSSIAN_PROPS.iter().map(|n| table.require(n)).collect::<Result<Vec<_>, _>>()?;
    (0..table.len())
        .map(|i| {
            let v = |k: usize| cols[k][i];
            let q = Quaternion::new(v(6), v(7), v(8), v(9));
            if !(q.norm() > 0.0) {
                return Err(PlyError::InvalidGaussian { index: i, message: "zero rotation quaternion".into() });
            }
            Gaussian3D::new(
                Vector3::new(v(0), v(1), v(2)),
                Vector3::new(v(3), v(4), v(5)),
                UnitQuaternion::from_quaternion(q),
                v(10),
                [v(11), v(12), v(13)],
            )
            .map_err(|e| PlyError::InvalidGaussian { index: i, message: e.to_string() })
        })
        .collect()
}

fn read_file(path: &Path) -> Result<Vec<u8>, PlyError> {
    fs::read(path).map_err(|source| PlyError::Io { path: path.display().to_string(), source })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PlyError> {
    let io = |source| PlyError::Io { path: path.display().to_string(), source };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, colors: bool, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud {
            positions: (0..n)
                .map(|_| {
                    Vector3::new(
                        f64::from(rng.random_range(-100.0f32..100.0)),
                        f64::from(rng.random_range(-100.0f32..100.0)),
                        f64::from(rng.random::<f32>() * 1e-6),
                    )
                })
                .collect(),
            colors: colors.then(|| (0..n).map(|_| rng.random()).collect()),
            frame: Frame::Colmap,
        }
    }

    #[test]
    fn empty_cloud_round_trips() {
        for enc in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
            let cloud = PointCloud::empty(Frame::Colmap);
            assert_eq!(read_ply_bytes(&write_ply_bytes(&cloud, enc)).unwrap(), cloud);
        }
    }

    #[test]
    fn random_clouds_round_trip_bit_exact() {
        let cloud = random_cloud(10_000, true, 1);
        let bin = read_ply_bytes(&write_ply_bytes(&cloud, PlyEncoding::BinaryLittleEndian)).unwrap();
        let ascii = read_ply_bytes(&write_ply_bytes(&cloud, PlyEncoding::Ascii)).unwrap();
        assert_eq!(bin, cloud);
        assert_eq!(ascii, bin);
        let plain = random_cloud(100, false, 2);
        assert_eq!(read_ply_bytes(&write_ply_bytes(&plain, PlyEncoding::Ascii)).unwrap(), plain);
    }

    #[test]
    fn header_is_standard() {
        let cloud = random_cloud(1, true, 3);
        let bytes = write_ply_bytes(&cloud, PlyEncoding::BinaryLittleEndian);
        let text = String::from_utf8_lossy(&bytes[..bytes.len() - 15]);
        assert!(text.starts_with("ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\n"));
        assert!(text.ends_with("property uchar blue\nend_header\n"));
    }

    #[test]
    fn double_positions_and_extra_properties_are_read() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\ncomment test\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nproperty float nx\nend_header\n".to_vec();
        for v in [1.5f64, -2.0, 3.25] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&0.0f32.to_le_bytes());
        let cloud = read_ply_bytes(&bytes).unwrap();
        assert_eq!(cloud.positions, vec![Vector3::new(1.5, -2.0, 3.25)]);
        assert!(cloud.colors.is_none());
    }

    #[test]
    fn rejects_unsupported_and_truncated() {
        let face = b"ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n";
        assert!(matches!(read_ply_bytes(face), Err(PlyError::Unsupported(_))));
        let be = b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\nend_header\n";
        assert!(matches!(read_ply_bytes(be), Err(PlyError::Unsupported(_))));
        let bytes = write_ply_bytes(&random_cloud(3, true, 4), PlyEncoding::BinaryLittleEndian);
        assert!(matches!(read_ply_bytes(&bytes[..bytes.len() - 2]), Err(PlyError::Truncated(_))));
        let bytes = write_ply_bytes(&random_cloud(3, true, 4), PlyEncoding::Ascii);
        let text = String::from_utf8(bytes).unwrap();
        let cut = text.trim_end().rsplit_once('\n').unwrap().0;
        assert!(matches!(read_ply_bytes(cut.as_bytes()), Err(PlyError::Truncated(_))));
        let no_xyz = b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n";
        assert!(matches!(read_ply_bytes(no_xyz), Err(PlyError::MissingProperty(_))));
        assert!(matches!(read_ply_bytes(b"ply\nformat ascii 1.0\n"), Err(PlyError::Header(_))));
    }

    #[test]
    fn gaussians_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.ply");
        let g = Gaussian3D::new(
            Vector3::new(1.0, 2.0, 3.0),
            Vector3::new(0.5, 0.25, 0.125),
            UnitQuaternion::from_quaternion(Quaternion::new(1.0, 0.0, 0.0, 0.0)),
            0.75,
            [0.5, 0.25, 1.0],
        )
        .unwrap();
        write_gaussians_ply(&path, &[g.clone(), g.clone()]).unwrap();
        let back = read_gaussians_ply(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].mean, g.mean);
        assert_eq!(back[0].scale, g.scale);
        assert_eq!(back[0].opacity, g.opacity);
        write_gaussians_ply(&path, &[]).unwrap();
        assert!(read_gaussians_ply(&path).unwrap().is_empty());
    }
}
