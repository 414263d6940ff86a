//! FDG1 raw depth grids.
//!
//! Layout, all little-endian: magic `FDG1`, `u32` width, `u32` height,
//! `u8` has_rays, `width * height` `f32` depths (row-major, NaN = invalid),
//! then, if has_rays, `width * height * 3` `f32` unit ray directions.

use std::fs;
use std::path::Path;

use thiserror::Error;

const MAGIC: &[u8; 4] = b"FDG1";
const HEADER_LEN: usize = 13;

#[derive(Debug, Error)]
pub enum DepthGridError {
    #[error("bad magic, expected FDG1")]
    BadMagic,
    #[error("truncated depth grid: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("invalid depth grid: {0}")]
    Invalid(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Per-pixel distance along the pixel ray, with optional stored ray directions.
#[derive(Debug, Clone)]
pub struct DepthGrid {
    width: u32,
    height: u32,
    values: Vec<f32>,
    rays: Option<Vec<[f32; 3]>>,
}

impl DepthGrid {
    pub fn new(width: u32, height: u32, values: Vec<f32>, rays: Option<Vec<[f32; 3]>>) -> Result<Self, DepthGridError> {
        let n = width as usize * height as usize;
        if values.len() != n {
            return Err(DepthGridError::Invalid(format!("{} depths for {width}x{height}", values.len())));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_nan() && !(v.is_finite() && **v > 0.0)) {
            return Err(DepthGridError::Invalid(format!("depth {bad} is neither positive nor NaN")));
        }
        if let Some(rays) = &rays {
            if rays.len() != n {
                return Err(DepthGridError::Invalid(format!("{} rays for {width}x{height}", rays.len())));
            }
            for (r, d) in rays.iter().zip(&values) {
                if d.is_nan() && r.iter().any(|v| v.is_nan()) {
                    continue;
                }
                let norm = r.iter().map(|v| f64::from(*v).powi(2)).sum::<f64>().sqrt();
                if !((norm - 1.0).abs() <= 1e-6) {
                    return Err(DepthGridError::Invalid(format!("ray norm {norm} is not 1")));
                }
            }
        }
        Ok(DepthGrid { width, height, values, rays })
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn values(&self) -> &[f32] {
        &self.values
    }
    pub fn rays(&self) -> Option<&[[f32; 3]]> {
        self.rays.as_deref()
    }
    pub fn value(&self, x: u32, y: u32) -> f32 {
        self.values[y as usize * self.width as usize + x as usize]
    }
    pub fn ray(&self, x: u32, y: u32) -> Option<[f32; 3]> {
        self.rays.as_ref().map(|r| r[y as usize * self.width as usize + x as usize])
    }

    /// Bitwise equality, so NaN holes compare equal to themselves.
    pub fn bit_eq(&self, other: &DepthGrid) -> bool {
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        self.width == other.width
            && self.height == other.height
            && bits(&self.values) == bits(&other.values)
            && match (&self.rays, &other.rays) {
                (None, None) => true,
                (Some(a), Some(b)) => bits(a.as_flattened()) == bits(b.as_flattened()),
                _ => false,
            }
    }
}

pub fn encode_depth_grid(grid: &DepthGrid) -> Vec<u8> {
    let n = grid.values.len();
    let ray_floats = grid.rays.as_ref().map_or(0, |r| r.len() * 3);
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * (n + ray_floats));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&grid.width.to_le_bytes());
    out.extend_from_slice(&grid.height.to_le_bytes());
    out.push(u8::from(grid.rays.is_some()));
    for v in &grid.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(rays) = &grid.rays {
        for v in rays.as_flattened() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_depth_grid(bytes: &[u8]) -> Result<DepthGrid, DepthGridError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(DepthGridError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(DepthGridError::Truncated { expected: HEADER_LEN, found: bytes.len() });
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let height = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    let has_rays = match bytes[12] {
        0 => false,
        1 => true,
        other => return Err(DepthGridError::Invalid(format!("has_rays flag {other}"))),
    };
    let n = width as usize * height as usize;
    let floats = if has_rays { n * 4 } else { n };
    let expected = HEADER_LEN + 4 * floats;
    if bytes.len() < expected {
        return Err(DepthGridError::Truncated { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(DepthGridError::TrailingBytes(bytes.len() - expected));
    }
    let mut payload = bytes[HEADER_LEN..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
    let values: Vec<f32> = payload.by_ref().take(n).collect();
    let rays = has_rays.then(|| {
        let flat: Vec<f32> = payload.collect();
        flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
    });
    DepthGrid::new(width, height, values, rays)
}

pub fn read_depth_grid(path: impl AsRef<Path>) -> Result<DepthGrid, DepthGridError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| DepthGridError::Io { path: path.display().to_string(), source })?;
    decode_depth_grid(&bytes)
}

pub fn write_depth_grid(path: impl AsRef<Path>, grid: &DepthGrid) -> Result<(), DepthGridError> {
    let path = path.as_ref();
    fs::write(path, encode_depth_grid(grid)).map_err(|source| DepthGridError::Io { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_grid_round_trip() {
        let grid = DepthGrid::new(2, 2, vec![1.0; 4], None).unwrap();
        let back = decode_depth_grid(&encode_depth_grid(&grid)).unwrap();
        assert!(back.bit_eq(&grid));
    }

    #[test]
    fn nan_hole_is_preserved() {
        let grid = DepthGrid::new(2, 2, vec![1.0, f32::NAN, 2.5, 3.0], None).unwrap();
        let back = decode_depth_grid(&encode_depth_grid(&grid)).unwrap();
        assert!(back.value(1, 0).is_nan());
        assert!(back.bit_eq(&grid));
    }

    #[test]
    fn header_layout() {
        let grid = DepthGrid::new(3, 1, vec![1.0, 2.0, 3.0], Some(vec![[0.0, 0.0, 1.0]; 3])).unwrap();
        let bytes = encode_depth_grid(&grid);
        assert_eq!(&bytes[..4], b"FDG1");
        assert_eq!(&bytes[4..8], &[3, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[1, 0, 0, 0]);
        assert_eq!(bytes[12], 1);
        assert_eq!(bytes.len(), 13 + 4 * 12);
        assert_eq!(&bytes[13..17], &1.0f32.to_le_bytes());
    }

    #[test]
    fn rejects_bad_input() {
        let grid = DepthGrid::new(2, 2, vec![1.0; 4], None).unwrap();
        let bytes = encode_depth_grid(&grid);
        assert!(matches!(decode_depth_grid(b"FDG2xxxxxxxxxx"), Err(DepthGridError::BadMagic)));
        assert!(matches!(decode_depth_grid(&bytes[..bytes.len() - 1]), Err(DepthGridError::Truncated { .. })));
        assert!(matches!(decode_depth_grid(&bytes[..10]), Err(DepthGridError::Truncated { .. })));
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(decode_depth_grid(&longer), Err(DepthGridError::TrailingBytes(1))));
        assert!(DepthGrid::new(1, 1, vec![-1.0], None).is_err());
        assert!(DepthGrid::new(1, 1, vec![1.0], Some(vec![[1.0, 1.0, 0.0]])).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.fdg");
        let grid = DepthGrid::new(3, 2, vec![1.0, 2.0, f32::NAN, 4.0, 5.0, 6.0], None).unwrap();
        write_depth_grid(&path, &grid).unwrap();
        assert!(read_depth_grid(&path).unwrap().bit_eq(&grid));
        assert!(matches!(read_depth_grid(dir.path().join("missing.fdg")), Err(DepthGridError::Io { .. })));
    }

    proptest! {
        #[test]
        fn random_grids_round_trip(w in 1u32..20, h in 1u32..20, seed in any::<u64>(), with_rays in any::<bool>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = (w * h) as usize;
            let values: Vec<f32> = (0..n).map(|_| if rng.random_bool(0.1) { f32::NAN } else { rng.random_range(0.01f32..100.0) }).collect();
            let rays = with_rays.then(|| (0..n).map(|_| {
                let v = [rng.random_range(-1.0f32..1.0), rng.random_range(-1.0f32..1.0), 1.0f32];
                let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                [v[0] / norm, v[1] / norm, v[2] / norm]
            }).collect());
            let grid = DepthGrid::new(w, h, values, rays).unwrap();
            let back = decode_depth_grid(&encode_depth_grid(&grid)).unwrap();
            prop_assert!(back.bit_eq(&grid));
        }
    }
}
