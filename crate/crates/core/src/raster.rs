//! 8-bit raster images with an optional validity mask.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error("image size mismatch: {0}")]
    SizeMismatch(String),
    #[error("failed to read or write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: image::ImageError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
    valid_mask: Option<Vec<bool>>,
}

impl Image {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self, ImageError> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::Invalid(format!("unsupported channel count {channels}")));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(ImageError::Invalid(format!("data length {} does not match {width}x{height}x{channels}", data.len())));
        }
        Ok(Image { width, height, channels, data, valid_mask: None })
    }

    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Self {
        Self::new(width, height, channels, vec![value; width as usize * height as usize * channels as usize])
            .expect("consistent size")
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self, ImageError> {
        if mask.len() != self.pixel_count() {
            return Err(ImageError::Invalid(format!("mask has {} entries, expected {}", mask.len(), self.pixel_count())));
        }
        self.valid_mask = Some(mask);
        Ok(self)
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn channels(&self) -> u8 {
        self.channels
    }
    pub fn data(&self) -> &[u8] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }
    pub fn valid_mask(&self) -> Option<&[bool]> {
        self.valid_mask.as_deref()
    }
    pub fn take_mask(&mut self) -> Option<Vec<bool>> {
        self.valid_mask.take()
    }
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        self.valid_mask.as_ref().is_none_or(|m| m[y as usize * self.width as usize + x as usize])
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.data[i..i + c]
    }

    pub fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [u8] {
        let c = self.channels as usize;
        let i = (y as usize * self.width as usize + x as usize) * c;
        &mut self.data[i..i + c]
    }

    /// Bilinear interpolation at a subpixel position (pixel centers at integer
    /// coordinates). Only the first `channels` entries of the result are used.
    ///
    /// Returns `None` outside `[0, width-1] x [0, height-1]`, or when a
    /// neighbor with nonzero weight is masked invalid.
    pub fn bilinear_sample(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        let (w, h) = (f64::from(self.width), f64::from(self.height));
        if !(x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0) {
            return None;
        }
        let x0 = x.floor() as u32;
        let y0 = y.floor() as u32;
        let fx = x - f64::from(x0);
        let fy = y - f64::from(y0);
        let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
        let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
        let taps = [(x0, y0, (1.0 - fx) * (1.0 - fy)), (x1, y0, fx * (1.0 - fy)), (x0, y1, (1.0 - fx) * fy), (x1, y1, fx * fy)];
        let mut out = [0.0; 3];
        for (tx, ty, wgt) in taps {
            if wgt == 0.0 {
                continue;
            }
            if !self.is_valid(tx, ty) {
                return None;
            }
            for (o, &v) in out.iter_mut().zip(self.pixel(tx, ty)) {
                *o += wgt * f64::from(v);
            }
        }
        Some(out)
    }

    /// Rec.601 luma per pixel.
    pub fn luma(&self) -> Vec<f64> {
        match self.channels {
            1 => self.data.iter().map(|&v| f64::from(v)).collect(),
            _ => self
                .data
                .chunks_exact(3)
                .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
                .collect(),
        }
    }

    /// Reads PNG, PPM or PGM. 16-bit and alpha inputs are reduced to 8-bit
    /// gray or RGB.
    pub fn read(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        let path = path.as_ref();
        let dynamic = image::open(path).map_err(|source| ImageError::Io { path: path.display().to_string(), source })?;
        Ok(Self::from_dynamic(dynamic))
    }

    pub fn from_dynamic(dynamic: DynamicImage) -> Self {
        let gray = matches!(
            dynamic,
            DynamicImage::ImageLuma8(_)
                | DynamicImage::ImageLuma16(_)
                | DynamicImage::ImageLumaA8(_)
                | DynamicImage::ImageLumaA16(_)
        );
        if gray {
            let g = dynamic.into_luma8();
            let (w, h) = g.dimensions();
            Image::new(w, h, 1, g.into_raw()).expect("consistent size")
        } else {
            let rgb = dynamic.into_rgb8();
            let (w, h) = rgb.dimensions();
            Image::new(w, h, 3, rgb.into_raw()).expect("consistent size")
        }
    }

    /// Writes the pixels; the format follows the extension (`png`, `ppm`, `pgm`).
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let path = path.as_ref();
        let format =
            ImageFormat::from_path(path).map_err(|source| ImageError::Io { path: path.display().to_string(), source })?;
        let dynamic = match self.channels {
            1 => DynamicImage::ImageLuma8(
                GrayImage::from_raw(self.width, self.height, self.data.clone()).expect("consistent size"),
            ),
            _ => {
                DynamicImage::ImageRgb8(RgbImage::from_raw(self.width, self.height, self.data.clone()).expect("consistent size"))
            }
        };
        dynamic.save_with_format(path, format).map_err(|source| ImageError::Io { path: path.display().to_string(), source })
    }

    /// Writes the validity mask as an 8-bit 0/255 image (all 255 when absent).
    pub fn write_mask(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        mask_to_image(self.width, self.height, self.valid_mask.as_deref()).write(path)
    }
}

pub fn mask_to_image(width: u32, height: u32, mask: Option<&[bool]>) -> Image {
    let n = width as usize * height as usize;
    let data = match mask {
        Some(m) => m.iter().map(|&v| if v { 255 } else { 0 }).collect(),
        None => vec![255; n],
    };
    Image::new(width, height, 1, data).expect("consistent size")
}

/// Reads a mask image; any nonzero sample counts as valid.
pub fn read_mask(path: impl AsRef<Path>) -> Result<(u32, u32, Vec<bool>), ImageError> {
    let img = Image::read(path)?;
    let c = img.channels() as usize;
    let mask = img.data().chunks_exact(c).map(|p| p.iter().any(|&v| v != 0)).collect();
    Ok((img.width(), img.height(), mask))
}
