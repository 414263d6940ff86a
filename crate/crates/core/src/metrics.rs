//! Masked PSNR and single-scale SSIM for 8-bit images.

use rayon::prelude::*;
use thiserror::Error;

use crate::raster::Image;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);
const BAND_ROWS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("images differ in size: {a_w}x{a_h}x{a_c} vs {b_w}x{b_h}x{b_c}")]
    SizeMismatch { a_w: u32, a_h: u32, a_c: u8, b_w: u32, b_h: u32, b_c: u8 },
    #[error("mask has {got} entries, expected {expected}")]
    MaskSize { got: usize, expected: usize },
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("image {width}x{height} is smaller than the {window}x{window} SSIM window")]
    TooSmall { width: u32, height: u32, window: usize },
    #[error("no SSIM window lies fully inside the mask")]
    NoValidWindow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    /// `f64::INFINITY` for identical masked content.
    pub psnr: f64,
    pub ssim: f64,
    pub valid_pixel_count: usize,
}

fn check_pair(a: &Image, b: &Image, mask: Option<&[bool]>) -> Result<usize, MetricsError> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(MetricsError::SizeMismatch {
            a_w: a.width(),
            a_h: a.height(),
            a_c: a.channels(),
            b_w: b.width(),
            b_h: b.height(),
            b_c: b.channels(),
        });
    }
    let n = a.pixel_count();
    match mask {
        Some(m) if m.len() != n => Err(MetricsError::MaskSize { got: m.len(), expected: n }),
        Some(m) => match m.iter().filter(|&&v| v).count() {
            0 => Err(MetricsError::EmptyMask),
            k => Ok(k),
        },
        None if n == 0 => Err(MetricsError::EmptyMask),
        None => Ok(n),
    }
}

/// `10 log10(255² / MSE)` over masked pixels and all channels.
pub fn psnr(a: &Image, b: &Image, mask: Option<&[bool]>) -> Result<f64, MetricsError> {
    let count = check_pair(a, b, mask)?;
    let c = a.channels() as usize;
    let mut sse = 0.0;
    for (i, (pa, pb)) in a.data().chunks_exact(c).zip(b.data().chunks_exact(c)).enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        for (x, y) in pa.iter().zip(pb) {
            let d = f64::from(*x) - f64::from(*y);
            sse += d * d;
        }
    }
    let mse = sse / (count * c) as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

/// Normalized 1D Gaussian taps of the SSIM window.
pub fn ssim_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - r;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.map(|v| v / sum)
}

/// Mean SSIM of Rec.601 luma over all 11x11 windows lying fully inside the mask.
pub fn ssim(a: &Image, b: &Image, mask: Option<&[bool]>) -> Result<f64, MetricsError> {
    check_pair(a, b, mask)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::TooSmall { width: a.width(), height: a.height(), window: SSIM_WINDOW });
    }
    let la = a.luma();
    let lb = b.luma();
    let invalid = mask.map(|m| InvalidCounts::new(m, w, h));
    let kernel = ssim_kernel();
    let out_w = w - SSIM_WINDOW + 1;
    let out_h = h - SSIM_WINDOW + 1;
    let bands: Vec<(f64, usize)> = (0..out_h.div_ceil(BAND_ROWS))
        .into_par_iter()
        .map(|band| {
            let y0 = band * BAND_ROWS;
            let y1 = (y0 + BAND_ROWS).min(out_h);
            ssim_band(&la, &lb, w, out_w, y0, y1, &kernel, invalid.as_ref())
        })
        .collect();
    let (sum, count) = bands.iter().fold((0.0, 0), |(s, c), (bs, bc)| (s + bs, c + bc));
    if count == 0 {
        return Err(MetricsError::NoValidWindow);
    }
    Ok(sum / count as f64)
}

/// Sum and count of SSIM over window top rows `y0..y1`.
#[allow(clippy::too_many_arguments)]
fn ssim_band(
    la: &[f64],
    lb: &[f64],
    w: usize,
    out_w: usize,
    y0: usize,
    y1: usize,
    kernel: &[f64; SSIM_WINDOW],
    invalid: Option<&InvalidCounts>,
) -> (f64, usize) {
    let rows = y1 - y0 + SSIM_WINDOW - 1;
    // horizontally filtered a, b, a², b², ab
    let mut hf = vec![[0.0f64; 5]; rows * out_w];
    for r in 0..rows {
        let src = (y0 + r) * w;
        for x in 0..out_w {
            let mut acc = [0.0; 5];
            for (k, &wt) in kernel.iter().enumerate() {
                let va = la[src + x + k];
                let vb = lb[src + x + k];
                acc[0] += wt * va;
                acc[1] += wt * vb;
                acc[2] += wt * (va * va);
                acc[3] += wt * (vb * vb);
                acc[4] += wt * (va * vb);
            }
            hf[r * out_w + x] = acc;
        }
    }
    let mut sum = 0.0;
    let mut count = 0;
    for y in y0..y1 {
        for x in 0..out_w {
            if invalid.is_some_and(|inv| inv.window_has_invalid(x, y)) {
                continue;
            }
            let mut m = [0.0; 5];
            for (k, &wt) in kernel.iter().enumerate() {
                let v = &hf[(y - y0 + k) * out_w + x];
                for (acc, vi) in m.iter_mut().zip(v) {
                    *acc += wt * vi;
                }
            }
            sum += ssim_from_moments(m[0], m[1], m[2] - m[0] * m[0], m[3] - m[1] * m[1], m[4] - m[0] * m[1]);
            count += 1;
        }
    }
    (sum, count)
}

/// Exactly 1 when `mu_a == mu_b` and `var_a == var_b == cov`.
fn ssim_from_moments(mu_a: f64, mu_b: f64, var_a: f64, var_b: f64, cov: f64) -> f64 {
    let num = (2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2);
    let den = (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2);
    num / den
}

/// 2D prefix sums of invalid pixels.
struct InvalidCounts {
    stride: usize,
    sums: Vec<u32>,
}

impl InvalidCounts {
    fn new(mask: &[bool], w: usize, h: usize) -> Self {
        let stride = w + 1;
        let mut sums = vec![0u32; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0;
            for x in 0..w {
                row += u32::from(!mask[y * w + x]);
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        InvalidCounts { stride, sums }
    }

    fn window_has_invalid(&self, x: usize, y: usize) -> bool {
        let s = self.stride;
        let (x1, y1) = (x + SSIM_WINDOW, y + SSIM_WINDOW);
        self.sums[y1 * s + x1] + self.sums[y * s + x] != self.sums[y * s + x1] + self.sums[y1 * s + x]
    }
}

pub fn evaluate(a: &Image, b: &Image, mask: Option<&[bool]>) -> Result<MetricReport, MetricsError> {
    let valid_pixel_count = check_pair(a, b, mask)?;
    Ok(MetricReport { psnr: psnr(a, b, mask)?, ssim: ssim(a, b, mask)?, valid_pixel_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(w: u32, h: u32, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * h * 3).map(|_| rng.random::<u8>()).collect();
        Image::new(w, h, 3, data).unwrap()
    }

    fn offset(img: &Image, d: i16) -> Image {
        let data = img.data().iter().map(|&v| (i16::from(v) + d).clamp(0, 255) as u8).collect();
        Image::new(img.width(), img.height(), img.channels(), data).unwrap()
    }

    /// SSIM straight from the definition with a 2D window.
    fn ssim_direct(a: &Image, b: &Image) -> f64 {
        let (w, h) = (a.width() as usize, a.height() as usize);
        let (la, lb) = (a.luma(), b.luma());
        let k = ssim_kernel();
        let mut sum = 0.0;
        let mut n = 0;
        for y in 0..=h - SSIM_WINDOW {
            for x in 0..=w - SSIM_WINDOW {
                let (mut ma, mut mb) = (0.0, 0.0);
                for j in 0..SSIM_WINDOW {
                    for i in 0..SSIM_WINDOW {
                        let wt = k[i] * k[j];
                        ma += wt * la[(y + j) * w + x + i];
                        mb += wt * lb[(y + j) * w + x + i];
                    }
                }
                let (mut va, mut vb, mut cab) = (0.0, 0.0, 0.0);
                for j in 0..SSIM_WINDOW {
                    for i in 0..SSIM_WINDOW {
                        let wt = k[i] * k[j];
                        let da = la[(y + j) * w + x + i] - ma;
                        let db = lb[(y + j) * w + x + i] - mb;
                        va += wt * da * da;
                        vb += wt * db * db;
                        cab += wt * da * db;
                    }
                }
                sum += ((2.0 * ma * mb + C1) * (2.0 * cab + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
                n += 1;
            }
        }
        sum / n as f64
    }

    #[test]
    fn identical_images() {
        let a = noise(40, 30, 1);
        assert_eq!(psnr(&a, &a, None).unwrap(), f64::INFINITY);
        assert_eq!(ssim(&a, &a, None).unwrap(), 1.0);
        let r = evaluate(&a, &a, None).unwrap();
        assert_eq!(r.valid_pixel_count, 1200);
    }

    #[test]
    fn one_level_offset() {
        let a = Image::filled(32, 32, 3, 100);
        let b = offset(&a, 1);
        let p = psnr(&a, &b, None).unwrap();
        assert!((p - 20.0 * 255f64.log10()).abs() < 1e-12);
        assert!((p - 48.131).abs() < 1e-3);
    }

    #[test]
    fn checker_against_inverse_is_zero_db() {
        let data: Vec<u8> = (0..16 * 16).map(|i| if (i % 16 + i / 16) % 2 == 0 { 0 } else { 255 }).collect();
        let inv: Vec<u8> = data.iter().map(|v| 255 - v).collect();
        let a = Image::new(16, 16, 1, data).unwrap();
        let b = Image::new(16, 16, 1, inv).unwrap();
        assert!(psnr(&a, &b, None).unwrap().abs() < 1e-12);
    }

    #[test]
    fn constant_images_closed_form() {
        let (v, c) = (80.0, 30.0);
        let a = Image::filled(20, 20, 1, 80);
        let b = Image::filled(20, 20, 1, 110);
        let expected = (2.0 * v * (v + c) + C1) / (v * v + (v + c) * (v + c) + C1);
        assert!((ssim(&a, &b, None).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn matches_direct_definition_and_noise_is_low() {
        let a = noise(37, 29, 5);
        let b = noise(37, 29, 6);
        let s = ssim(&a, &b, None).unwrap();
        assert!((s - ssim_direct(&a, &b)).abs() < 1e-9);
        assert!(s < 0.1);
        let c = offset(&a, 7);
        assert!((ssim(&a, &c, None).unwrap() - ssim_direct(&a, &c)).abs() < 1e-9);
    }

    #[test]
    fn symmetric() {
        let a = noise(24, 24, 2);
        let b = offset(&noise(24, 24, 3), 4);
        assert_eq!(psnr(&a, &b, None).unwrap(), psnr(&b, &a, None).unwrap());
        assert!((ssim(&a, &b, None).unwrap() - ssim(&b, &a, None).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn masked_out_pixels_are_ignored() {
        let (w, h) = (48u32, 40u32);
        let mask: Vec<bool> = (0..w * h).map(|i| (i % w) >= 12).collect();
        let a = noise(w, h, 8);
        let b = offset(&a, 3);
        let mut a2 = a.clone();
        for (i, px) in a2.data_mut().chunks_exact_mut(3).enumerate() {
            if !mask[i] {
                px.copy_from_slice(&[255, 0, 17]);
            }
        }
        assert_eq!(psnr(&a, &b, Some(&mask)).unwrap(), psnr(&a2, &b, Some(&mask)).unwrap());
        assert_eq!(ssim(&a, &b, Some(&mask)).unwrap(), ssim(&a2, &b, Some(&mask)).unwrap());
        assert_ne!(psnr(&a, &b, None).unwrap(), psnr(&a2, &b, None).unwrap());
    }

    #[test]
    fn psnr_decreases_with_noise_amplitude() {
        let a = noise(32, 32, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let signs: Vec<i16> = (0..a.data().len()).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let mut prev = f64::INFINITY;
        for amp in [1i16, 2, 4, 8, 16, 32] {
            let data = a
                .data()
                .iter()
                .zip(&signs)
                .map(|(&v, s)| {
                    let v = i16::from(v);
                    // reflect at the range ends so every pixel moves by amp
                    let n = v + s * amp;
                    (if (0..=255).contains(&n) { n } else { v - s * amp }) as u8
                })
                .collect();
            let b = Image::new(32, 32, 3, data).unwrap();
            let p = psnr(&a, &b, None).unwrap();
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn errors() {
        let a = Image::filled(20, 20, 3, 0);
        assert!(matches!(psnr(&a, &Image::filled(21, 20, 3, 0), None), Err(MetricsError::SizeMismatch { .. })));
        assert!(matches!(psnr(&a, &Image::filled(20, 20, 1, 0), None), Err(MetricsError::SizeMismatch { .. })));
        assert_eq!(psnr(&a, &a, Some(&vec![false; 400])), Err(MetricsError::EmptyMask));
        assert!(matches!(psnr(&a, &a, Some(&[true; 3])), Err(MetricsError::MaskSize { .. })));
        let small = Image::filled(10, 30, 1, 0);
        assert!(matches!(ssim(&small, &small, None), Err(MetricsError::TooSmall { .. })));
        let sparse: Vec<bool> = (0..400).map(|i| i % 2 == 0).collect();
        assert_eq!(ssim(&a, &a, Some(&sparse)), Err(MetricsError::NoValidWindow));
    }
}
