//! Inverse-mapping reprojection between camera models.
//!
//! Every destination pixel is unprojected through the destination camera,
//! reprojected through the source camera and sampled bilinearly. Destination
//! pixels without a valid source sample are black and masked invalid.

use nalgebra::Vector2;
use rayon::prelude::*;
use thiserror::Error;

use crate::camera::{fov_to_focal, CameraError, FisheyeCamera};
use crate::raster::Image;

#[derive(Debug, Error)]
pub enum WarpError {
    #[error("target field of view {target} deg exceeds source {source_fov} deg")]
    FovTooLarge { target: f64, source_fov: f64 },
    #[error("image is {image_w}x{image_h} but camera expects {camera_w}x{camera_h}")]
    SizeMismatch { image_w: u32, image_h: u32, camera_w: u32, camera_h: u32 },
    #[error(transparent)]
    Camera(#[from] CameraError),
}

/// Source pixel sampled by destination pixel `pixel`, if the ray is inside
/// both cameras' fields of view.
pub fn source_coordinates(src_cam: &FisheyeCamera, dst_cam: &FisheyeCamera, pixel: &Vector2<f64>) -> Option<Vector2<f64>> {
    let ray = dst_cam.unproject(pixel).ok()?;
    let proj = src_cam.project(&ray.direction).ok()?;
    proj.valid.then_some(proj.pixel)
}

/// Reprojects `src` (captured by `src_cam`) into `dst_cam`.
pub fn convert_model(src: &Image, src_cam: &FisheyeCamera, dst_cam: &FisheyeCamera) -> Result<Image, WarpError> {
    check_size(src, src_cam)?;
    if dst_cam.theta_max() > src_cam.theta_max() * (1.0 + 1e-12) {
        return Err(WarpError::FovTooLarge { target: dst_cam.fov_deg(), source_fov: src_cam.fov_deg() });
    }
    let (w, h) = (dst_cam.width(), dst_cam.height());
    let channels = src.channels() as usize;
    let rows: Vec<(Vec<u8>, Vec<bool>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut data = vec![0u8; w as usize * channels];
            let mut mask = vec![false; w as usize];
            for x in 0..w {
                let pixel = Vector2::new(f64::from(x), f64::from(y));
                let Some(sample) = source_coordinates(src_cam, dst_cam, &pixel).and_then(|s| src.bilinear_sample(s.x, s.y))
                else {
                    continue;
                };
                let out = &mut data[x as usize * channels..(x as usize + 1) * channels];
                for (o, v) in out.iter_mut().zip(sample) {
                    *o = quantize(v);
                }
                mask[x as usize] = true;
            }
            (data, mask)
        })
        .collect();
    let mut data = Vec::with_capacity(w as usize * h as usize * channels);
    let mut mask = Vec::with_capacity(w as usize * h as usize);
    for (d, m) in rows {
        data.extend_from_slice(&d);
        mask.extend_from_slice(&m);
    }
    let image = Image::new(w, h, src.channels(), data).expect("consistent size");
    Ok(image.with_mask(mask).expect("consistent size"))
}

/// Equidistant camera used for a reduced field of view: same resolution,
/// principal point at the image center, image circle inscribed in the frame.
pub fn reduced_fov_camera(width: u32, height: u32, target_fov_deg: f64) -> Result<FisheyeCamera, CameraError> {
    let focal = fov_to_focal(target_fov_deg, f64::from(width.min(height)) / 2.0)?;
    FisheyeCamera::equidistant(
        focal,
        focal,
        (f64::from(width) - 1.0) / 2.0,
        (f64::from(height) - 1.0) / 2.0,
        width,
        height,
        target_fov_deg,
    )
}

/// Narrows the field of view of a fisheye image by rescaling incidence
/// angles and discarding everything beyond `target_fov_deg / 2`.
pub fn reduce_fov(src: &Image, src_cam: &FisheyeCamera, target_fov_deg: f64) -> Result<(Image, FisheyeCamera), WarpError> {
    check_size(src, src_cam)?;
    if target_fov_deg > src_cam.fov_deg() {
        return Err(WarpError::FovTooLarge { target: target_fov_deg, source_fov: src_cam.fov_deg() });
    }
    let dst_cam = reduced_fov_camera(src.width(), src.height(), target_fov_deg)?;
    let out = convert_model(src, src_cam, &dst_cam)?;
    Ok((out, dst_cam))
}

fn check_size(img: &Image, cam: &FisheyeCamera) -> Result<(), WarpError> {
    if img.width() != cam.width() || img.height() != cam.height() {
        return Err(WarpError::SizeMismatch {
            image_w: img.width(),
            image_h: img.height(),
            camera_w: cam.width(),
            camera_h: cam.height(),
        });
    }
    Ok(())
}

pub(crate) fn quantize(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}
