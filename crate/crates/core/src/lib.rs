//! Fisheye Gaussian splatting toolkit.
//!
//! Camera models with >180° field-of-view support, field-of-view reduction by
//! angular reprojection, depth-map based point-cloud initialization aligned to
//! an SfM frame, and Gaussian projection through both EWA linearization and the
//! Unscented Transform.

// `!(x > 0.0)` rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod depth_init;
pub mod geometry;
pub mod metrics;
pub mod raster;
pub mod render;
pub mod scene_io;
pub mod splat;
pub mod synthetic;
pub mod warp;

pub use camera::{CameraError, CameraModel, FisheyeCamera, Ray};
pub use geometry::{Pose, SimilarityTransform};
pub use raster::Image;
