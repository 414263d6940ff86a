//! Failure classes and their process exit codes.

use std::fmt;
use std::process::ExitCode;

use fisheye_gs::depth_init::DepthInitError;
use fisheye_gs::metrics::MetricsError;
use fisheye_gs::raster::ImageError;
use fisheye_gs::render::RenderError;
use fisheye_gs::scene_io::{ColmapError, DepthGridError, PlyError};
use fisheye_gs::splat::SplatError;
use fisheye_gs::warp::WarpError;
use fisheye_gs::CameraError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Validation,
    Io,
    Numerical,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { kind: Kind::Validation, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { kind: Kind::Io, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError { kind: Kind::Numerical, message: message.into() }
    }

    pub fn context(self, prefix: impl fmt::Display) -> Self {
        CliError { kind: self.kind, message: format!("{prefix}: {}", self.message) }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self.kind {
            Kind::Validation => 2,
            Kind::Io => 3,
            Kind::Numerical => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<CameraError> for CliError {
    fn from(e: CameraError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        match e {
            ImageError::Io { .. } => CliError::io(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<ColmapError> for CliError {
    fn from(e: ColmapError) -> Self {
        match e {
            ColmapError::MissingFile(_) | ColmapError::Io { .. } => CliError::io(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<PlyError> for CliError {
    fn from(e: PlyError) -> Self {
        match e {
            PlyError::Io { .. } => CliError::io(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<DepthGridError> for CliError {
    fn from(e: DepthGridError) -> Self {
        match e {
            DepthGridError::Io { .. } => CliError::io(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<WarpError> for CliError {
    fn from(e: WarpError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<DepthInitError> for CliError {
    fn from(e: DepthInitError) -> Self {
        match e {
            DepthInitError::Degenerate | DepthInitError::TooFewPoints(_) => CliError::numerical(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<SplatError> for CliError {
    fn from(e: SplatError) -> Self {
        match e {
            SplatError::UnreliableOracle { .. } | SplatError::NotPositiveDefinite => CliError::numerical(e.to_string()),
            _ => CliError::validation(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<RenderError> for CliError {
    fn from(e: RenderError) -> Self {
        CliError::validation(e.to_string())
    }
}
