pub mod compare;
pub mod init_depth;
pub mod metrics;
pub mod reduce_fov;
pub mod render;
pub mod split;

use std::fs;
use std::path::Path;

use fisheye_gs::FisheyeCamera;

use crate::error::{CliError, Result};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "ppm", "pgm"];

pub fn read_camera(path: &Path) -> Result<FisheyeCamera> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}: {e}", path.display())))?;
    FisheyeCamera::parse_text_block(&text).map_err(|e| CliError::from(e).context(path.display()))
}

/// Sorted names of the PNG/PPM/PGM files directly inside `dir`.
pub fn list_images(dir: &Path) -> Result<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(format!("listing {}: {e}", dir.display())))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry?;
        if !entry.file_type()?.is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        let is_image = Path::new(&name)
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if is_image {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

/// `name` with its extension replaced by `.png`.
pub fn png_name(name: &str) -> String {
    let stem = Path::new(name).file_stem().map_or_else(|| name.to_string(), |s| s.to_string_lossy().into_owned());
    format!("{stem}.png")
}

pub fn same_dir(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}
