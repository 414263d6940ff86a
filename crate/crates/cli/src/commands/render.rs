use std::path::PathBuf;

use fisheye_gs::render::{render, Backend, RenderConfig};
use fisheye_gs::scene_io::{read_colmap_text, read_gaussians_ply, write_depth_grid};

use crate::error::{CliError, Result};
use crate::output::Staging;
use crate::{BackendArg, RenderArgs};

pub fn run(args: &RenderArgs) -> Result<()> {
    let cfg = RenderConfig {
        backend: match args.backend {
            BackendArg::Ewa => Backend::Ewa,
            BackendArg::Ut => Backend::Ut,
        },
        tile_size: args.tile_size,
        ..RenderConfig::default()
    };
    cfg.validate()?;
    let model = read_colmap_text(&args.colmap)?;
    let record = model.image(&args.image_name).ok_or_else(|| {
        CliError::validation(format!(
            "image '{}' is not in the COLMAP model; available: {}",
            args.image_name,
            model.image_names().join(", ")
        ))
    })?;
    let cam =
        model.camera_for(record).ok_or_else(|| CliError::validation(format!("image '{}' has no camera", args.image_name)))?;
    let gaussians = read_gaussians_ply(&args.scene)?;
    let out = render(&gaussians, &record.pose, cam, &cfg)?;

    let mask_path = args.mask_out.clone().unwrap_or_else(|| default_mask_path(&args.out));
    let mut staging = Staging::new();
    let image = out.to_image();
    image.write(staging.path_for(&args.out)?)?;
    image.write_mask(staging.path_for(&mask_path)?)?;
    if let Some(depth_path) = &args.depth_out {
        write_depth_grid(staging.path_for(depth_path)?, &out.to_depth_grid())?;
    }
    staging.commit()?;
    let s = out.stats;
    println!(
        "rendered {} ({}x{}, {}): gaussians={} rasterized={} culled={} skipped_singular={}",
        args.image_name, out.width, out.height, cfg.backend, s.input, s.rasterized, s.culled, s.skipped_singular
    );
    Ok(())
}

fn default_mask_path(out: &std::path::Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "render".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}_mask.png"))
}
