use fisheye_gs::raster::Image;
use fisheye_gs::warp::{reduce_fov, reduced_fov_camera};
use rayon::prelude::*;

use super::{list_images, png_name, read_camera, same_dir};
use crate::error::{CliError, Result};
use crate::output::Staging;
use crate::ReduceFovArgs;

pub fn run(args: &ReduceFovArgs) -> Result<()> {
    let cam = read_camera(&args.cam)?;
    if args.fov.is_nan() || args.fov <= 0.0 || args.fov > cam.fov_deg() {
        return Err(CliError::validation(format!(
            "target field of view {} deg must be in (0, {}] for this camera",
            args.fov,
            cam.fov_deg()
        )));
    }
    if same_dir(&args.input, &args.out) {
        return Err(CliError::validation("--out must differ from --in"));
    }
    let names = list_images(&args.input)?;
    if names.is_empty() {
        return Err(CliError::validation(format!("no images in {}", args.input.display())));
    }
    let out_cam = reduced_fov_camera(cam.width(), cam.height(), args.fov)?;

    let mut staging = Staging::new();
    let mut jobs = Vec::with_capacity(names.len());
    for name in &names {
        let image = staging.path_for(args.out.join(name))?;
        let mask = staging.path_for(args.out.join("masks").join(png_name(name)))?;
        jobs.push((name, image, mask));
    }
    let results: Vec<Result<()>> = jobs
        .par_iter()
        .map(|(name, image_tmp, mask_tmp)| {
            let src = Image::read(args.input.join(name))?;
            let (out, _) = reduce_fov(&src, &cam, args.fov)?;
            out.write(image_tmp)?;
            out.write_mask(mask_tmp)?;
            Ok(())
        })
        .collect();
    let mut first_error = None;
    let mut failed = 0;
    for ((name, image_tmp, mask_tmp), result) in jobs.iter().zip(results) {
        if let Err(e) = result {
            eprintln!("{name}: {e}");
            staging.discard(image_tmp);
            staging.discard(mask_tmp);
            failed += 1;
            first_error.get_or_insert(e);
        }
    }
    if failed == names.len() {
        return Err(first_error.expect("at least one failure").context("every image failed"));
    }
    staging.write(args.out.join("camera.txt"), out_cam.to_text_block().as_bytes())?;
    staging.commit()?;
    println!("reduced {} of {} images to {} deg", names.len() - failed, names.len(), args.fov);
    match first_error {
        Some(e) => Err(e.context(format!("{failed} of {} images failed", names.len()))),
        None => Ok(()),
    }
}
