use std::collections::BTreeSet;
use std::fmt::Write as _;

use fisheye_gs::metrics::{evaluate, MetricReport};
use fisheye_gs::raster::{read_mask, Image};
use rayon::prelude::*;

use super::{list_images, png_name};
use crate::error::{CliError, Result};
use crate::output::Staging;
use crate::MetricsArgs;

pub fn run(args: &MetricsArgs) -> Result<()> {
    let names_a = list_images(&args.a)?;
    let names_b = list_images(&args.b)?;
    if names_a != names_b {
        let sa: BTreeSet<&String> = names_a.iter().collect();
        let sb: BTreeSet<&String> = names_b.iter().collect();
        let only_a: Vec<&str> = sa.difference(&sb).map(|s| s.as_str()).collect();
        let only_b: Vec<&str> = sb.difference(&sa).map(|s| s.as_str()).collect();
        return Err(CliError::validation(format!(
            "unpaired files; only in {}: [{}]; only in {}: [{}]",
            args.a.display(),
            only_a.join(", "),
            args.b.display(),
            only_b.join(", ")
        )));
    }
    if names_a.is_empty() {
        return Err(CliError::validation(format!("no images in {}", args.a.display())));
    }
    let mask_dir = if args.full_frame { None } else { args.mask.as_ref() };
    let reports: Vec<Result<MetricReport>> = names_a
        .par_iter()
        .map(|name| {
            let a = Image::read(args.a.join(name))?;
            let b = Image::read(args.b.join(name))?;
            let mask = match mask_dir {
                Some(dir) => {
                    let (w, h, m) = read_mask(dir.join(png_name(name)))?;
                    if (w, h) != (a.width(), a.height()) {
                        return Err(CliError::validation(format!(
                            "{name}: mask is {w}x{h}, image is {}x{}",
                            a.width(),
                            a.height()
                        )));
                    }
                    Some(m)
                }
                None => None,
            };
            evaluate(&a, &b, mask.as_deref()).map_err(|e| CliError::from(e).context(name))
        })
        .collect();
    let reports: Vec<MetricReport> = reports.into_iter().collect::<Result<_>>()?;

    let mut csv = String::from("image,psnr_db,ssim,valid_pixels\n");
    for (name, r) in names_a.iter().zip(&reports) {
        println!(
            "{{\"image\": \"{name}\", \"psnr\": {}, \"ssim\": {:.6}, \"valid_pixels\": {}}}",
            json_number(r.psnr),
            r.ssim,
            r.valid_pixel_count
        );
        let _ = writeln!(csv, "{name},{:.6},{:.6},{}", r.psnr, r.ssim, r.valid_pixel_count);
    }
    let n = reports.len() as f64;
    let mean_psnr = reports.iter().map(|r| r.psnr).sum::<f64>() / n;
    let mean_ssim = reports.iter().map(|r| r.ssim).sum::<f64>() / n;
    let mean_valid = reports.iter().map(|r| r.valid_pixel_count as f64).sum::<f64>() / n;
    let _ = writeln!(csv, "mean,{mean_psnr:.6},{mean_ssim:.6},{mean_valid:.1}");
    if let Some(out) = &args.out {
        let mut staging = Staging::new();
        staging.write(out, csv.as_bytes())?;
        staging.commit()?;
    }
    Ok(())
}

/// Infinite PSNR is quoted so each line stays parseable.
fn json_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        format!("\"{v}\"")
    }
}
