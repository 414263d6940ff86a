use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use fisheye_gs::depth_init::{
    align_poses, apply_similarity, downsample, fuse_clouds, unproject_depth, DepthKind, PointCloud, UnprojectOptions,
};
use fisheye_gs::raster::Image;
use fisheye_gs::scene_io::{read_colmap_text, read_depth_grid, write_ply_bytes, PlyEncoding};
use fisheye_gs::{FisheyeCamera, Pose};
use nalgebra::Vector3;

use super::read_camera;
use crate::error::{CliError, Result};
use crate::output::Staging;
use crate::InitArgs;

pub fn run(args: &InitArgs) -> Result<()> {
    if args.depth.len() != args.images.len() {
        return Err(CliError::validation(format!("{} depth grids but {} image names", args.depth.len(), args.images.len())));
    }
    if args.budget == 0 {
        return Err(CliError::validation("--budget must be positive"));
    }
    if args.stride == 0 {
        return Err(CliError::validation("--stride must be at least 1"));
    }
    let model = read_colmap_text(&args.colmap)?;
    let override_cam = args.cam.as_deref().map(read_camera).transpose()?;
    let mut records = Vec::with_capacity(args.images.len());
    for name in &args.images {
        let record = model.image(name).ok_or_else(|| {
            CliError::validation(format!(
                "image '{name}' is not in the COLMAP model; available: {}",
                model.image_names().join(", ")
            ))
        })?;
        records.push(record);
    }
    let colmap_poses: Vec<Pose> = records.iter().map(|r| r.pose.clone()).collect();
    let predicted = match &args.pred_poses {
        Some(path) => {
            let table = read_pose_table(path)?;
            args.images
                .iter()
                .map(|name| {
                    table
                        .get(name)
                        .cloned()
                        .ok_or_else(|| CliError::validation(format!("{} has no pose for '{name}'", path.display())))
                })
                .collect::<Result<Vec<Pose>>>()?
        }
        None => colmap_poses.clone(),
    };

    let opts = UnprojectOptions { stride: args.stride, kind: if args.z_depth { DepthKind::ZDepth } else { DepthKind::Range } };
    let mut clouds: Vec<PointCloud> = Vec::with_capacity(records.len());
    for ((path, name), record) in args.depth.iter().zip(&args.images).zip(&records) {
        let grid = read_depth_grid(path)?;
        let cam: &FisheyeCamera = match &override_cam {
            Some(c) => c,
            None => model.camera_for(record).ok_or_else(|| CliError::validation(format!("image '{name}' has no camera")))?,
        };
        let color = args.color_dir.as_ref().map(|d| Image::read(d.join(name))).transpose()?;
        let cloud = unproject_depth(&grid, cam, color.as_ref(), &opts).map_err(|e| CliError::from(e).context(path.display()))?;
        clouds.push(cloud);
    }
    let fused = fuse_clouds(&clouds, &predicted)?;
    if fused.is_empty() {
        return Err(CliError::numerical("depth grids contain no valid samples"));
    }
    let alignment = align_poses(&predicted, &colmap_poses)?;
    let aligned = apply_similarity(&fused, &alignment.transform);
    let cloud = downsample(&aligned, args.budget, args.seed);

    let encoding = if args.ascii { PlyEncoding::Ascii } else { PlyEncoding::BinaryLittleEndian };
    let mut staging = Staging::new();
    staging.write(&args.out, &write_ply_bytes(&cloud, encoding))?;
    staging.commit()?;

    let t = &alignment.transform;
    println!("views: {}", records.len());
    println!(
        "alignment: scale={:.9} rotation_deg={:.6} translation=[{:.6}, {:.6}, {:.6}] rms_residual={:e}",
        t.scale,
        t.rotation_angle().to_degrees(),
        t.translation.x,
        t.translation.y,
        t.translation.z,
        alignment.rms_residual
    );
    println!("points: fused={} written={} budget={}", aligned.len(), cloud.len(), args.budget);
    Ok(())
}

/// `NAME QW QX QY QZ TX TY TZ` per line, world-to-camera like COLMAP.
fn read_pose_table(path: &Path) -> Result<BTreeMap<String, Pose>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}: {e}", path.display())))?;
    let mut table = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: &str| CliError::validation(format!("{}:{}: {m}", path.display(), i + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(bad("expected NAME QW QX QY QZ TX TY TZ"));
        }
        let mut v = [0.0; 7];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| bad(&format!("'{f}' is not a number")))?;
        }
        let pose =
            Pose::new([v[0], v[1], v[2], v[3]], Vector3::new(v[4], v[5], v[6]), fields[0]).map_err(|e| bad(&e.to_string()))?;
        if table.insert(fields[0].to_string(), pose).is_some() {
            return Err(bad(&format!("duplicate pose for '{}'", fields[0])));
        }
    }
    Ok(table)
}
