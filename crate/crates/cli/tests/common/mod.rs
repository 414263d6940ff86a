#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fisheye_gs::depth_init::Frame;
use fisheye_gs::depth_init::PointCloud;
use fisheye_gs::scene_io::{write_colmap_text, ImageRecord, SparseModel};
use fisheye_gs::{FisheyeCamera, Image, Pose};
use nalgebra::{Rotation3, Vector3};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fisheye-gs"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Two views from inside the depth scene, a short baseline apart.
pub fn two_poses() -> Vec<Pose> {
    vec![
        Pose::from_center(
            &Rotation3::from_euler_angles(0.1, -0.2, 0.05).into_inner(),
            &Vector3::new(0.0, 0.0, 0.0),
            "view_a.png",
        ),
        Pose::from_center(
            &Rotation3::from_euler_angles(-0.15, 0.4, 0.3).into_inner(),
            &Vector3::new(0.9, 0.3, -0.4),
            "view_b.png",
        ),
    ]
}

/// COLMAP text model with one camera shared by `poses`.
pub fn write_model(dir: &Path, cam: &FisheyeCamera, poses: &[Pose]) {
    let mut model = SparseModel::empty();
    model.cameras.insert(1, cam.clone());
    model.images = poses
        .iter()
        .enumerate()
        .map(|(i, pose)| ImageRecord { image_id: i as u32 + 1, camera_id: 1, pose: pose.clone() })
        .collect();
    model.points =
        PointCloud { positions: vec![Vector3::new(0.0, 0.0, 4.0)], colors: Some(vec![[10, 20, 30]]), frame: Frame::Colmap };
    write_colmap_text(&model, dir).unwrap();
}

pub fn write_pose_table(path: &Path, poses: &[Pose]) {
    let mut text = String::from("# NAME QW QX QY QZ TX TY TZ\n");
    for pose in poses {
        text.push_str(&format!(
            "{} {} {} {} {} {} {} {}\n",
            pose.image_name, pose.q[0], pose.q[1], pose.q[2], pose.q[3], pose.t.x, pose.t.y, pose.t.z
        ));
    }
    std::fs::write(path, text).unwrap();
}

pub fn write_camera(path: &Path, cam: &FisheyeCamera) {
    std::fs::write(path, cam.to_text_block()).unwrap();
}

pub fn max_abs_diff(a: &Image, b: &Image, mask: Option<&[bool]>) -> u8 {
    let c = a.channels() as usize;
    a.data()
        .chunks(c)
        .zip(b.data().chunks(c))
        .enumerate()
        .filter(|(i, _)| mask.is_none_or(|m| m[*i]))
        .flat_map(|(_, (p, q))| p.iter().zip(q).map(|(x, y)| x.abs_diff(*y)))
        .max()
        .unwrap_or(0)
}

pub fn and_masks(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| *x && *y).collect()
}

pub fn dir_listing(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}
