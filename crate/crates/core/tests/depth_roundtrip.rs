use fisheye_gs::depth_init::{align_poses, apply_similarity, fuse_clouds, unproject_depth, PointCloud, UnprojectOptions};
use fisheye_gs::render::{render_depth, RenderConfig};
use fisheye_gs::scene_io::{decode_depth_grid, encode_depth_grid, DepthGrid};
use fisheye_gs::synthetic::depth_scene;
use fisheye_gs::{FisheyeCamera, Pose, SimilarityTransform};
use nalgebra::{Rotation3, Vector3};

fn scaled(grid: &DepthGrid, s: f32) -> DepthGrid {
    DepthGrid::new(grid.width(), grid.height(), grid.values().iter().map(|v| v * s).collect(), None).unwrap()
}

fn fused(grids: &[DepthGrid], poses: &[Pose], cam: &FisheyeCamera) -> PointCloud {
    let clouds: Vec<PointCloud> =
        grids.iter().map(|g| unproject_depth(g, cam, None, &UnprojectOptions::default()).unwrap()).collect();
    fuse_clouds(&clouds, poses).unwrap()
}

#[test]
fn perturbed_frame_is_recovered() {
    let cam = FisheyeCamera::centered_equidistant(96, 200.0).unwrap();
    let scene = depth_scene(5);
    let poses = [
        Pose::from_center(&Rotation3::from_euler_angles(0.1, -0.2, 0.05).into_inner(), &Vector3::new(0.0, 0.0, 0.0), "a.png"),
        Pose::from_center(&Rotation3::from_euler_angles(-0.15, 0.4, 0.3).into_inner(), &Vector3::new(0.9, 0.3, -0.4), "b.png"),
    ];
    let grids: Vec<DepthGrid> = poses.iter().map(|p| render_depth(&scene, p, &cam, &RenderConfig::default()).unwrap()).collect();
    // the predicted frame is the SfM frame under a known similarity
    let s = 1.7;
    let to_pred =
        SimilarityTransform::new(s, Rotation3::from_euler_angles(0.7, -1.1, 2.3).into_inner(), Vector3::new(3.0, -2.0, 0.5))
            .unwrap();
    let pred_poses: Vec<Pose> = poses.iter().map(|p| to_pred.transform_pose(p)).collect();
    let pred_grids: Vec<DepthGrid> =
        grids.iter().map(|g| decode_depth_grid(&encode_depth_grid(&scaled(g, s as f32))).unwrap()).collect();

    let alignment = align_poses(&pred_poses, &poses).unwrap();
    assert!((alignment.transform.scale * s - 1.0).abs() < 1e-6);
    let recovered = apply_similarity(&fused(&pred_grids, &pred_poses, &cam), &alignment.transform);
    let truth = fused(&grids, &poses, &cam);
    assert_eq!(recovered.len(), truth.len());
    assert!(truth.len() > 5000);
    let rms = (recovered.positions.iter().zip(&truth.positions).map(|(a, b)| (a - b).norm_squared()).sum::<f64>()
        / truth.len() as f64)
        .sqrt();
    assert!(rms < 1e-3, "rms {rms}");
}
