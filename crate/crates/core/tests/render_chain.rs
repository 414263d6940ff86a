use fisheye_gs::metrics::psnr;
use fisheye_gs::render::{render_image, Backend, RenderConfig};
use fisheye_gs::synthetic::{central_object, sphere_shell};
use fisheye_gs::warp::{reduce_fov, reduced_fov_camera};
use fisheye_gs::{FisheyeCamera, Image, Pose};
use nalgebra::Vector3;

const SIZE: u32 = 257;

fn joint_mask(a: &Image, b: &Image) -> Vec<bool> {
    a.valid_mask().unwrap().iter().zip(b.valid_mask().unwrap()).map(|(x, y)| *x && *y).collect()
}

fn max_abs_diff(a: &Image, b: &Image, mask: &[bool]) -> u8 {
    a.data()
        .chunks(3)
        .zip(b.data().chunks(3))
        .zip(mask)
        .filter(|(_, m)| **m)
        .flat_map(|((p, q), _)| p.iter().zip(q).map(|(x, y)| x.abs_diff(*y)))
        .max()
        .unwrap_or(0)
}

#[test]
fn backends_agree_on_central_object() {
    let cam = FisheyeCamera::centered_equidistant(SIZE, 120.0).unwrap();
    let scene = central_object(200, 42);
    let pose = Pose::identity("c");
    let ewa = render_image(&scene, &pose, &cam, &RenderConfig::with_backend(Backend::Ewa)).unwrap();
    let ut = render_image(&scene, &pose, &cam, &RenderConfig::with_backend(Backend::Ut)).unwrap();
    let p = psnr(&ewa, &ut, ewa.valid_mask()).unwrap();
    assert!(p >= 35.0, "psnr {p}");
}

#[test]
fn reduced_render_matches_direct_render() {
    let scene = sphere_shell(Vector3::zeros(), 5.0, 3000, 0.9, 3);
    let pose = Pose::identity("c");
    let cfg = RenderConfig::default();
    let wide_cam = FisheyeCamera::centered_equidistant(SIZE, 200.0).unwrap();
    let wide = render_image(&scene, &pose, &wide_cam, &cfg).unwrap();
    let (reduced, cam160) = reduce_fov(&wide, &wide_cam, 160.0).unwrap();
    assert_eq!(cam160, reduced_fov_camera(SIZE, SIZE, 160.0).unwrap());
    let direct = render_image(&scene, &pose, &cam160, &cfg).unwrap();
    let mask = joint_mask(&reduced, &direct);
    let p = psnr(&reduced, &direct, Some(&mask)).unwrap();
    assert!(p >= 30.0, "psnr {p}");
}

#[test]
fn reductions_nest() {
    let scene = sphere_shell(Vector3::zeros(), 5.0, 3000, 0.9, 4);
    let wide_cam = FisheyeCamera::centered_equidistant(SIZE, 200.0).unwrap();
    let wide = render_image(&scene, &Pose::identity("c"), &wide_cam, &RenderConfig::default()).unwrap();
    let (mid, mid_cam) = reduce_fov(&wide, &wide_cam, 160.0).unwrap();
    let (chained, _) = reduce_fov(&mid, &mid_cam, 120.0).unwrap();
    let (direct, _) = reduce_fov(&wide, &wide_cam, 120.0).unwrap();
    let mask = joint_mask(&chained, &direct);
    assert!(mask.iter().filter(|&&m| m).count() > (SIZE * SIZE / 2) as usize);
    let d = max_abs_diff(&chained, &direct, &mask);
    assert!(d <= 2, "max difference {d}");
}
