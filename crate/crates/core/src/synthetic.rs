//! Deterministic Gaussian scenes for tests, fixtures and demos.

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::splat::Gaussian3D;

/// Compact cluster of `count` Gaussians in a ball of radius 0.5 around `(0, 0, 4)`.
pub fn central_object(count: usize, seed: u64) -> Vec<Gaussian3D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let offset = loop {
                let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                if v.norm_squared() <= 1.0 {
                    break v * 0.5;
                }
            };
            let scale = Vector3::new(rng.random_range(0.03..0.1), rng.random_range(0.03..0.1), rng.random_range(0.03..0.1));
            let rotation = UnitQuaternion::from_euler_angles(
                rng.random_range(-3.1..3.1),
                rng.random_range(-1.5..1.5),
                rng.random_range(-3.1..3.1),
            );
            let color = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            Gaussian3D::new(Vector3::new(0.0, 0.0, 4.0) + offset, scale, rotation, rng.random_range(0.5..1.0), color)
                .expect("valid by construction")
        })
        .collect()
}

/// Unit directions on a Fibonacci sphere.
pub fn fibonacci_sphere(count: usize) -> Vec<Vector3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Flat Gaussians tiling a sphere of `radius` around `center`, each facing
/// the center. Colors vary smoothly with direction; `seed` jitters positions
/// by a tenth of the spacing.
pub fn sphere_shell(center: Vector3<f64>, radius: f64, count: usize, opacity: f64, seed: u64) -> Vec<Gaussian3D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = radius * (4.0 * std::f64::consts::PI / count as f64).sqrt();
    let sigma = 0.6 * spacing;
    fibonacci_sphere(count)
        .into_iter()
        .map(|dir| {
            let jitter = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let tangent = (jitter - dir * dir.dot(&jitter)) * 0.1 * spacing;
            let normal = (dir * radius + tangent).normalize();
            // local z is the thin axis
            let rotation = UnitQuaternion::rotation_between(&Vector3::z(), &normal)
                .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI));
            let color = [0.5 + 0.4 * normal.x, 0.5 + 0.4 * normal.y, 0.5 + 0.4 * (3.0 * normal.z).sin()];
            Gaussian3D::new(center + normal * radius, Vector3::new(sigma, sigma, 0.1 * sigma), rotation, opacity, color)
                .expect("valid by construction")
        })
        .collect()
}

/// Opaque enclosing shell of radius 8 plus a central object, for depth fixtures.
pub fn depth_scene(seed: u64) -> Vec<Gaussian3D> {
    let mut g = sphere_shell(Vector3::zeros(), 8.0, 6000, 1.0, seed);
    g.extend(central_object(300, seed.wrapping_add(1)));
    g
}
