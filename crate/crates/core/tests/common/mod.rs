#![allow(dead_code)]

use ncpose_core::geometry::camera_line_to_world;
use ncpose_core::oracle::forward_project_nearest;
use ncpose_core::{
    backproject_pixel, project_to_pixel, Line3D, LineObservation, PinholeCamera, PlanarPose, PoseProblem,
    QuadricMirror, Vec3,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Cylindrical region `(ρ_min, ρ_max, z_min, z_max)` where scene lines
/// reflect well in each preset.
pub fn region(mirror: &QuadricMirror) -> (f64, f64, f64, f64) {
    if mirror.a() < 0.0 {
        (40.0, 150.0, -30.0, -5.0)
    } else if mirror.a() == 0.0 {
        (60.0, 150.0, -60.0, -10.0)
    } else {
        (60.0, 150.0, -60.0, 0.0)
    }
}

/// A camera-frame line whose `m` evenly spaced points all reflect, with
/// those reflection points.
pub fn camera_line(mirror: &QuadricMirror, rng: &mut ChaCha8Rng, m: usize) -> (Line3D, Vec<Vec3>) {
    let (r0, r1, z0, z1) = region(mirror);
    loop {
        let phi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let rho = rng.random_range(r0..r1);
        let q = Vec3::new(rho * phi.cos(), rho * phi.sin(), rng.random_range(z0..z1));
        let d = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let Ok(line) = Line3D::new(q, d) else { continue };
        let pts: Vec<Vec3> = (0..m)
            .map_while(|k| {
                let lam = if m == 1 { 0.0 } else { -30.0 + 60.0 * k as f64 / (m - 1) as f64 };
                forward_project_nearest(line.point(lam), mirror).ok().flatten().map(|s| s.m)
            })
            .collect();
        if pts.len() == m {
            return (line, pts);
        }
    }
}

pub fn problem_at(mirror: &QuadricMirror, rng: &mut ChaCha8Rng, truth: PlanarPose, n: usize, m: usize) -> PoseProblem {
    let obs = (0..n)
        .map(|_| {
            let (line, pts) = camera_line(mirror, rng, m);
            LineObservation::new(camera_line_to_world(&line, &truth), pts, None).unwrap()
        })
        .collect();
    PoseProblem::new(obs, *mirror, truth.z_offset).unwrap()
}

pub fn random_truth(rng: &mut ChaCha8Rng) -> PlanarPose {
    PlanarPose::new(
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        rng.random_range(-50.0..50.0),
        rng.random_range(-50.0..50.0),
        0.0,
    )
}

/// Moves every mirror point through its pixel with Gaussian noise.
pub fn with_pixel_noise(problem: &PoseProblem, sigma: f64, rng: &mut ChaCha8Rng) -> PoseProblem {
    let mirror = *problem.mirror();
    let cam = PinholeCamera::for_mirror(&mirror);
    let noise = Normal::new(0.0, sigma).unwrap();
    let obs = problem
        .observations()
        .iter()
        .map(|o| {
            let pts = o
                .mirror_points
                .iter()
                .map(|m| {
                    let u = project_to_pixel(*m, &cam).unwrap();
                    (0..10)
                        .find_map(|_| {
                            let un = [u[0] + noise.sample(rng), u[1] + noise.sample(rng)];
                            backproject_pixel(un, &cam, &mirror).ok()
                        })
                        .unwrap_or(*m)
                })
                .collect();
            LineObservation::new(o.line_world, pts, None).unwrap()
        })
        .collect();
    PoseProblem::new(obs, mirror, problem.z_offset()).unwrap()
}
