mod common;

use ncpose_core::oracle::{forward_project, reflection_law_defects, reflection_plane_defect};
use ncpose_core::{backproject_pixel, project_to_pixel, PinholeCamera, QuadricMirror, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn presets() -> [QuadricMirror; 3] {
    [QuadricMirror::spheric(), QuadricMirror::parabolic(), QuadricMirror::hyperbolic()]
}

#[test]
fn reflection_law_holds_for_random_surface_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for mirror in presets() {
        let (_, _, z0, z1) = common::region(&mirror);
        let mut checked = 0;
        while checked < 500 {
            let phi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let Some(m) = mirror.surface_point(phi, rng.random_range(z0 - 20.0..z1)) else { continue };
            let v_i = m - mirror.cop();
            let (angle, coplanar) = reflection_law_defects(v_i, mirror.normal(m).unwrap()).unwrap();
            assert!(angle < 1e-9 && coplanar < 1e-9, "{angle} {coplanar}");
            checked += 1;
        }
    }
}

#[test]
fn oracle_solutions_satisfy_every_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for mirror in presets() {
        let cam = PinholeCamera::for_mirror(&mirror);
        let mut found = 0;
        while found < 40 {
            let (line, pts) = common::camera_line(&mirror, &mut rng, 1);
            let p = line.point(0.0);
            let sols = forward_project(p, &mirror).unwrap();
            assert_eq!(sols[0].m, pts[0]);
            for s in &sols {
                assert!(mirror.eval(s.m).abs() < mirror.surface_tolerance());
                assert!(s.residual < 1e-9);
                assert!(s.v_i.cross((s.m - mirror.cop()).normalize()).norm() < 1e-12);
                let (angle, coplanar) = reflection_law_defects(s.v_i, mirror.normal(s.m).unwrap()).unwrap();
                assert!(angle < 1e-9 && coplanar < 1e-9);
                assert!(reflection_plane_defect(&mirror, s.m, p) < 1e-8);
            }
            // Sorted by distance from the COP.
            for w in sols.windows(2) {
                assert!((w[0].m - mirror.cop()).norm() <= (w[1].m - mirror.cop()).norm());
            }
            let m = sols[0].m;
            let back = backproject_pixel(project_to_pixel(m, &cam).unwrap(), &cam, &mirror).unwrap();
            assert!((back - m).norm() < 1e-7, "{back:?} vs {m:?}");
            found += 1;
        }
    }
}

#[test]
fn point_on_the_reflected_ray_gives_the_same_mirror_point() {
    let mirror = QuadricMirror::spheric();
    let p = Vec3::new(40.0, 40.0, 40.0);
    let sols = forward_project(p, &mirror).unwrap();
    assert!(!sols.is_empty());
    let m = sols[0].m;
    let closer = m + (p - m) * 0.5;
    let again = forward_project(closer, &mirror).unwrap();
    assert!(again.iter().any(|s| (s.m - m).norm() < 1e-6));
}
