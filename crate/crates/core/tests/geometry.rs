use ncpose_core::geometry::{camera_line_to_world, camera_to_world, transform_line, transform_point};
use ncpose_core::{Line3D, PlanarPose, QuadricMirror, Vec3};
use proptest::prelude::*;

fn arb_vec(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn arb_pose() -> impl Strategy<Value = PlanarPose> {
    (-3.2f64..3.2, -60.0f64..60.0, -60.0f64..60.0, -20.0f64..20.0).prop_map(|(t, x, y, z)| PlanarPose::new(t, x, y, z))
}

proptest! {
    #[test]
    fn point_transform_round_trips(p in arb_vec(200.0), pose in arb_pose()) {
        let back = camera_to_world(transform_point(p, &pose), &pose);
        prop_assert!((back - p).norm() < 1e-10);
    }

    #[test]
    fn line_transform_round_trips(q in arb_vec(200.0), d in arb_vec(1.0), pose in arb_pose()) {
        prop_assume!(d.norm() > 1e-3);
        let line = Line3D::new(q, d).unwrap();
        let moved = transform_line(&line, &pose);
        prop_assert!((moved.d().norm() - 1.0).abs() < 1e-12);
        let back = camera_line_to_world(&moved, &pose);
        prop_assert!((back.q() - line.q()).norm() < 1e-10);
        prop_assert!((back.d() - line.d()).norm() < 1e-12);
        // Points of the line map to points of the moved line.
        prop_assert!(moved.distance_to(transform_point(line.point(17.0), &pose)) < 1e-9);
    }

    #[test]
    fn normal_is_the_gradient(phi in -3.1f64..3.1, z in -60.0f64..20.0, which in 0usize..3) {
        let mirror = [QuadricMirror::spheric(), QuadricMirror::parabolic(), QuadricMirror::hyperbolic()][which];
        let p = Vec3::new(30.0 * phi.cos(), 25.0 * phi.sin(), z);
        let n = mirror.normal_unchecked(p);
        let h = 1e-4;
        for (i, e) in [Vec3::X, Vec3::Y, Vec3::Z].into_iter().enumerate() {
            let fd = (mirror.eval(p + e * h) - mirror.eval(p - e * h)) / (2.0 * h);
            // The normal is half the gradient of the mirror function.
            prop_assert!((0.5 * fd - n[i]).abs() < 1e-6 * (1.0 + n.norm()));
        }
    }
}
