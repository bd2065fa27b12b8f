mod common;

use common::{problem_at, random_truth, with_pixel_noise};
use ncpose_core::pose::{g1, g2, g2_mean, objective, pose_error, pose_residual};
use ncpose_core::{
    curve_coefficients, estimate_pose, Error, LineObservation, PlanarPose, PoseProblem, QuadricMirror, SolverOptions,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sphere_problem(seed: u64, truth: PlanarPose) -> PoseProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    problem_at(&QuadricMirror::spheric(), &mut rng, truth, 20, 5)
}

fn truth_25() -> PlanarPose {
    PlanarPose::new(25f64.to_radians(), 12.0, -7.0, 0.0)
}

#[test]
fn g1_examples() {
    assert_eq!(g1(1.0, 0.0), 1.0);
    assert!((g1(0.6, 0.8) - 1.0).abs() < 1e-15);
    assert_eq!(g1(1.0, 1.0), 2.0);
}

#[test]
fn pose_error_examples() {
    let a = PlanarPose::new(0.3, 1.0, 2.0, 0.0);
    assert_eq!(pose_error(&a, &a), (0.0, 0.0));
    let b = PlanarPose::new(0.3 + 5f64.to_radians(), 1.0, 2.0, 0.0);
    assert!((pose_error(&b, &a).0 - 5.0).abs() < 1e-9);
    let c = PlanarPose::new(0.3, 4.0, 6.0, 0.0);
    assert!((pose_error(&c, &a).1 - 5.0).abs() < 1e-12);
    // Wrapping across ±π.
    let d = PlanarPose::new(std::f64::consts::PI - 0.01, 0.0, 0.0, 0.0);
    let e = PlanarPose::new(-std::f64::consts::PI + 0.01, 0.0, 0.0, 0.0);
    assert!((pose_error(&d, &e).0 - 0.02f64.to_degrees()).abs() < 1e-9);
}

#[test]
fn identity_residual_matches_curve_of_world_line() {
    let p = sphere_problem(3, truth_25());
    let mirror = p.mirror();
    for obs in p.observations() {
        let c = curve_coefficients(&obs.line_world, mirror).unwrap();
        for m in &obs.mirror_points {
            let r = pose_residual(1.0, 0.0, 0.0, 0.0, &obs.line_world, *m, mirror, 0.0).unwrap();
            assert!((r - c.gamma_eval(m.y, m.z)).abs() <= 1e-12, "{r}");
        }
    }
}

#[test]
fn residuals_at_truth_and_perturbed() {
    let truth = truth_25();
    let p = sphere_problem(4, truth);
    let (c, s) = (truth.theta.cos(), truth.theta.sin());
    let mirror = p.mirror();
    for obs in p.observations() {
        for m in &obs.mirror_points {
            let r = pose_residual(c, s, truth.t_x, truth.t_y, &obs.line_world, *m, mirror, 0.0).unwrap();
            assert!(r.abs() < 1e-6, "residual at truth {r}");
            let e = g2(c, s, truth.t_x, truth.t_y, &obs.line_world, *m, mirror, 0.0).unwrap();
            assert!(e < 1e-10, "g2 at truth {e}");
        }
    }
    // Sensitivity is generic rather than universal, so it is checked on the mean.
    assert!(objective(c, s, truth.t_x + 5.0, truth.t_y, &p) > 1e-4);
    assert!(objective(c, s, truth.t_x, truth.t_y, &p) < 1e-6);
}

#[test]
fn g2_separates_identity_from_a_rotated_truth() {
    let truth = PlanarPose::new(30f64.to_radians(), 0.0, 0.0, 0.0);
    let p = sphere_problem(5, truth);
    assert!(g2_mean(1.0, 0.0, 0.0, 0.0, &p) > 1e-4);
    assert!(g2_mean(truth.theta.cos(), truth.theta.sin(), 0.0, 0.0, &p) < 1e-10);
}

#[test]
fn objective_ignores_order_and_duplication() {
    let truth = truth_25();
    let p = sphere_problem(6, truth);
    let probe = (0.9, 0.3, 4.0, -2.0);
    let f = objective(probe.0, probe.1, probe.2, probe.3, &p);
    let mut reversed: Vec<LineObservation> = p.observations().to_vec();
    reversed.reverse();
    let r = PoseProblem::new(reversed.clone(), *p.mirror(), 0.0).unwrap();
    assert!((objective(probe.0, probe.1, probe.2, probe.3, &r) - f).abs() <= 1e-12 * f);
    let doubled: Vec<LineObservation> = reversed.iter().chain(p.observations()).cloned().collect();
    let d = PoseProblem::new(doubled, *p.mirror(), 0.0).unwrap();
    assert!((objective(probe.0, probe.1, probe.2, probe.3, &d) - f).abs() <= 1e-12 * f);
}

#[test]
fn problem_validation() {
    let p = sphere_problem(7, truth_25());
    let one = vec![p.observations()[0].clone()];
    assert!(matches!(PoseProblem::new(one, *p.mirror(), 0.0), Err(Error::IllPosed(_))));
    let mut off = p.observations()[0].clone();
    off.mirror_points[0].x += 1e-3;
    let obs = vec![off, p.observations()[1].clone()];
    assert!(matches!(PoseProblem::new(obs, *p.mirror(), 0.0), Err(Error::InvalidInput(_))));
    let line = p.observations()[0].line_world;
    assert!(LineObservation::new(line, vec![], None).is_err());
    let pts = p.observations()[0].mirror_points.clone();
    assert!(LineObservation::new(line, pts, Some(vec![[0.0, 0.0]])).is_err());
}

#[test]
fn recovers_noiseless_pose_from_identity() {
    let truth = truth_25();
    let p = sphere_problem(11, truth);
    let est = estimate_pose(&p, PlanarPose::identity(), &SolverOptions::default()).unwrap();
    let (rot, trans) = pose_error(&est.pose, &truth);
    assert!(rot < 0.1 && trans < 0.1, "rot {rot} trans {trans}");
    assert!(est.converged);
    assert!(est.g1_violation < 1e-8 && est.g2_violation < 1e-8);
}

#[test]
fn start_at_truth_is_a_fixed_point() {
    let truth = truth_25();
    let p = sphere_problem(12, truth);
    let est = estimate_pose(&p, truth, &SolverOptions::default()).unwrap();
    assert!(est.iterations <= 2, "{} outer iterations", est.iterations);
    let (rot, trans) = pose_error(&est.pose, &truth);
    assert!(rot < 1e-9 && trans < 1e-9, "moved by {rot} deg, {trans} cm");
    assert!(est.converged);
}

#[test]
fn recovers_random_noiseless_poses_on_every_preset() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for mirror in [QuadricMirror::spheric(), QuadricMirror::parabolic(), QuadricMirror::hyperbolic()] {
        for _ in 0..3 {
            let truth = random_truth(&mut rng);
            let p = problem_at(&mirror, &mut rng, truth, 20, 5);
            let est = estimate_pose(&p, PlanarPose::identity(), &SolverOptions::default()).unwrap();
            let (rot, trans) = pose_error(&est.pose, &truth);
            assert!(rot < 0.1 && trans < 0.1, "{mirror:?}: rot {rot} trans {trans}");
        }
    }
}

#[test]
fn noisy_estimate_is_no_worse_than_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..3 {
        let truth = random_truth(&mut rng);
        let clean = problem_at(&QuadricMirror::spheric(), &mut rng, truth, 20, 5);
        let p = with_pixel_noise(&clean, 10.0, &mut rng);
        let est = estimate_pose(&p, PlanarPose::identity(), &SolverOptions::default()).unwrap();
        let at_truth = objective(truth.theta.cos(), truth.theta.sin(), truth.t_x, truth.t_y, &p);
        assert!(est.objective_value <= at_truth, "{} > {}", est.objective_value, at_truth);
    }
}

#[test]
fn scaling_the_rotation_pair_keeps_theta() {
    for theta in [-3.0f64, -1.2, 0.0, 0.4, 2.9] {
        let (c, s) = (theta.cos(), theta.sin());
        for k in [1e-3, 0.5, 1.0, 7.0, 1e4] {
            assert!((ncpose_core::math::atan2(k * s, k * c) - theta).abs() < 1e-12);
        }
    }
}

#[test]
fn finite_difference_gradient_is_consistent() {
    let truth = truth_25();
    let p = sphere_problem(41, truth);
    let sum_sq = |x: &[f64; 4]| -> f64 {
        p.observations()
            .iter()
            .flat_map(|o| o.mirror_points.iter().map(move |m| (o, m)))
            .map(|(o, m)| pose_residual(x[0], x[1], x[2], x[3], &o.line_world, *m, p.mirror(), 0.0).unwrap().powi(2))
            .sum()
    };
    let grad = |x: &[f64; 4], h: f64| -> [f64; 4] {
        std::array::from_fn(|i| {
            let (mut a, mut b) = (*x, *x);
            a[i] += h;
            b[i] -= h;
            (sum_sq(&a) - sum_sq(&b)) / (2.0 * h)
        })
    };
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..5 {
        let t = random_truth(&mut rng);
        let x = [t.theta.cos(), t.theta.sin(), t.t_x * 0.2, t.t_y * 0.2];
        let (g, g_half) = (grad(&x, 1e-5), grad(&x, 5e-6));
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..4 {
            assert!((g[i] - g_half[i]).abs() <= 1e-4 * scale, "{g:?} vs {g_half:?}");
        }
    }
}
