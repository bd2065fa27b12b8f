//! Planar pose from known world lines and their reflection points.
//!
//! The world lines are moved into the camera frame by the candidate pose
//! and the reflection-curve polynomial of each moved line is evaluated at
//! the observed mirror points. The pose minimizes the mean absolute value
//! of those residuals subject to
//!
//! * `g1 = cθ² + sθ² = 1`, and
//! * `g2 = mean (m_x − x(m_y, m_z))² = 0`, the `x` consistency of curve
//!   membership,
//!
//! with the rotation carried as the pair `(cθ, sθ)`. Constraints are handled
//! by an augmented Lagrangian. Each inner problem is solved by damped steps
//! that minimize the Lagrangian with all residuals linearized, the smoothed
//! absolute value being handled by iteratively reweighted least squares.
//! Derivatives are central finite differences of the composed residual.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::curve::{curve_coefficients, SENTINEL_RESIDUAL};
use crate::error::{Error, Result};
use crate::geometry::{transform_line_cs, Line3D, PlanarPose, QuadricMirror};
use crate::linalg::solve;
use crate::math::{self, Vec3};
use crate::seed::{linear_seed, ray_residuals, reflected_rays, Ray};

/// A known world line and the mirror points (camera frame) observed on its
/// reflection curve.
#[derive(Debug, Clone, PartialEq)]
pub struct LineObservation {
    pub line_world: Line3D,
    pub mirror_points: Vec<Vec3>,
    pub pixels: Option<Vec<[f64; 2]>>,
}

impl LineObservation {
    pub fn new(line_world: Line3D, mirror_points: Vec<Vec3>, pixels: Option<Vec<[f64; 2]>>) -> Result<Self> {
        if mirror_points.is_empty() {
            return Err(Error::InvalidInput("observation without mirror points"));
        }
        if let Some(px) = &pixels {
            if px.len() != mirror_points.len() {
                return Err(Error::InvalidInput("pixel and mirror point counts differ"));
            }
        }
        Ok(LineObservation { line_world, mirror_points, pixels })
    }
}

/// Maximum `|mirror_eval|` accepted for an observed mirror point.
pub const ON_MIRROR_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PoseProblem {
    observations: Vec<LineObservation>,
    mirror: QuadricMirror,
    z_offset: f64,
}

impl PoseProblem {
    /// Needs at least two lines and three points in total.
    pub fn new(observations: Vec<LineObservation>, mirror: QuadricMirror, z_offset: f64) -> Result<Self> {
        if observations.len() < 2 {
            return Err(Error::IllPosed("at least two lines are required"));
        }
        let total: usize = observations.iter().map(|o| o.mirror_points.len()).sum();
        if total < 3 {
            return Err(Error::IllPosed("at least three mirror points are required"));
        }
        for o in &observations {
            if o.mirror_points.iter().any(|m| !(mirror.eval(*m).abs() < ON_MIRROR_TOLERANCE)) {
                return Err(Error::InvalidInput("mirror point is not on the mirror"));
            }
        }
        Ok(PoseProblem { observations, mirror, z_offset })
    }

    pub fn observations(&self) -> &[LineObservation] {
        &self.observations
    }

    pub fn mirror(&self) -> &QuadricMirror {
        &self.mirror
    }

    pub fn z_offset(&self) -> f64 {
        self.z_offset
    }

    pub fn total_points(&self) -> usize {
        self.observations.iter().map(|o| o.mirror_points.len()).sum()
    }
}

/// Solver settings; all fields have defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SolverOptions {
    /// Stop when the objective changes by less than this fraction of itself
    /// (or absolutely, below 1) between outer iterations.
    pub tol_f: f64,
    /// Constraint violation accepted as satisfied.
    pub tol_c: f64,
    pub max_outer: usize,
    /// Damped linearized steps per inner solve.
    pub max_inner: usize,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// `ε` of the smoothed absolute value `√(r² + ε²) − ε`.
    pub smoothing_eps: f64,
    /// Number of rotation seeds spread evenly around the initial angle;
    /// 1 starts only from the initial pose.
    pub theta_starts: usize,
    /// Enforce the `x` consistency per point instead of on the mean.
    pub per_point_g2: bool,
    /// Add the closed-form reflected-ray pose to the starting candidates.
    pub linear_seed: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_f: 1e-10,
            tol_c: 1e-8,
            max_outer: 50,
            max_inner: 40,
            fd_step: 1e-7,
            smoothing_eps: 1e-12,
            theta_starts: 8,
            per_point_g2: false,
            linear_seed: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoseEstimate {
    pub pose: PlanarPose,
    /// Mean `|γ_r|` at `pose`.
    pub objective_value: f64,
    /// `|cθ² + sθ² − 1|` at the final iterate, before projecting onto the circle.
    pub g1_violation: f64,
    /// `g2` at `pose`.
    pub g2_violation: f64,
    /// Outer iterations performed.
    pub iterations: usize,
    pub converged: bool,
}

fn translation(tx: f64, ty: f64, z_offset: f64) -> Vec3 {
    Vec3::new(tx, ty, z_offset)
}

/// `γ_r` at one mirror point: the normalized reflection-curve polynomial of
/// the world line moved by `(ct, st, tx, ty)`, evaluated at `(m_y, m_z)`.
#[allow(clippy::too_many_arguments)]
pub fn pose_residual(
    ct: f64,
    st: f64,
    tx: f64,
    ty: f64,
    obs_line: &Line3D,
    m: Vec3,
    mirror: &QuadricMirror,
    z_offset: f64,
) -> Result<f64> {
    let line = transform_line_cs(obs_line, ct, st, translation(tx, ty, z_offset)).ok_or(Error::DegenerateLine)?;
    Ok(curve_coefficients(&line, mirror)?.gamma_eval(m.y, m.z))
}

/// `cθ² + sθ²`.
pub fn g1(ct: f64, st: f64) -> f64 {
    ct * ct + st * st
}

/// `(m_x − x(m_y, m_z))²` for the moved line, in cm². A pole of `x(y, z)`
/// at the point yields the sentinel `(SENTINEL_RESIDUAL · L)²`.
#[allow(clippy::too_many_arguments)]
pub fn g2(
    ct: f64,
    st: f64,
    tx: f64,
    ty: f64,
    obs_line: &Line3D,
    m: Vec3,
    mirror: &QuadricMirror,
    z_offset: f64,
) -> Result<f64> {
    let line = transform_line_cs(obs_line, ct, st, translation(tx, ty, z_offset)).ok_or(Error::DegenerateLine)?;
    let c = curve_coefficients(&line, mirror)?;
    let e = match c.x_from_yz(m.y, m.z) {
        Ok(x) => m.x - x,
        Err(_) => SENTINEL_RESIDUAL * c.length_scale,
    };
    Ok(e * e)
}

/// Per-point residuals at one parameter vector. `xerr` is in units of the
/// mirror's length scale.
struct Evaluation {
    gamma: Vec<f64>,
    xerr: Vec<f64>,
}

fn evaluate(problem: &PoseProblem, p: &[f64; 4]) -> Evaluation {
    let n = problem.total_points();
    let mut gamma = Vec::with_capacity(n);
    let mut xerr = Vec::with_capacity(n);
    let t = translation(p[2], p[3], problem.z_offset);
    let length = problem.mirror.length_scale();
    for obs in &problem.observations {
        let coeffs = transform_line_cs(&obs.line_world, p[0], p[1], t)
            .ok_or(Error::DegenerateLine)
            .and_then(|l| curve_coefficients(&l, &problem.mirror));
        match coeffs {
            Ok(c) => {
                for m in &obs.mirror_points {
                    let g = c.gamma_eval(m.y, m.z);
                    gamma.push(if g.is_finite() { g } else { SENTINEL_RESIDUAL });
                    let e = match c.x_from_yz(m.y, m.z) {
                        Ok(x) if x.is_finite() => (m.x - x) / length,
                        _ => SENTINEL_RESIDUAL,
                    };
                    xerr.push(e);
                }
            }
            Err(_) => {
                for _ in &obs.mirror_points {
                    gamma.push(SENTINEL_RESIDUAL);
                    xerr.push(SENTINEL_RESIDUAL);
                }
            }
        }
    }
    Evaluation { gamma, xerr }
}

fn mean_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64
}

fn mean_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
}

/// Mean `|γ_r|` over every observed point. Points whose residual cannot be
/// evaluated contribute [`SENTINEL_RESIDUAL`].
pub fn objective(ct: f64, st: f64, tx: f64, ty: f64, problem: &PoseProblem) -> f64 {
    mean_abs(&evaluate(problem, &[ct, st, tx, ty]).gamma)
}

/// Mean of [`g2`] over every observed point, in cm².
pub fn g2_mean(ct: f64, st: f64, tx: f64, ty: f64, problem: &PoseProblem) -> f64 {
    let l = problem.mirror.length_scale();
    mean_sq(&evaluate(problem, &[ct, st, tx, ty]).xerr) * l * l
}

/// Absolute rotation error in degrees and planar translation error.
pub fn pose_error(est: &PlanarPose, truth: &PlanarPose) -> (f64, f64) {
    let rot = math::wrap_angle(est.theta - truth.theta).abs().to_degrees();
    let dx = est.t_x - truth.t_x;
    let dy = est.t_y - truth.t_y;
    (rot, math::sqrt(dx * dx + dy * dy))
}

/// Finite-difference Jacobian of a residual map.
fn fd_jacobian<const N: usize>(
    x: &[f64; N],
    step: f64,
    mut residuals: impl FnMut(&[f64; N]) -> Vec<f64>,
) -> Vec<[f64; N]> {
    let mut jac: Vec<[f64; N]> = Vec::new();
    for i in 0..N {
        let h = step * x[i].abs().max(1.0);
        let mut xp = *x;
        let mut xm = *x;
        xp[i] += h;
        xm[i] -= h;
        let rp = residuals(&xp);
        let rm = residuals(&xm);
        if jac.is_empty() {
            jac.resize(rp.len(), [0.0; N]);
        }
        for (k, row) in jac.iter_mut().enumerate() {
            row[i] = (rp[k] - rm[k]) / (2.0 * h);
        }
    }
    jac
}

/// Damped Gauss-Newton step `(JᵀJ + λ diag(JᵀJ)) δ = −Jᵀr`.
fn lm_step<const N: usize>(jac: &[[f64; N]], r: &[f64], lambda: f64) -> Option<[f64; N]> {
    let mut a = [[0.0; N]; N];
    let mut g = [0.0; N];
    for (row, rk) in jac.iter().zip(r) {
        for i in 0..N {
            g[i] -= row[i] * rk;
            for j in 0..N {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    let mut trace = 0.0;
    for (i, ai) in a.iter().enumerate() {
        trace += ai[i];
    }
    for (i, ai) in a.iter_mut().enumerate() {
        ai[i] += lambda * ai[i] + 1e-14 * trace / N as f64 + 1e-300;
    }
    solve(a, g)
}

/// Augmented-Lagrangian multipliers and penalties, one pair per constraint.
///
/// The objective enters the Lagrangian divided by `f_ref`, so penalties and
/// their cap mean the same thing whatever the scale of the curve residuals.
struct Multipliers {
    f_ref: f64,
    mu1: f64,
    rho1: f64,
    mu2: Vec<f64>,
    rho2: f64,
}

/// Smoothed absolute value `√(r² + ε²) − ε`.
#[derive(Clone, Copy)]
struct Smoothing {
    eps: f64,
}

impl Smoothing {
    fn abs(&self, r: f64) -> f64 {
        math::sqrt(r * r + self.eps * self.eps) - self.eps
    }

    /// IRLS weight: the surrogate `r²/(2w) + w/2` touches `√(r² + ε²)` at `r`.
    fn weight(&self, r: f64) -> f64 {
        math::sqrt(r * r + self.eps * self.eps).max(1e-300)
    }
}

fn constraints(e: &Evaluation, x: &[f64; 4], per_point: bool) -> (f64, Vec<f64>) {
    let h1 = g1(x[0], x[1]) - 1.0;
    let h2 = if per_point { e.xerr.clone() } else { alloc::vec![mean_sq(&e.xerr)] };
    (h1, h2)
}

fn lagrangian(e: &Evaluation, x: &[f64; 4], mult: &Multipliers, smooth: Smoothing, per_point: bool) -> f64 {
    let k = e.gamma.len() as f64;
    let f: f64 = e.gamma.iter().map(|r| smooth.abs(*r)).sum::<f64>() / (k * mult.f_ref);
    let (h1, h2) = constraints(e, x, per_point);
    let mut phi = f + mult.mu1 * h1 + 0.5 * mult.rho1 * h1 * h1;
    for (mu, h) in mult.mu2.iter().zip(&h2) {
        phi += mu * h + 0.5 * mult.rho2 * h * h;
    }
    phi
}

/// Minimizer of the Lagrangian with every residual linearized at the
/// current iterate, plus a damping term `λ Σ D_ii δ_i²`.
///
/// The smoothed absolute values are handled by iteratively reweighted least
/// squares on the linear model, which needs no further function
/// evaluations.
#[allow(clippy::too_many_arguments)]
fn linearized_step(
    e: &Evaluation,
    x: &[f64; 4],
    jac: &[[f64; 4]],
    mult: &Multipliers,
    smooth: Smoothing,
    lambda: f64,
    per_point: bool,
) -> Option<[f64; 4]> {
    let k = e.gamma.len();
    let kf = k as f64;
    let (jg, je) = jac.split_at(k);
    // Least-squares rows that do not depend on the IRLS weights.
    let mut fixed: Vec<([f64; 4], f64)> = Vec::new();
    let h1 = g1(x[0], x[1]) - 1.0;
    let s1 = math::sqrt(0.5 * mult.rho1);
    fixed.push(([s1 * 2.0 * x[0], s1 * 2.0 * x[1], 0.0, 0.0], s1 * (h1 + mult.mu1 / mult.rho1)));
    if mult.rho2 > 0.0 {
        let s2 = math::sqrt(0.5 * mult.rho2);
        if per_point {
            for ((ek, jk), mu) in e.xerr.iter().zip(je).zip(&mult.mu2) {
                fixed.push(([s2 * jk[0], s2 * jk[1], s2 * jk[2], s2 * jk[3]], s2 * (ek + mu / mult.rho2)));
            }
        } else {
            let w = math::sqrt(mult.mu2[0].max(0.0) / kf);
            let mut grad = [0.0; 4];
            for (ek, jk) in e.xerr.iter().zip(je) {
                fixed.push(([w * jk[0], w * jk[1], w * jk[2], w * jk[3]], w * ek));
                for i in 0..4 {
                    grad[i] += 2.0 * ek * jk[i] / kf;
                }
            }
            let h2 = mean_sq(&e.xerr);
            fixed.push(([s2 * grad[0], s2 * grad[1], s2 * grad[2], s2 * grad[3]], s2 * h2));
        }
    }
    let mut base = [[0.0; 4]; 4];
    let mut base_rhs = [0.0; 4];
    for (row, r) in &fixed {
        for i in 0..4 {
            base_rhs[i] -= row[i] * r;
            for j in 0..4 {
                base[i][j] += row[i] * row[j];
            }
        }
    }
    let mut delta = [0.0; 4];
    let mut damping: Option<[f64; 4]> = None;
    for _ in 0..IRLS_ITERATIONS {
        let mut a = base;
        let mut rhs = base_rhs;
        for (gk, jk) in e.gamma.iter().zip(jg) {
            let lin = gk + jk.iter().zip(&delta).map(|(j, d)| j * d).sum::<f64>();
            let w = 1.0 / (2.0 * kf * mult.f_ref * smooth.weight(lin));
            for i in 0..4 {
                rhs[i] -= w * jk[i] * gk;
                for j in 0..4 {
                    a[i][j] += w * jk[i] * jk[j];
                }
            }
        }
        let d = *damping.get_or_insert_with(|| {
            let trace: f64 = (0..4).map(|i| a[i][i]).sum();
            core::array::from_fn(|i| a[i][i] + 1e-12 * trace + 1e-300)
        });
        for i in 0..4 {
            a[i][i] += lambda * d[i];
        }
        let next = solve(a, rhs)?;
        let change = next.iter().zip(&delta).map(|(n, o)| (n - o).abs()).fold(0.0f64, f64::max);
        let size = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        delta = next;
        if change <= 1e-12 * size.max(1e-300) {
            break;
        }
    }
    Some(delta)
}

/// IRLS sweeps per linearized subproblem.
const IRLS_ITERATIONS: usize = 60;

/// An inner solve stops once a step lowers the Lagrangian by less than this
/// fraction. Near an L1 kink the steps shrink only linearly, and polishing
/// the last digits there costs far more than it returns.
const INNER_REL_GAIN: f64 = 1e-8;

/// Damped sequential minimization of the linearized Lagrangian; a step is
/// kept only if it lowers the smoothed Lagrangian itself.
fn inner_solve(
    problem: &PoseProblem,
    x0: [f64; 4],
    mult: &Multipliers,
    smooth: Smoothing,
    opts: &SolverOptions,
) -> [f64; 4] {
    let per_point = opts.per_point_g2;
    let mut x = x0;
    let mut e = evaluate(problem, &x);
    let mut phi = lagrangian(&e, &x, mult, smooth, per_point);
    let mut lambda = 1e-6;
    for _ in 0..opts.max_inner {
        let jac = fd_jacobian(&x, opts.fd_step, |p| {
            let ep = evaluate(problem, p);
            let mut r = ep.gamma;
            r.extend(ep.xerr);
            r
        });
        let mut improved = false;
        for _ in 0..12 {
            let Some(step) = linearized_step(&e, &x, &jac, mult, smooth, lambda, per_point) else {
                lambda = (lambda * 10.0).max(1e-6);
                continue;
            };
            let cand: [f64; 4] = core::array::from_fn(|i| x[i] + step[i]);
            let ec = evaluate(problem, &cand);
            let phic = lagrangian(&ec, &cand, mult, smooth, per_point);
            if phic < phi {
                let gain = phi - phic;
                x = cand;
                e = ec;
                lambda = (lambda / 10.0).max(1e-12);
                let small_step = step.iter().zip(&x).all(|(d, v)| d.abs() <= 1e-12 * v.abs().max(1.0));
                improved = gain > INNER_REL_GAIN * phi.abs() && !small_step;
                phi = phic;
                break;
            }
            lambda = (lambda * 10.0).max(1e-6);
        }
        if !improved {
            break;
        }
    }
    x
}

/// Least-squares fit of `(θ, t_x, t_y)` to the reflected-ray incidence
/// distances from one start. Returns the refined parameters and their RMS
/// distance in cm.
fn refine_on_rays(
    problem: &PoseProblem,
    rays: &[Ray],
    start: [f64; 3],
    opts: &SolverOptions,
    iterations: usize,
) -> ([f64; 3], f64) {
    let resid = |p: &[f64; 3]| ray_residuals(problem, rays, p);
    let mut x = start;
    let mut r = resid(&x);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    for _ in 0..iterations {
        let jac = fd_jacobian(&x, opts.fd_step, resid);
        let mut improved = false;
        for _ in 0..10 {
            let Some(step) = lm_step(&jac, &r, lambda) else {
                lambda *= 10.0;
                continue;
            };
            let cand = [x[0] + step[0], x[1] + step[1], x[2] + step[2]];
            let rc = resid(&cand);
            let cc: f64 = rc.iter().map(|v| v * v).sum();
            if cc < cost {
                improved = (cost - cc) > 1e-14 * cost;
                x = cand;
                r = rc;
                cost = cc;
                lambda = (lambda / 3.0).max(1e-12);
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (x, math::sqrt(cost / r.len().max(1) as f64))
}

/// g2 must shrink by this factor per outer iteration to count as progress.
const INFEASIBLE_RATIO: f64 = 0.5;
/// Outer iterations without g2 progress before the constraint is treated as
/// infeasible.
const INFEASIBLE_OUTER: usize = 2;
const MAX_PENALTY: f64 = 1e10;

/// Minimizes mean `|γ_r|` subject to `g1 = 1` and `g2 = 0`.
///
/// The solve starts from whichever of `init`, `theta_starts` rotations
/// around it and the closed-form incidence seed best fits the reflected
/// rays. With noisy points `g2 = 0` is usually out of reach; once it stops
/// improving the constraint is released and the objective is minimized
/// under `g1` alone.
///
/// Returns the final iterate; `converged` is false when either constraint
/// is not met to `tol_c` or `max_outer` is reached first.
pub fn estimate_pose(problem: &PoseProblem, init: PlanarPose, opts: &SolverOptions) -> Result<PoseEstimate> {
    if problem.observations.len() < 2 || problem.total_points() < 3 {
        return Err(Error::IllPosed("at least two lines and three points are required"));
    }
    let z_offset = problem.z_offset;

    // Basin selection on the reflected-ray distances: the initial pose,
    // rotations spread around it and the closed-form seed are refined and
    // the closest fit wins. A solve started at the optimum does not move.
    let init_score = {
        let e = evaluate(problem, &[math::cos(init.theta), math::sin(init.theta), init.t_x, init.t_y]);
        mean_abs(&e.gamma) + mean_abs(&e.xerr)
    };
    let mut start = [init.theta, init.t_x, init.t_y];
    if init_score > 1e-12 {
        let rays = reflected_rays(problem);
        let mut starts: Vec<[f64; 3]> = (0..opts.theta_starts.max(1))
            .map(|k| [init.theta + 2.0 * PI * k as f64 / opts.theta_starts.max(1) as f64, init.t_x, init.t_y])
            .collect();
        if opts.linear_seed {
            starts.extend(linear_seed(problem, &rays));
        }
        let mut best: Option<([f64; 3], f64)> = None;
        for s0 in starts {
            let cand = refine_on_rays(problem, &rays, s0, opts, 30);
            if best.as_ref().is_none_or(|b| cand.1 < b.1) {
                best = Some(cand);
            }
        }
        if let Some((p, _)) = best {
            start = p;
        }
    }

    let mut x = [math::cos(start[0]), math::sin(start[0]), start[1], start[2]];
    let per_point = opts.per_point_g2;
    let l2 = problem.mirror.length_scale() * problem.mirror.length_scale();
    let violations = |h1: f64, h2: &[f64]| {
        let v2 = if per_point { h2.iter().fold(0.0f64, |m, v| m.max(v * v)) } else { h2[0] };
        (h1.abs(), v2 * l2)
    };
    let e = evaluate(problem, &x);
    let mut f_prev = mean_abs(&e.gamma);
    let (h1, h2) = constraints(&e, &x, per_point);
    let (mut v1_prev, mut v2_prev) = violations(h1, &h2);
    let rho0 = 10.0;
    let mut mult = Multipliers {
        f_ref: f_prev.max(1.0),
        mu1: 0.0,
        rho1: rho0,
        mu2: alloc::vec![0.0; if per_point { problem.total_points() } else { 1 }],
        rho2: rho0,
    };
    let mut smooth = Smoothing { eps: opts.smoothing_eps };
    let mut iterations = 0;
    let mut converged = false;
    // Iterate, g2 level and g2 multiplier state from which the constraint
    // last made progress.
    let mut anchor: Option<([f64; 4], f64)> = None;
    let mut g2_stalls = 0;
    let mut g2_frozen = false;
    while iterations < opts.max_outer {
        iterations += 1;
        let x_new = inner_solve(problem, x, &mult, smooth, opts);
        let moved = x_new.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        x = x_new;
        let e = evaluate(problem, &x);
        let f = mean_abs(&e.gamma);
        let (h1, h2) = constraints(&e, &x, per_point);
        let (v1, v2) = violations(h1, &h2);
        let final_eps = smooth.eps <= opts.smoothing_eps;
        let settled = (f_prev - f).abs() < opts.tol_f * f.abs().max(1.0);
        if final_eps && settled && v1 < opts.tol_c && (v2 < opts.tol_c || g2_frozen) {
            converged = v2 < opts.tol_c;
            break;
        }
        if final_eps && settled && moved == 0.0 {
            break;
        }
        // With noisy points g2 = 0 has no solution, and raising its penalty
        // without bound only trades the objective for x consistency. When
        // g2 stops improving, the solve returns to the iterate where it last
        // improved, freezes that g2 multiplier and penalty and finishes the
        // remaining constraint alone.
        if !g2_frozen {
            match &anchor {
                Some((_, v2_ref)) if v2 >= opts.tol_c && v2 > INFEASIBLE_RATIO * v2_ref => {
                    g2_stalls += 1;
                    if g2_stalls >= INFEASIBLE_OUTER {
                        let (xa, _) = anchor.take().expect("anchor is set");
                        x = xa;
                        mult.mu2.iter_mut().for_each(|m| *m = 0.0);
                        mult.rho2 = 0.0;
                        g2_frozen = true;
                        f_prev = mean_abs(&evaluate(problem, &x).gamma);
                        continue;
                    }
                }
                _ => {
                    anchor = Some((x, v2));
                    g2_stalls = 0;
                }
            }
        }
        mult.mu1 += mult.rho1 * h1;
        if !g2_frozen {
            for (mu, h) in mult.mu2.iter_mut().zip(&h2) {
                *mu += mult.rho2 * h;
            }
            if v2 >= opts.tol_c && v2 > 0.25 * v2_prev {
                mult.rho2 = (mult.rho2 * 10.0).min(MAX_PENALTY);
            }
        }
        if v1 >= opts.tol_c && v1 > 0.25 * v1_prev {
            mult.rho1 = (mult.rho1 * 10.0).min(MAX_PENALTY);
        }
        v1_prev = v1;
        v2_prev = v2;
        smooth.eps = (smooth.eps * 1e-2).max(opts.smoothing_eps);
        f_prev = f;
    }

    let g1_violation = (g1(x[0], x[1]) - 1.0).abs();
    let theta = math::atan2(x[1], x[0]);
    let pose = PlanarPose::new(theta, x[2], x[3], z_offset).canonicalize();
    let final_eval = evaluate(problem, &[math::cos(theta), math::sin(theta), x[2], x[3]]);
    let objective_value = mean_abs(&final_eval.gamma);
    let g2_violation = if opts.per_point_g2 {
        final_eval.xerr.iter().fold(0.0f64, |m, v| m.max(v * v)) * l2
    } else {
        mean_sq(&final_eval.xerr) * l2
    };
    let converged = converged && g1_violation < opts.tol_c && g2_violation < opts.tol_c;
    Ok(PoseEstimate { pose, objective_value, g1_violation, g2_violation, iterations, converged })
}
