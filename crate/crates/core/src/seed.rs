//! Starting poses for the planar pose solver.
//!
//! Each observed mirror point `m` fixes its reflected viewing ray
//! `m + s v`, independently of the pose. The correct pose moves every world
//! line onto a line that meets the reflected rays of its points, which gives
//! the incidence condition `(m − R q − t) · (v × R d) = 0`. In the planar
//! case that condition is linear in the monomials
//! `1, c, s, t_x, t_y, c t_x, c t_y, s t_x, s t_y, c² − s², 2cs`, so a
//! linear least-squares solve yields a pose without any starting guess.
//! Signed ray-to-line distances then give a cheap residual for refining
//! candidate starts.

use alloc::vec::Vec;

use crate::linalg::solve;
use crate::math::{self, Vec3};
use crate::oracle::unit_reflection;
use crate::pose::PoseProblem;

/// One observed point with its reflected ray direction.
pub(crate) struct Ray {
    pub line: usize,
    pub m: Vec3,
    pub v: Vec3,
}

pub(crate) fn reflected_rays(problem: &PoseProblem) -> Vec<Ray> {
    let mut rays = Vec::new();
    for (i, obs) in problem.observations().iter().enumerate() {
        for m in &obs.mirror_points {
            if let Some(v) = unit_reflection(problem.mirror(), *m) {
                rays.push(Ray { line: i, m: *m, v });
            }
        }
    }
    rays
}

fn rot(c: f64, s: f64, v: Vec3) -> Vec3 {
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

/// Closed-form `(θ, t_x, t_y)` from the linearized incidence conditions.
pub(crate) fn linear_seed(problem: &PoseProblem, rays: &[Ray]) -> Option<[f64; 3]> {
    const U: usize = 10;
    let l = problem.mirror().length_scale();
    let z0 = problem.z_offset() / l;
    let mut ata = [[0.0; U]; U];
    let mut atb = [0.0; U];
    for ray in rays {
        let line = &problem.observations()[ray.line].line_world;
        let (q, d) = (line.q() / l, line.d());
        let m = ray.m / l;
        let v = ray.v;
        // R q = Q0 + c Qc + s Qs, with the z offset folded into Q0.
        let q0 = Vec3::new(0.0, 0.0, q.z + z0);
        let qc = Vec3::new(q.x, q.y, 0.0);
        let qs = Vec3::new(-q.y, q.x, 0.0);
        let n0 = v.cross(Vec3::new(0.0, 0.0, d.z));
        let nc = v.cross(Vec3::new(d.x, d.y, 0.0));
        let ns = v.cross(Vec3::new(-d.y, d.x, 0.0));
        // Coefficients of 1, c, s, tx, ty, c tx, c ty, s tx, s ty, c²−s², 2cs.
        let row = [
            m.dot(n0) - q0.dot(n0) - 0.5 * (qc.dot(nc) + qs.dot(ns)),
            m.dot(nc) - q0.dot(nc) - qc.dot(n0),
            m.dot(ns) - q0.dot(ns) - qs.dot(n0),
            -n0.x,
            -n0.y,
            -nc.x,
            -nc.y,
            -ns.x,
            -ns.y,
            -0.5 * (qc.dot(nc) - qs.dot(ns)),
            -0.5 * (qc.dot(ns) + qs.dot(nc)),
        ];
        let norm = row.iter().map(|r| r * r).sum::<f64>();
        if !(norm > 0.0) {
            continue;
        }
        let w = 1.0 / norm;
        for i in 0..U {
            atb[i] -= w * row[i + 1] * row[0];
            for j in 0..U {
                ata[i][j] += w * row[i + 1] * row[j + 1];
            }
        }
    }
    let trace: f64 = (0..U).map(|i| ata[i][i]).sum();
    for (i, a) in ata.iter_mut().enumerate() {
        a[i] += 1e-12 * trace;
    }
    let w = solve(ata, atb)?;
    let r = math::sqrt(w[0] * w[0] + w[1] * w[1]);
    if !(r > 0.0) {
        return None;
    }
    let (c, s) = (w[0] / r, w[1] / r);
    let tx = 0.5 * (w[2] + c * w[4] + s * w[6]);
    let ty = 0.5 * (w[3] + c * w[5] + s * w[7]);
    Some([math::atan2(s, c), tx * l, ty * l])
}

/// Signed distances between each reflected ray and its moved world line.
pub(crate) fn ray_residuals(problem: &PoseProblem, rays: &[Ray], p: &[f64; 3]) -> Vec<f64> {
    let (c, s) = (math::cos(p[0]), math::sin(p[0]));
    let t = Vec3::new(p[1], p[2], problem.z_offset());
    rays.iter()
        .map(|ray| {
            let line = &problem.observations()[ray.line].line_world;
            let q = rot(c, s, line.q()) + t;
            let d = rot(c, s, line.d());
            let n = ray.v.cross(d);
            let nn = n.norm();
            if nn > 1e-9 {
                (ray.m - q).dot(n) / nn
            } else {
                (ray.m - q).cross(d).norm()
            }
        })
        .collect()
}
