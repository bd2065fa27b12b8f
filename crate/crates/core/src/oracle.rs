//! Numerical forward projection of single points onto the mirror, plus the
//! pinhole projection used to move between mirror points and pixels.
//!
//! [`forward_project`] is deliberately independent of the analytic
//! reflection curve in [`crate::curve`]: it works directly on the law of
//! reflection and is used both to synthesize data and to validate the curve.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{ray_quadric_intersect, PinholeCamera, QuadricMirror};
use crate::math::{self, solve3, Vec3};

/// A mirror point that reflects the COP's viewing ray through a scene point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionSolution {
    /// Reflection point on the mirror.
    pub m: Vec3,
    /// Incident direction `m − cop`, unit length.
    pub v_i: Vec3,
    /// Reflected direction, unit length, pointing from `m` toward the scene.
    pub v_r: Vec3,
    /// `‖v_r × (p − m)/‖p − m‖‖` at the returned point.
    pub residual: f64,
}

/// Accept threshold on the normalized cross-product residual.
pub const ACCEPT_RESIDUAL: f64 = 1e-9;
/// Candidates between [`ACCEPT_RESIDUAL`] and this value are reported as
/// [`Error::NonConvergence`].
pub const POLISH_RESIDUAL: f64 = 1e-6;
/// Solutions closer than this are merged.
pub const MERGE_DISTANCE: f64 = 1e-6;

const GRID_PHI: usize = 36;
const GRID_Z: usize = 32;
const MAX_STARTS: usize = 12;

/// Scale-free reflected direction `4(nᵀn) v_i − 8 n (v_iᵀn)`.
pub fn reflect_direction(v_i: Vec3, n: Vec3) -> Result<Vec3> {
    let nn = n.norm_squared();
    if nn == 0.0 {
        return Err(Error::ZeroNormal);
    }
    Ok(v_i * (4.0 * nn) - n * (8.0 * v_i.dot(n)))
}

pub(crate) fn unit_reflection(mirror: &QuadricMirror, m: Vec3) -> Option<Vec3> {
    let n = mirror.normal_unchecked(m);
    reflect_direction(m - mirror.cop(), n).ok()?.try_normalize()
}

/// Defects of the law of reflection for incident direction `v_i` at a
/// surface with normal `n`: the difference between the angles that `v_i`
/// and `−v_r` make with `n` (radians), and `|det[v̂_i; v̂_r; n̂]|`.
pub fn reflection_law_defects(v_i: Vec3, n: Vec3) -> Result<(f64, f64)> {
    let vr = reflect_direction(v_i, n)?.try_normalize().ok_or(Error::ZeroNormal)?;
    let vi = v_i.try_normalize().ok_or(Error::InvalidInput("zero incident direction"))?;
    let nn = n.normalize();
    let incidence = math::acos(vi.dot(nn).clamp(-1.0, 1.0));
    let reflection = math::acos((-vr).dot(nn).clamp(-1.0, 1.0));
    Ok(((incidence - reflection).abs(), math::det3(vi, vr, nn).abs()))
}

/// `|det[p − m; cop − m; k − m]|` with the axis point `k = m − n`, for unit
/// direction vectors. Zero when the scene point lies in the reflection
/// plane through `m`.
pub fn reflection_plane_defect(mirror: &QuadricMirror, m: Vec3, p: Vec3) -> f64 {
    let n = mirror.normal_unchecked(m);
    let k = m - n;
    let unit = |v: Vec3| v.try_normalize().unwrap_or(Vec3::ZERO);
    math::det3(unit(p - m), unit(mirror.cop() - m), unit(k - m)).abs()
}

/// Normalized `‖v̂_r × û‖` with `û` the unit vector from `m` to `p`.
pub fn cross_residual(mirror: &QuadricMirror, m: Vec3, p: Vec3) -> f64 {
    match (unit_reflection(mirror, m), (p - m).try_normalize()) {
        (Some(vr), Some(u)) => vr.cross(u).norm(),
        _ => f64::INFINITY,
    }
}

/// Residual used by the Newton iteration: signed distance to the surface
/// (scaled by `length`) and the difference between the reflected direction
/// and the direction to the scene point.
fn newton_residual(mirror: &QuadricMirror, m: Vec3, p: Vec3, length: f64) -> Option<[f64; 4]> {
    let n = mirror.normal_unchecked(m);
    let nn = n.norm();
    if nn == 0.0 {
        return None;
    }
    let dist = mirror.eval(m) / (2.0 * nn);
    let vr = unit_reflection(mirror, m)?;
    let u = (p - m).try_normalize()?;
    let e = vr - u;
    Some([dist / length, e.x, e.y, e.z])
}

fn norm4(v: &[f64; 4]) -> f64 {
    math::sqrt(v.iter().map(|x| x * x).sum())
}

/// Levenberg-Marquardt polish of a single candidate in Cartesian coordinates.
fn polish(mirror: &QuadricMirror, start: Vec3, p: Vec3, length: f64) -> Option<Vec3> {
    let mut m = start;
    let mut f = newton_residual(mirror, m, p, length)?;
    let mut fnorm = norm4(&f);
    let mut mu = 1e-6;
    let h = 1e-7 * length;
    for _ in 0..80 {
        if fnorm < 1e-15 {
            break;
        }
        // Central-difference Jacobian, 4x3.
        let mut jac = [[0.0; 3]; 4];
        for k in 0..3 {
            let mut dp = Vec3::ZERO;
            match k {
                0 => dp.x = h,
                1 => dp.y = h,
                _ => dp.z = h,
            }
            let fp = newton_residual(mirror, m + dp, p, length)?;
            let fm = newton_residual(mirror, m - dp, p, length)?;
            for i in 0..4 {
                jac[i][k] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let mut jtj = [[0.0; 3]; 3];
        let mut jtf = [0.0; 3];
        for a in 0..3 {
            for b in 0..3 {
                jtj[a][b] = (0..4).map(|i| jac[i][a] * jac[i][b]).sum();
            }
            jtf[a] = -(0..4).map(|i| jac[i][a] * f[i]).sum::<f64>();
        }
        let mut accepted = false;
        for _ in 0..12 {
            let mut damped = jtj;
            for (a, row) in damped.iter_mut().enumerate() {
                row[a] += mu * jtj[a][a].max(1e-12);
            }
            let Some(step) = solve3(&damped, jtf) else {
                mu *= 10.0;
                continue;
            };
            let cand = m + Vec3::from(step);
            if let Some(fc) = newton_residual(mirror, cand, p, length) {
                let nc = norm4(&fc);
                if nc < fnorm {
                    m = cand;
                    f = fc;
                    fnorm = nc;
                    mu = (mu / 10.0).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            mu *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    // Final projection onto the surface along the gradient.
    let n = mirror.normal_unchecked(m);
    let nn = n.norm_squared();
    if nn > 0.0 {
        m -= n * (mirror.eval(m) / (2.0 * nn));
    }
    m.is_finite().then_some(m)
}

/// All mirror points whose reflected viewing ray passes through `p`,
/// sorted by distance from the COP.
///
/// Seeds come from a `36 × 32` grid in azimuth and height over every sheet
/// of the surface; grid cells that are local minima of the reflection
/// mismatch are refined by damped Newton steps. Solutions whose normal does
/// not face the COP are discarded.
pub fn forward_project(p: Vec3, mirror: &QuadricMirror) -> Result<Vec<ReflectionSolution>> {
    let cop = mirror.cop();
    if !p.is_finite() {
        return Err(Error::InvalidInput("non-finite scene point"));
    }
    if (p - cop).norm() <= 1e-12 * mirror.length_scale() {
        return Err(Error::PointAtCop);
    }
    let length = mirror.length_scale();

    let mut starts: Vec<(f64, Vec3)> = Vec::new();
    for sheet in mirror.sheets() {
        let mut grid = [[(f64::INFINITY, Vec3::ZERO); GRID_PHI]; GRID_Z];
        for (iz, row) in grid.iter_mut().enumerate() {
            let z = sheet.z_at((iz as f64 + 0.5) / GRID_Z as f64);
            for (ip, cell) in row.iter_mut().enumerate() {
                let phi = 2.0 * core::f64::consts::PI * ip as f64 / GRID_PHI as f64;
                let Some(m) = mirror.surface_point(phi, z) else { continue };
                *cell = (seed_merit(mirror, m, p), m);
            }
        }
        for iz in 0..GRID_Z {
            for ip in 0..GRID_PHI {
                let (v, m) = grid[iz][ip];
                if !v.is_finite() || v >= 1.0 {
                    continue;
                }
                let mut is_min = true;
                'nb: for dz in [-1i32, 0, 1] {
                    let jz = iz as i32 + dz;
                    if jz < 0 || jz >= GRID_Z as i32 {
                        continue;
                    }
                    for dp in [-1i32, 0, 1] {
                        if dz == 0 && dp == 0 {
                            continue;
                        }
                        let jp = (ip as i32 + dp).rem_euclid(GRID_PHI as i32) as usize;
                        let (w, _) = grid[jz as usize][jp];
                        // Ties broken by index so flat regions yield one start.
                        if w < v || (w == v && (jz as usize, jp) < (iz, ip)) {
                            is_min = false;
                            break 'nb;
                        }
                    }
                }
                if is_min {
                    starts.push((v, m));
                }
            }
        }
    }
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    starts.truncate(MAX_STARTS);

    let mut out: Vec<ReflectionSolution> = Vec::new();
    let mut stuck: Option<f64> = None;
    for (_, seed) in starts {
        let Some(m) = polish(mirror, seed, p, length) else { continue };
        if mirror.eval(m).abs() > mirror.surface_tolerance() {
            continue;
        }
        if mirror.facing(m, cop) <= 0.0 || mirror.facing(m, p) <= 0.0 {
            continue;
        }
        let Some(v_r) = unit_reflection(mirror, m) else { continue };
        if v_r.dot(p - m) <= 0.0 {
            continue;
        }
        let residual = cross_residual(mirror, m, p);
        if residual >= POLISH_RESIDUAL {
            continue;
        }
        if residual >= ACCEPT_RESIDUAL {
            stuck = Some(stuck.map_or(residual, |s: f64| s.min(residual)));
            continue;
        }
        if out.iter().any(|s| (s.m - m).norm() < MERGE_DISTANCE) {
            continue;
        }
        out.push(ReflectionSolution { m, v_i: (m - cop).normalize(), v_r, residual });
    }
    if let Some(residual) = stuck {
        if out.is_empty() {
            return Err(Error::NonConvergence { residual });
        }
    }
    out.sort_by(|a, b| (a.m - cop).norm().total_cmp(&(b.m - cop).norm()));
    Ok(out)
}

/// Grid merit: mismatch between the reflected ray and the direction to `p`,
/// with a flat penalty where the surface does not face both the COP and `p`.
fn seed_merit(mirror: &QuadricMirror, m: Vec3, p: Vec3) -> f64 {
    let cop = mirror.cop();
    let (Some(vr), Some(u)) = (unit_reflection(mirror, m), (p - m).try_normalize()) else {
        return f64::INFINITY;
    };
    let e = (vr - u).norm_squared();
    if mirror.facing(m, cop) > 0.0 && mirror.facing(m, p) > 0.0 {
        e
    } else {
        4.0 + e
    }
}

/// The reflection nearest the COP, if any.
pub fn forward_project_nearest(p: Vec3, mirror: &QuadricMirror) -> Result<Option<ReflectionSolution>> {
    Ok(forward_project(p, mirror)?.into_iter().next())
}

/// Perspective projection of a mirror-frame point to pixels.
pub fn project_to_pixel(m: Vec3, cam: &PinholeCamera) -> Result<[f64; 2]> {
    let pc = cam.pose_in_mirror_frame.apply_inverse(m);
    if pc.z <= 0.0 {
        return Err(Error::BehindCamera);
    }
    Ok([cam.focal * pc.x / pc.z + cam.principal_point[0], cam.focal * pc.y / pc.z + cam.principal_point[1]])
}

/// Intersects the viewing ray of pixel `u` with the mirror and returns the
/// first hit whose normal faces the COP. A camera inside a closed mirror
/// sees only the concave side; then the first hit is returned.
pub fn backproject_pixel(u: [f64; 2], cam: &PinholeCamera, mirror: &QuadricMirror) -> Result<Vec3> {
    let local =
        Vec3::new((u[0] - cam.principal_point[0]) / cam.focal, (u[1] - cam.principal_point[1]) / cam.focal, 1.0);
    let dir = cam.pose_in_mirror_frame.rotate(local).normalize();
    let origin = cam.center();
    let hits = ray_quadric_intersect(origin, dir, mirror);
    for &t in &hits {
        let m = origin + dir * t;
        let n = mirror.normal_unchecked(m);
        let to_cop = mirror.cop() - m;
        // Tangent rays give a facing value of zero up to rounding.
        if n.dot(to_cop) >= -1e-9 * n.norm() * to_cop.norm().max(1.0) {
            return Ok(m);
        }
    }
    hits.first().map(|t| origin + dir * *t).ok_or(Error::NoIntersection)
}
