//! Mirror, line and pose value types plus the exact geometric primitives
//! shared by the rest of the crate.
//!
//! The mirror frame has the mirror's rotation axis along `z` and the
//! perspective camera's center of projection (COP) in the `x = 0` plane.
//! Lengths are in centimeters.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, Mat3, Vec3};

/// Rotationally symmetric quadric `x² + y² + A z² + B z − C = 0` together
/// with the center of projection `(0, o_y, o_z)` of the camera looking at it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadricMirror {
    a: f64,
    b: f64,
    c: f64,
    cop: Vec3,
}

/// Names of the built-in mirror presets.
pub const PRESET_NAMES: [&str; 3] = ["hyperbolic", "parabolic", "spheric"];

impl QuadricMirror {
    pub fn new(a: f64, b: f64, c: f64, cop: Vec3) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite() && cop.is_finite()) {
            return Err(Error::InvalidMirror("non-finite parameter"));
        }
        if cop.x != 0.0 {
            return Err(Error::InvalidMirror("center of projection must have x = 0"));
        }
        if a > 0.0 && b * b + 4.0 * a * c < 0.0 {
            return Err(Error::InvalidMirror("surface does not meet its axis"));
        }
        let m = QuadricMirror { a, b, c, cop };
        if m.eval(cop).abs() <= 1e-12 * m.c.abs().max(1.0) {
            return Err(Error::InvalidMirror("center of projection lies on the mirror"));
        }
        Ok(m)
    }

    /// Hyperbolic preset: A = −1.2, B = 3.4, C = −33.2, COP (0, 25, 25).
    pub fn hyperbolic() -> Self {
        QuadricMirror { a: -1.2, b: 3.4, c: -33.2, cop: Vec3::new(0.0, 25.0, 25.0) }
    }

    /// Parabolic preset: A = 0, B = 20.4, C = 53.2, COP (0, 30, 20).
    pub fn parabolic() -> Self {
        QuadricMirror { a: 0.0, b: 20.4, c: 53.2, cop: Vec3::new(0.0, 30.0, 20.0) }
    }

    /// Spherical preset: A = 1, B = 0, C = 900, COP (0, −15, 55).
    pub fn spheric() -> Self {
        QuadricMirror { a: 1.0, b: 0.0, c: 900.0, cop: Vec3::new(0.0, -15.0, 55.0) }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "hyperbolic" => Some(Self::hyperbolic()),
            "parabolic" => Some(Self::parabolic()),
            "spheric" | "sphere" | "spherical" => Some(Self::spheric()),
            _ => None,
        }
    }

    /// Same surface with a different center of projection.
    pub fn with_cop(self, cop: Vec3) -> Result<Self> {
        Self::new(self.a, self.b, self.c, cop)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn cop(&self) -> Vec3 {
        self.cop
    }

    /// `x² + y² + A z² + B z − C`.
    #[inline]
    pub fn eval(&self, p: Vec3) -> f64 {
        p.x * p.x + p.y * p.y + self.a * p.z * p.z + self.b * p.z - self.c
    }

    /// Half the gradient of [`eval`](Self::eval): `(x, y, A z + B/2)`.
    #[inline]
    pub fn normal_unchecked(&self, p: Vec3) -> Vec3 {
        Vec3::new(p.x, p.y, self.a * p.z + 0.5 * self.b)
    }

    pub fn normal(&self, p: Vec3) -> Result<Vec3> {
        let n = self.normal_unchecked(p);
        if n == Vec3::ZERO {
            Err(Error::ZeroNormal)
        } else {
            Ok(n)
        }
    }

    /// Squared radius of the surface at height `z`; negative where the
    /// surface does not exist.
    #[inline]
    pub fn radius_squared(&self, z: f64) -> f64 {
        self.c - self.a * z * z - self.b * z
    }

    /// Real roots of `A z² + B z − C = 0`, ascending.
    pub fn axis_roots(&self) -> Vec<f64> {
        quadratic_roots(self.a, self.b, -self.c)
    }

    /// Tolerance for "lies on the mirror" tests.
    pub fn surface_tolerance(&self) -> f64 {
        1e-8 * self.c.abs().max(1.0)
    }

    /// Characteristic length of the rig, used to scale polynomial variables.
    pub fn length_scale(&self) -> f64 {
        let s = self.cop.norm().max(math::sqrt(self.c.abs())).max(self.b.abs());
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// Signed facing measure `nᵀ(target − m)`; positive when `target` is on
    /// the side of the tangent plane the normal points to.
    #[inline]
    pub fn facing(&self, m: Vec3, target: Vec3) -> f64 {
        self.normal_unchecked(m).dot(target - m)
    }

    /// Height intervals used to seed searches over the surface, each with a
    /// mapping from `u ∈ [0, 1]` to `z` that is dense near axis crossings.
    pub fn sheets(&self) -> Vec<Sheet> {
        let span = 8.0 * self.length_scale();
        let roots = self.axis_roots();
        let mut out = Vec::new();
        if self.a > 0.0 {
            let (lo, hi) = (roots[0], *roots.last().unwrap());
            out.push(Sheet { start: lo, end: hi, kind: SheetKind::Closed });
        } else if self.a == 0.0 {
            if self.b > 0.0 {
                out.push(Sheet { start: self.c / self.b, end: self.c / self.b - span, kind: SheetKind::Open });
            } else if self.b < 0.0 {
                out.push(Sheet { start: self.c / self.b, end: self.c / self.b + span, kind: SheetKind::Open });
            } else {
                out.push(Sheet { start: -span, end: span, kind: SheetKind::Linear });
            }
        } else if roots.len() == 2 {
            out.push(Sheet { start: roots[0], end: roots[0] - span, kind: SheetKind::Open });
            out.push(Sheet { start: roots[1], end: roots[1] + span, kind: SheetKind::Open });
        } else {
            let zc = -self.b / (2.0 * self.a);
            out.push(Sheet { start: zc - span, end: zc + span, kind: SheetKind::Linear });
        }
        out
    }

    /// Surface point at azimuth `phi` and height `z`, if the surface exists there.
    pub fn surface_point(&self, phi: f64, z: f64) -> Option<Vec3> {
        let r2 = self.radius_squared(z);
        if r2 < 0.0 {
            return None;
        }
        let r = math::sqrt(r2);
        Some(Vec3::new(r * math::cos(phi), r * math::sin(phi), z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SheetKind {
    Closed,
    Open,
    Linear,
}

/// One connected height interval of the mirror surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sheet {
    start: f64,
    end: f64,
    kind: SheetKind,
}

impl Sheet {
    pub fn z_at(&self, u: f64) -> f64 {
        let w = match self.kind {
            SheetKind::Closed => 0.5 * (1.0 - math::cos(core::f64::consts::PI * u)),
            SheetKind::Open => u * u,
            SheetKind::Linear => u,
        };
        self.start + (self.end - self.start) * w
    }
}

/// Real roots of `a t² + b t + c = 0`, ascending. A double root is
/// reported once; `a = 0` falls back to the linear equation.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-14 * scale {
        if b.abs() <= 1e-14 * scale {
            return Vec::new();
        }
        return alloc::vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    let tol = 1e-12 * (b * b).max((4.0 * a * c).abs());
    if disc < -tol {
        return Vec::new();
    }
    if disc <= tol {
        return alloc::vec![-b / (2.0 * a)];
    }
    let sq = math::sqrt(disc);
    let qq = -0.5 * (b + b.signum() * sq);
    let (mut r1, mut r2) = if qq != 0.0 { (qq / a, c / qq) } else { (sq / (2.0 * a), -sq / (2.0 * a)) };
    if r1 > r2 {
        core::mem::swap(&mut r1, &mut r2);
    }
    alloc::vec![r1, r2]
}

/// Forward intersections `t ≥ 0` of the ray `origin + t·dir` with the mirror.
pub fn ray_quadric_intersect(origin: Vec3, dir: Vec3, mirror: &QuadricMirror) -> Vec<f64> {
    let (o, d) = (origin, dir);
    let qa = d.x * d.x + d.y * d.y + mirror.a * d.z * d.z;
    let qb = 2.0 * (o.x * d.x + o.y * d.y + mirror.a * o.z * d.z) + mirror.b * d.z;
    let qc = mirror.eval(o);
    quadratic_roots(qa, qb, qc).into_iter().filter(|t| *t >= 0.0).collect()
}

/// A 3D line `q + λ d` with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line3D {
    q: Vec3,
    d: Vec3,
}

impl Line3D {
    pub fn new(q: Vec3, d: Vec3) -> Result<Self> {
        if !q.is_finite() || !d.is_finite() {
            return Err(Error::InvalidInput("non-finite line"));
        }
        let d = d.try_normalize().ok_or(Error::ZeroDirection)?;
        Ok(Line3D { q, d })
    }

    pub fn q(&self) -> Vec3 {
        self.q
    }

    pub fn d(&self) -> Vec3 {
        self.d
    }

    pub fn point(&self, lambda: f64) -> Vec3 {
        self.q + self.d * lambda
    }

    pub fn distance_to(&self, p: Vec3) -> f64 {
        (p - self.q).cross(self.d).norm()
    }

    /// Mirror image through the `x = 0` plane.
    pub fn flip_x(&self) -> Line3D {
        Line3D { q: self.q.flip_x(), d: self.d.flip_x() }
    }
}

/// Planar pose: rotation `theta` about `z` and translation `(t_x, t_y, z_offset)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlanarPose {
    pub theta: f64,
    pub t_x: f64,
    pub t_y: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub z_offset: f64,
}

impl PlanarPose {
    pub fn new(theta: f64, t_x: f64, t_y: f64, z_offset: f64) -> Self {
        PlanarPose { theta, t_x, t_y, z_offset }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    /// Same pose with `theta` wrapped into `(−π, π]`.
    pub fn canonicalize(self) -> Self {
        PlanarPose { theta: math::wrap_angle(self.theta), ..self }
    }

    pub fn to_rigid(&self) -> RigidTransform {
        planar_pose_to_rt(self)
    }
}

/// Rigid transform `p ↦ R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub r: Mat3,
    pub t: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform { r: Mat3::IDENTITY, t: Vec3::ZERO }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.r * p + self.t
    }

    /// `Rᵀ p − Rᵀ t`.
    pub fn apply_inverse(&self, p: Vec3) -> Vec3 {
        self.r.transpose() * (p - self.t)
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        self.r * v
    }
}

pub fn planar_pose_to_rt(pose: &PlanarPose) -> RigidTransform {
    RigidTransform { r: Mat3::rot_z(pose.theta), t: Vec3::new(pose.t_x, pose.t_y, pose.z_offset) }
}

/// World point to camera frame.
pub fn transform_point(p: Vec3, pose: &PlanarPose) -> Vec3 {
    planar_pose_to_rt(pose).apply(p)
}

/// World line to camera frame: `q' = R q + t`, `d' = R d`.
pub fn transform_line(line: &Line3D, pose: &PlanarPose) -> Line3D {
    let rt = planar_pose_to_rt(pose);
    Line3D { q: rt.apply(line.q), d: rt.rotate(line.d).normalize() }
}

/// Transforms a line with a rotation given as an unnormalized
/// `(cos θ, sin θ)` pair; the rotation part is `[[c, −s, 0], [s, c, 0], [0, 0, 1]]`.
pub(crate) fn transform_line_cs(line: &Line3D, ct: f64, st: f64, t: Vec3) -> Option<Line3D> {
    let rot = |v: Vec3| Vec3::new(ct * v.x - st * v.y, st * v.x + ct * v.y, v.z);
    let d = rot(line.d).try_normalize()?;
    Some(Line3D { q: rot(line.q) + t, d })
}

/// Camera point back to the world frame: `Rᵀ p − Rᵀ t`.
pub fn camera_to_world(p: Vec3, pose: &PlanarPose) -> Vec3 {
    planar_pose_to_rt(pose).apply_inverse(p)
}

/// Inverse of [`transform_line`].
pub fn camera_line_to_world(line: &Line3D, pose: &PlanarPose) -> Line3D {
    let rt = planar_pose_to_rt(pose);
    Line3D { q: rt.apply_inverse(line.q), d: (rt.r.transpose() * line.d).normalize() }
}

/// Ideal pinhole camera placed at the mirror's center of projection.
///
/// `pose_in_mirror_frame` maps camera coordinates to mirror coordinates;
/// the camera looks along its own `+z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeCamera {
    pub focal: f64,
    pub principal_point: [f64; 2],
    pub pose_in_mirror_frame: RigidTransform,
}

impl PinholeCamera {
    pub const DEFAULT_FOCAL: f64 = 800.0;
    pub const DEFAULT_PRINCIPAL_POINT: [f64; 2] = [640.0, 512.0];
    pub const DEFAULT_IMAGE_SIZE: [u32; 2] = [1280, 1024];

    /// Camera at `center` with optical axis toward `target`.
    pub fn looking_at(center: Vec3, target: Vec3, focal: f64, principal_point: [f64; 2]) -> Result<Self> {
        let fwd = (target - center).try_normalize().ok_or(Error::InvalidInput("camera target equals center"))?;
        let helper = if fwd.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
        let right = helper.cross(fwd).normalize();
        let down = fwd.cross(right);
        // Columns are the camera axes expressed in the mirror frame.
        let r = Mat3::from_cols(right, down, fwd);
        Ok(PinholeCamera { focal, principal_point, pose_in_mirror_frame: RigidTransform { r, t: center } })
    }

    /// Default camera for a mirror: at the COP, aimed at the centroid of the
    /// part of the surface that faces the COP.
    pub fn for_mirror(mirror: &QuadricMirror) -> Self {
        let target = visible_cap_centroid(mirror).unwrap_or(Vec3::ZERO);
        Self::looking_at(mirror.cop(), target, Self::DEFAULT_FOCAL, Self::DEFAULT_PRINCIPAL_POINT)
            .or_else(|_| {
                Self::looking_at(
                    mirror.cop(),
                    mirror.cop() - Vec3::Z,
                    Self::DEFAULT_FOCAL,
                    Self::DEFAULT_PRINCIPAL_POINT,
                )
            })
            .expect("fallback camera target differs from its center")
    }

    pub fn center(&self) -> Vec3 {
        self.pose_in_mirror_frame.t
    }
}

/// Area-weighted centroid of the surface samples facing the COP.
fn visible_cap_centroid(mirror: &QuadricMirror) -> Option<Vec3> {
    const N_PHI: usize = 72;
    const N_Z: usize = 64;
    let mut acc = Vec3::ZERO;
    let mut weight = 0.0;
    for sheet in mirror.sheets() {
        for iz in 0..N_Z {
            let z = sheet.z_at((iz as f64 + 0.5) / N_Z as f64);
            let r2 = mirror.radius_squared(z);
            if r2 < 0.0 {
                continue;
            }
            let w = math::sqrt(r2).max(1e-6);
            for ip in 0..N_PHI {
                let phi = 2.0 * core::f64::consts::PI * ip as f64 / N_PHI as f64;
                if let Some(m) = mirror.surface_point(phi, z) {
                    if mirror.facing(m, mirror.cop()) > 0.0 {
                        acc += m * w;
                        weight += w;
                    }
                }
            }
        }
    }
    (weight > 0.0).then(|| acc / weight)
}
