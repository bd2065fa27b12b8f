//! Reflection curve of a 3D line on a quadric mirror.
//!
//! A mirror point `(x, y, z)` reflects some point of the line into the
//! camera exactly when `γ(y, z) = 0` and `x = x_num(y, z) / x_den(y, z)`.
//! Both come from eliminating the line parameter `λ` between two
//! conditions:
//!
//! * the scene point, the reflection point, the COP and the point where the
//!   surface normal meets the axis are coplanar. Solving that plane for `x`
//!   gives `x = −(c3 λ + c4)/(c1 λ + c2)`, and substituting into the mirror
//!   gives `c5 λ² + c6 λ + c7 = 0`;
//! * the reflected ray passes through the scene point. Of the three
//!   components of `v_r × (p − m) = 0`, the first one does not depend on
//!   `x` once `x²` is replaced from the mirror equation, and it is linear in
//!   `λ`: `c8 λ + c9 = 0`.
//!
//! Hence `γ = c5 c9² − c6 c8 c9 + c7 c8²` (total degree at most 10) and
//! `x = (c3 c9 − c4 c8)/(c2 c8 − c1 c9)`.
//!
//! The expansion is carried out numerically on dense polynomials in the
//! scaled variables `(y/L, z/L)` with `L` the rig's length scale, which keeps
//! intermediate coefficients within a few orders of magnitude of each other.
//! The results are then converted back to centimeters and normalized there.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Line3D, QuadricMirror};
use crate::math::Vec3;
use crate::oracle::forward_project_nearest;
use crate::poly::BiPoly;

/// Residual substituted when a curve quantity cannot be evaluated at a point.
pub const SENTINEL_RESIDUAL: f64 = 1.0;

/// Default relative threshold below which `x_den` is treated as vanishing.
pub const DEN_EPS: f64 = 1e-10;

/// Expanded and normalized reflection-curve polynomials of one line, in
/// mirror-frame centimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveCoefficients {
    /// `γ / scale`, so that its largest coefficient has magnitude 1.
    pub gamma: BiPoly,
    /// Numerator of `x`, degree <= 5.
    pub x_num: BiPoly,
    /// Denominator of `x`, degree <= 4, normalized to max coefficient 1.
    pub x_den: BiPoly,
    /// Divisor applied to the expanded `γ` coefficients.
    pub scale: f64,
    /// The mirror's length scale, which sets the units of the `x` term in
    /// [`curve_point_residual`].
    pub length_scale: f64,
}

/// Intermediate `c1 … c9` factors of the elimination.
struct Factors {
    c1: BiPoly,
    c2: BiPoly,
    c3: BiPoly,
    c4: BiPoly,
    c5: BiPoly,
    c6: BiPoly,
    c7: BiPoly,
    c8: BiPoly,
    c9: BiPoly,
}

fn factors(line: &Line3D, mirror: &QuadricMirror, length: f64) -> Factors {
    let a = mirror.a();
    let b = mirror.b() / length;
    let c = mirror.c() / (length * length);
    let o = mirror.cop() / length;
    let q = line.q() / length;
    let d = line.d();
    let (oy, oz) = (o.y, o.z);

    let y = BiPoly::y();
    let z = BiPoly::z();

    // Height of the axis point k = m − n, relative to the COP.
    let k = BiPoly::linear(-(0.5 * b + oz), 0.0, 1.0 - a);
    // x-coefficient of the plane equation: c1 λ + c2.
    let c1 = &k * d.y + BiPoly::constant(oy * d.z);
    let c2 = &k * (q.y - oy) + BiPoly::constant(oy * (q.z - oz));
    // Remaining plane terms: c3 λ + c4 = −(q_x + λ d_x) G.
    let g = (&y + (-oy)) * &k + (&z + (-oz)) * oy;
    let c3 = &g * (-d.x);
    let c4 = &g * (-q.x);
    // W = y² + A z² + B z − C, so that x² = −W on the mirror.
    let w = y.square() + z.square() * a + &z * b + (-c);
    let c5 = c3.square() + &w * c1.square();
    let c6 = (&c3 * &c4) * 2.0 + (&w * (&c1 * &c2)) * 2.0;
    let c7 = c4.square() + &w * c2.square();

    // nᵀn and v_iᵀn with x² eliminated.
    let nz = &z * a + 0.5 * b;
    let nn = (&y.square() - &w) + nz.square();
    let vn = (&(&y + (-oy)) * &y - &w) + (&z + (-oz)) * &nz;
    let vr_y = (&nn * &(&y + (-oy))) * 4.0 - (&y * &vn) * 8.0;
    let vr_z = (&nn * &(&z + (-oz))) * 4.0 - (&nz * &vn) * 8.0;
    // First component of v_r × (p − m): c8 λ + c9.
    let c8 = &vr_y * d.z - &vr_z * d.y;
    // The quartic terms of c9 cancel identically.
    let c9 = (&vr_y * &(&(-&z) + q.z) - &vr_z * &(&(-&y) + q.y)).truncate(3);

    Factors { c1, c2, c3, c4, c5, c6, c7, c8, c9 }
}

/// Expands the reflection curve of `line` on `mirror`.
pub fn curve_coefficients(line: &Line3D, mirror: &QuadricMirror) -> Result<CurveCoefficients> {
    let length = mirror.length_scale();
    if line.distance_to(mirror.cop()) <= 1e-9 * length {
        return Err(Error::DegenerateLine);
    }
    let f = factors(line, mirror, length);
    let gamma = &(&f.c5 * &f.c9.square()) - &(&(&f.c6 * &f.c8) * &f.c9);
    let gamma = (gamma + &f.c7 * &f.c8.square()).rescale_vars(1.0 / length);
    let scale = gamma.max_abs_coeff();
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::DegenerateLine);
    }
    let x_num = (&(&f.c3 * &f.c9) - &(&f.c4 * &f.c8)).rescale_vars(1.0 / length).scale(length);
    let x_den = (&(&f.c2 * &f.c8) - &(&f.c1 * &f.c9)).rescale_vars(1.0 / length);
    let den_scale = x_den.max_abs_coeff();
    let (x_num, x_den) = if den_scale > 0.0 && den_scale.is_finite() {
        (x_num.scale(1.0 / den_scale), x_den.scale(1.0 / den_scale))
    } else {
        (x_num, x_den)
    };
    Ok(CurveCoefficients { gamma: gamma.scale(1.0 / scale), x_num, x_den, scale, length_scale: length })
}

impl CurveCoefficients {
    /// Normalized `γ(y, z)`.
    pub fn gamma_eval(&self, y: f64, z: f64) -> f64 {
        self.gamma.eval(y, z)
    }

    /// `x(y, z)` from the rational expression, failing near its poles.
    pub fn x_from_yz(&self, y: f64, z: f64) -> Result<f64> {
        self.x_from_yz_eps(y, z, DEN_EPS)
    }

    pub fn x_from_yz_eps(&self, y: f64, z: f64, eps: f64) -> Result<f64> {
        let den = self.x_den.eval(y, z);
        if !(den.abs() > eps * self.x_den.max_abs_coeff()) {
            return Err(Error::DenominatorVanishes);
        }
        Ok(self.x_num.eval(y, z) / den)
    }

    /// Total degree of `γ`, ignoring terms below `1e-12` of the largest once
    /// lengths are measured in units of the mirror's length scale.
    pub fn gamma_degree(&self) -> Option<usize> {
        self.gamma.rescale_vars(self.length_scale).total_degree_with_tol(1e-12)
    }
}

/// Normalized `γ` of `c` at `(y, z)`.
pub fn gamma_eval(c: &CurveCoefficients, y: f64, z: f64) -> f64 {
    c.gamma_eval(y, z)
}

/// `x_num(y, z) / x_den(y, z)`, or [`Error::DenominatorVanishes`].
pub fn x_from_yz(c: &CurveCoefficients, y: f64, z: f64) -> Result<f64> {
    c.x_from_yz(y, z)
}

/// `x` at `(y, z)`, falling back to `±√(−W)` from the mirror equation when
/// the rational form has a pole there. The sign is the one whose point faces
/// the COP; if both do, the positive root.
pub fn x_from_yz_or_mirror(c: &CurveCoefficients, mirror: &QuadricMirror, y: f64, z: f64) -> f64 {
    match c.x_from_yz(y, z) {
        Ok(x) => x,
        Err(_) => {
            let r2 = mirror.radius_squared(z) - y * y;
            let x = crate::math::sqrt(r2.max(0.0));
            let cop = mirror.cop();
            let pos = mirror.facing(Vec3::new(x, y, z), cop);
            let neg = mirror.facing(Vec3::new(-x, y, z), cop);
            if neg > 0.0 && pos <= 0.0 {
                -x
            } else {
                x
            }
        }
    }
}

/// Weight on the `x` mismatch in [`curve_point_residual`], per length scale.
pub const X_WEIGHT: f64 = 1.0;

/// `|γ(m_y, m_z)| + |x(m_y, m_z) − m_x| / L`; zero exactly on the curve.
/// Returns [`SENTINEL_RESIDUAL`] if `x` cannot be evaluated at `m`.
pub fn curve_point_residual(line: &Line3D, mirror: &QuadricMirror, m: Vec3) -> Result<f64> {
    let c = curve_coefficients(line, mirror)?;
    Ok(point_residual(&c, m))
}

pub(crate) fn point_residual(c: &CurveCoefficients, m: Vec3) -> f64 {
    let g = c.gamma_eval(m.y, m.z).abs();
    match c.x_from_yz(m.y, m.z) {
        Ok(x) => g + X_WEIGHT * (x - m.x).abs() / c.length_scale,
        Err(_) => SENTINEL_RESIDUAL,
    }
}

/// One sampled point of a reflection curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub lambda: f64,
    pub m: Vec3,
    /// [`curve_point_residual`] at `m`.
    pub residual: f64,
}

/// Reflection-curve samples of a line and the line parameters that had no
/// valid reflection.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CurveSamples {
    pub points: Vec<CurveSample>,
    pub skipped: Vec<f64>,
}

/// Forward-projects `n` evenly spaced points of the line with
/// `λ ∈ [lambda_min, lambda_max]` and checks each against the analytic curve.
pub fn sample_curve(
    line: &Line3D,
    mirror: &QuadricMirror,
    lambda_min: f64,
    lambda_max: f64,
    n: usize,
) -> Result<CurveSamples> {
    if n < 2 {
        return Err(Error::InvalidInput("sample_curve needs at least two samples"));
    }
    let coeffs = curve_coefficients(line, mirror)?;
    let mut out = CurveSamples::default();
    for k in 0..n {
        let lambda = lambda_min + (lambda_max - lambda_min) * k as f64 / (n - 1) as f64;
        let p = line.point(lambda);
        match forward_project_nearest(p, mirror) {
            Ok(Some(sol)) => {
                out.points.push(CurveSample { lambda, m: sol.m, residual: point_residual(&coeffs, sol.m) })
            }
            Ok(None) | Err(_) => out.skipped.push(lambda),
        }
    }
    Ok(out)
}
