//! Dense bivariate polynomials in `(y, z)`.
//!
//! Coefficients are stored in a triangular table in graded order: all
//! monomials of total degree 0, then 1, and so on. The term `y^i z^j` lives
//! at index `(i + j)(i + j + 1)/2 + j`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct BiPoly {
    degree: usize,
    coeffs: Vec<f64>,
}

#[inline]
const fn index(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

#[inline]
const fn len_for(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

impl BiPoly {
    /// The zero polynomial with room for terms up to `degree`.
    pub fn zero(degree: usize) -> Self {
        BiPoly { degree, coeffs: vec![0.0; len_for(degree)] }
    }

    pub fn constant(c: f64) -> Self {
        BiPoly { degree: 0, coeffs: vec![c] }
    }

    /// `a + b·y + c·z`.
    pub fn linear(a: f64, b: f64, c: f64) -> Self {
        BiPoly { degree: 1, coeffs: vec![a, b, c] }
    }

    pub fn y() -> Self {
        Self::linear(0.0, 1.0, 0.0)
    }

    pub fn z() -> Self {
        Self::linear(0.0, 0.0, 1.0)
    }

    /// Storage bound on the degree; see [`total_degree`](Self::total_degree)
    /// for the actual degree.
    pub fn capacity_degree(&self) -> usize {
        self.degree
    }

    /// Coefficient of `y^i z^j`.
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.degree {
            0.0
        } else {
            self.coeffs[index(i, j)]
        }
    }

    pub fn set_coeff(&mut self, i: usize, j: usize, v: f64) {
        if i + j > self.degree {
            self.grow(i + j);
        }
        self.coeffs[index(i, j)] = v;
    }

    fn grow(&mut self, degree: usize) {
        self.coeffs.resize(len_for(degree), 0.0);
        self.degree = degree;
    }

    /// Iterator over `(i, j, coefficient)` for every stored term.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=self.degree).flat_map(move |d| (0..=d).map(move |j| (d - j, j, self.coeffs[index(d - j, j)])))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Highest total degree with a coefficient whose magnitude exceeds
    /// `rel_tol · max_abs_coeff`, or `None` for the zero polynomial.
    pub fn total_degree_with_tol(&self, rel_tol: f64) -> Option<usize> {
        let cutoff = rel_tol * self.max_abs_coeff();
        let mut deg = None;
        for (i, j, c) in self.terms() {
            if c != 0.0 && c.abs() > cutoff {
                deg = Some(deg.map_or(i + j, |d: usize| d.max(i + j)));
            }
        }
        deg
    }

    /// Highest total degree with a nonzero coefficient.
    pub fn total_degree(&self) -> Option<usize> {
        self.total_degree_with_tol(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    /// Drops every term of total degree above `degree`.
    pub fn truncate(&self, degree: usize) -> Self {
        if degree >= self.degree {
            return self.clone();
        }
        BiPoly { degree, coeffs: self.coeffs[..len_for(degree)].to_vec() }
    }

    pub fn scale(&self, s: f64) -> Self {
        BiPoly { degree: self.degree, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn square(&self) -> Self {
        self * self
    }

    /// Evaluates the polynomial at `(y, z)`.
    pub fn eval(&self, y: f64, z: f64) -> f64 {
        // Powers up to the stored degree; the tables stay tiny (<= 11 entries).
        let mut yp = [0.0f64; 16];
        let mut zp = [0.0f64; 16];
        let n = self.degree + 1;
        if n > yp.len() {
            return self.terms().map(|(i, j, c)| c * libm::pow(y, i as f64) * libm::pow(z, j as f64)).sum();
        }
        yp[0] = 1.0;
        zp[0] = 1.0;
        for k in 1..n {
            yp[k] = yp[k - 1] * y;
            zp[k] = zp[k - 1] * z;
        }
        let mut acc = 0.0;
        let mut idx = 0;
        for d in 0..n {
            for j in 0..=d {
                acc += self.coeffs[idx] * yp[d - j] * zp[j];
                idx += 1;
            }
        }
        acc
    }

    /// Sum of the absolute values of all terms at `(y, z)`; a bound on the
    /// magnitude of rounding error in [`eval`](Self::eval).
    pub fn eval_abs(&self, y: f64, z: f64) -> f64 {
        self.terms().map(|(i, j, c)| (c * libm::pow(y, i as f64) * libm::pow(z, j as f64)).abs()).sum()
    }

    /// The polynomial `(y, z) ↦ p(s·y, s·z)`.
    pub fn rescale_vars(&self, s: f64) -> Self {
        let mut out = self.clone();
        for d in 0..=self.degree {
            let f = libm::pow(s, d as f64);
            for j in 0..=d {
                out.coeffs[index(d - j, j)] *= f;
            }
        }
        out
    }
}

impl Add for &BiPoly {
    type Output = BiPoly;
    fn add(self, o: &BiPoly) -> BiPoly {
        let mut out = BiPoly::zero(self.degree.max(o.degree));
        for (k, c) in self.coeffs.iter().enumerate() {
            out.coeffs[k] += c;
        }
        for (k, c) in o.coeffs.iter().enumerate() {
            out.coeffs[k] += c;
        }
        out
    }
}

impl Sub for &BiPoly {
    type Output = BiPoly;
    fn sub(self, o: &BiPoly) -> BiPoly {
        let mut out = BiPoly::zero(self.degree.max(o.degree));
        for (k, c) in self.coeffs.iter().enumerate() {
            out.coeffs[k] += c;
        }
        for (k, c) in o.coeffs.iter().enumerate() {
            out.coeffs[k] -= c;
        }
        out
    }
}

impl Neg for &BiPoly {
    type Output = BiPoly;
    fn neg(self) -> BiPoly {
        self.scale(-1.0)
    }
}

impl Mul for &BiPoly {
    type Output = BiPoly;
    fn mul(self, o: &BiPoly) -> BiPoly {
        let mut out = BiPoly::zero(self.degree + o.degree);
        let mut ia = 0;
        for da in 0..=self.degree {
            for ja in 0..=da {
                let a = self.coeffs[ia];
                ia += 1;
                if a == 0.0 {
                    continue;
                }
                let mut ib = 0;
                for db in 0..=o.degree {
                    // Row of total degree da + db, shifted by ja.
                    let base = (da + db) * (da + db + 1) / 2 + ja;
                    for jb in 0..=db {
                        out.coeffs[base + jb] += a * o.coeffs[ib];
                        ib += 1;
                    }
                }
            }
        }
        out
    }
}

impl Mul<f64> for &BiPoly {
    type Output = BiPoly;
    fn mul(self, s: f64) -> BiPoly {
        self.scale(s)
    }
}

impl Add<f64> for &BiPoly {
    type Output = BiPoly;
    fn add(self, s: f64) -> BiPoly {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for BiPoly {
            type Output = BiPoly;
            fn $m(self, o: BiPoly) -> BiPoly {
                (&self).$m(&o)
            }
        }
        impl $tr<&BiPoly> for BiPoly {
            type Output = BiPoly;
            fn $m(self, o: &BiPoly) -> BiPoly {
                (&self).$m(o)
            }
        }
        impl $tr<BiPoly> for &BiPoly {
            type Output = BiPoly;
            fn $m(self, o: BiPoly) -> BiPoly {
                self.$m(&o)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Mul<f64> for BiPoly {
    type Output = BiPoly;
    fn mul(self, s: f64) -> BiPoly {
        self.scale(s)
    }
}

impl Add<f64> for BiPoly {
    type Output = BiPoly;
    fn add(self, s: f64) -> BiPoly {
        (&self).add(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_poly(max_deg: usize) -> impl Strategy<Value = BiPoly> {
        (0..=max_deg).prop_flat_map(|d| {
            proptest::collection::vec(-3.0f64..3.0, len_for(d)).prop_map(move |coeffs| BiPoly { degree: d, coeffs })
        })
    }

    #[test]
    fn graded_index_layout() {
        let mut p = BiPoly::zero(2);
        p.set_coeff(2, 0, 5.0);
        p.set_coeff(1, 1, 6.0);
        p.set_coeff(0, 2, 7.0);
        assert_eq!(p.coeffs, vec![0.0, 0.0, 0.0, 5.0, 6.0, 7.0]);
        assert_eq!(p.eval(2.0, 3.0), 5.0 * 4.0 + 6.0 * 6.0 + 7.0 * 9.0);
    }

    #[test]
    fn degree_of_products() {
        let a = BiPoly::linear(1.0, 2.0, 0.0);
        let b = BiPoly::linear(0.0, 0.0, 3.0);
        let c = &(&a * &b) * &a;
        assert_eq!(c.total_degree(), Some(3));
        assert_eq!(BiPoly::zero(4).total_degree(), None);
        assert_eq!((&a - &a).total_degree(), None);
    }

    proptest! {
        #[test]
        fn product_evaluates_as_product(p in arb_poly(5), q in arb_poly(5), y in -2.0f64..2.0, z in -2.0f64..2.0) {
            let direct = p.eval(y, z) * q.eval(y, z);
            let prod = (&p * &q).eval(y, z);
            let bound = 1e-12 * (1.0 + p.eval_abs(y, z) * q.eval_abs(y, z));
            prop_assert!((direct - prod).abs() <= bound);
        }

        #[test]
        fn sum_and_rescale_evaluate_consistently(p in arb_poly(6), q in arb_poly(4), y in -2.0f64..2.0, z in -2.0f64..2.0, s in 0.1f64..3.0) {
            let sum = (&p + &q).eval(y, z);
            prop_assert!((sum - p.eval(y, z) - q.eval(y, z)).abs() <= 1e-12 * (1.0 + p.eval_abs(y, z) + q.eval_abs(y, z)));
            let r = p.rescale_vars(s);
            prop_assert!((r.eval(y, z) - p.eval(s * y, s * z)).abs() <= 1e-11 * (1.0 + p.eval_abs(s * y, s * z)));
        }
    }
}
