//! Low-level integration kernels for `d^beta * polynomial` on a segment where
//! the distance `d` varies linearly.
//!
//! Exponents are carried as `beta + 1` so that weights with `beta` extremely
//! close to `-1` keep their precision.

use std::sync::OnceLock;

const GAUSS_POINTS: usize = 10;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(GAUSS_POINTS))
}

fn legendre_rule(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule
}

/// `b^e - a^e` for `0 <= a <= b` and `e > 0` without cancellation.
pub(crate) fn pow_diff(a: f64, b: f64, e: f64) -> f64 {
    if a <= 0.0 {
        return b.powf(e);
    }
    if b <= a {
        return 0.0;
    }
    a.powf(e) * (e * ((b - a) / a).ln_1p()).exp_m1()
}

/// `d^beta` with `beta = beta1 - 1`.
#[inline]
pub(crate) fn singular_power(d: f64, beta1: f64) -> f64 {
    if beta1 == 1.0 {
        return 1.0;
    }
    (beta1 * d.ln()).exp() / d
}

/// Polynomial with coefficients in increasing degree.
#[derive(Debug, Clone)]
pub(crate) struct Poly(pub Vec<f64>);

impl Poly {
    pub fn one() -> Self {
        Poly(vec![1.0])
    }

    /// The linear function through `(d0, v0)` and `(d1, v1)`.
    pub fn linear_through(d0: f64, v0: f64, d1: f64, v1: f64) -> Self {
        let slope = (v1 - v0) / (d1 - d0);
        Poly(vec![v0 - slope * d0, slope])
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn powi(&self, k: usize) -> Poly {
        (0..k).fold(Poly::one(), |acc, _| acc.mul(self))
    }
}

/// A straight piece of a cell on which `d` is monotone and affine in `x`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Piece {
    pub d_lo: f64,
    pub d_hi: f64,
    pub x_at_lo: f64,
    pub x_at_hi: f64,
}

impl Piece {
    pub fn x_of(&self, d: f64) -> f64 {
        if self.d_hi == self.d_lo {
            return self.x_at_lo;
        }
        self.x_at_lo + (d - self.d_lo) * (self.x_at_hi - self.x_at_lo) / (self.d_hi - self.d_lo)
    }
}

/// Integrates `d^beta * prod_k lin_k * density(x)` over a piece.
///
/// Each affine factor is given by its values at `d_lo` and `d_hi`;
/// `density` is `coef * x^power` (power 0 for the interval).
pub(crate) fn piece_integral(
    beta1: f64,
    piece: &Piece,
    lin: &[(f64, f64)],
    density_coef: f64,
    density_power: usize,
) -> f64 {
    let (lo, hi) = (piece.d_lo, piece.d_hi);
    if hi <= lo {
        return 0.0;
    }
    if lo >= 2.0 * (hi - lo) {
        // singularity well separated from the piece: smooth integrand
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        return gauss_legendre()
            .iter()
            .map(|&(t, w)| {
                let d = mid + half * t;
                let s = 0.5 * (1.0 + t);
                let x = piece.x_of(d);
                let l: f64 = lin.iter().map(|&(a, b)| a + s * (b - a)).product();
                w * singular_power(d, beta1) * l * density_coef * x.powi(density_power as i32)
            })
            .sum::<f64>()
            * half;
    }
    // near d = 0: expand everything as a polynomial in d and integrate exactly
    let x_poly = Poly::linear_through(lo, piece.x_at_lo, hi, piece.x_at_hi);
    let mut poly = x_poly.powi(density_power);
    for c in poly.0.iter_mut() {
        *c *= density_coef;
    }
    for &(a, b) in lin {
        poly = poly.mul(&Poly::linear_through(lo, a, hi, b));
    }
    poly.0
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let e = beta1 + k as f64;
            c * pow_diff(lo, hi, e) / e
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let rule = gauss_legendre();
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((total - 2.0).abs() < 1e-14);
        // x^18 over [-1,1] = 2/19
        let m: f64 = rule.iter().map(|(x, w)| w * x.powi(18)).sum();
        assert!((m - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn pow_diff_matches_naive_when_well_conditioned() {
        let a: f64 = 0.3;
        let b: f64 = 0.7;
        assert!((pow_diff(a, b, 0.5) - (b.sqrt() - a.sqrt())).abs() < 1e-15);
        assert_eq!(pow_diff(0.0, 4.0, 0.5), 2.0);
    }

    #[test]
    fn pow_diff_keeps_precision_for_tiny_exponents() {
        // (b^e - a^e)/e -> ln(b/a) as e -> 0
        let e = 1e-14;
        let v = pow_diff(0.1, 0.2, e) / e;
        assert!((v - 2f64.ln()).abs() < 1e-10);
    }
}
