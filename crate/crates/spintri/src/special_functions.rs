//! Elliptic-function and polynomial kernels for the rectangular lattice.
//!
//! The parameter convention is `m = k²` throughout. The Weierstrass function
//! is only needed for three real roots `x1 < x2 < x3`, where it reduces to a
//! Jacobi `sn²` with real argument.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative closeness below which two cubic roots count as coincident.
pub const DEGENERATE_ROOT_TOL: f64 = 1e-9;

/// Relative band around zero in which the discriminant is treated as exactly zero.
pub const DISCRIMINANT_TOL: f64 = 1e-12;

/// Sorted real roots of `4x³ − g₂x − g₃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicRoots {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl CubicRoots {
    pub fn as_array(&self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    /// True when two roots coincide within [`DEGENERATE_ROOT_TOL`].
    pub fn is_degenerate(&self) -> bool {
        let tol = DEGENERATE_ROOT_TOL * (1.0 + (self.x3 - self.x1).abs());
        (self.x2 - self.x1).abs() <= tol || (self.x3 - self.x2).abs() <= tol
    }

    fn require_simple(&self) -> Result<()> {
        if self.is_degenerate() {
            Err(Error::DegenerateRoots {
                roots: self.as_array(),
            })
        } else {
            Ok(())
        }
    }

    /// Parameter `m = (x2 − x1)/(x3 − x1)` of the Jacobi representation.
    pub fn parameter(&self) -> f64 {
        (self.x2 - self.x1) / (self.x3 - self.x1)
    }
}

/// Real and imaginary half-periods of ℘ on a rectangular lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPeriods {
    pub omega1: f64,
    pub omega3_im: f64,
}

impl HalfPeriods {
    /// Full real period `T = 2ω₁`.
    pub fn period(&self) -> f64 {
        2.0 * self.omega1
    }
}

fn check_parameter(m: f64) -> Result<()> {
    if m.is_nan() || !(0.0..1.0).contains(&m) {
        Err(Error::Domain(format!(
            "elliptic parameter m = {m} outside [0, 1)"
        )))
    } else {
        Ok(())
    }
}

/// Arithmetic-geometric mean of two positive numbers.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        if (an - bn).abs() <= 1e-16 * an {
            return an;
        }
        a = an;
        b = bn;
    }
    a
}

/// Complete elliptic integral of the first kind, `K(m)`.
pub fn complete_elliptic_k(m: f64) -> Result<f64> {
    check_parameter(m)?;
    Ok(PI / (2.0 * agm(1.0, (1.0 - m).sqrt())))
}

/// Jacobi `(sn, cn, dn)` by descending Landen transformation.
pub fn jacobi_sn_cn_dn(u: f64, m: f64) -> Result<(f64, f64, f64)> {
    check_parameter(m)?;
    if m == 0.0 {
        return Ok((u.sin(), u.cos(), 1.0));
    }
    // sn, cn have real period 4K; reducing keeps the scaled phase small.
    let quarter = complete_elliptic_k(m)?;
    let u = u.rem_euclid(4.0 * quarter);

    let mut a = [0.0f64; 32];
    let mut c = [0.0f64; 32];
    a[0] = 1.0;
    c[0] = m.sqrt();
    let mut b = (1.0 - m).sqrt();
    let mut n = 0;
    while c[n].abs() > 1e-16 && n < 31 {
        let an = 0.5 * (a[n] + b);
        c[n + 1] = 0.5 * (a[n] - b);
        b = (a[n] * b).sqrt();
        a[n + 1] = an;
        n += 1;
    }
    let mut phi = f64::powi(2.0, n as i32) * a[n] * u;
    for i in (1..=n).rev() {
        phi = 0.5 * (phi + (c[i] / a[i] * phi.sin()).asin());
    }
    let (sn, cn) = phi.sin_cos();
    let dn = (1.0 - m * sn * sn).max(0.0).sqrt();
    Ok((sn, cn, dn))
}

/// Jacobi `sn(u | m)`.
pub fn jacobi_sn(u: f64, m: f64) -> Result<f64> {
    jacobi_sn_cn_dn(u, m).map(|(sn, _, _)| sn)
}

/// Discriminant `g₂³ − 27g₃²` of `4x³ − g₂x − g₃`.
pub fn discriminant(g2: f64, g3: f64) -> f64 {
    g2 * g2 * g2 - 27.0 * g3 * g3
}

fn cubic_value(x: f64, g2: f64, g3: f64) -> f64 {
    4.0 * x * x * x - g2 * x - g3
}

fn newton_polish(x: f64, g2: f64, g3: f64) -> f64 {
    let d = 12.0 * x * x - g2;
    if d == 0.0 {
        return x;
    }
    let step = cubic_value(x, g2, g3) / d;
    let candidate = x - step;
    if cubic_value(candidate, g2, g3).abs() <= cubic_value(x, g2, g3).abs() {
        candidate
    } else {
        x
    }
}

/// Sorted real roots of `4x³ − g₂x − g₃ = 0`.
pub fn solve_depressed_cubic(g2: f64, g3: f64) -> Result<CubicRoots> {
    let disc = discriminant(g2, g3);
    let scale = (g2.abs().powi(3)).max(27.0 * g3 * g3);
    if disc < -DISCRIMINANT_TOL * scale {
        return Err(Error::ComplexRoots { g2, g3 });
    }
    if g2 <= 0.0 || scale == 0.0 {
        // Three real roots with g₂ ≤ 0 forces the triple root at the origin.
        return Ok(CubicRoots {
            x1: 0.0,
            x2: 0.0,
            x3: 0.0,
        });
    }
    if disc <= 0.0 {
        // 4(x − a)²(x + 2a) with g₂ = 12a², g₃ = −8a³.
        let a = -1.5 * g3 / g2;
        return Ok(if a < 0.0 {
            CubicRoots {
                x1: a,
                x2: a,
                x3: -2.0 * a,
            }
        } else {
            CubicRoots {
                x1: -2.0 * a,
                x2: a,
                x3: a,
            }
        });
    }
    let r = (g2 / 12.0).sqrt();
    let arg = (g3 / (8.0 * r * r * r)).clamp(-1.0, 1.0);
    let theta = arg.acos() / 3.0;
    let mut xs = [0.0f64; 3];
    for (k, x) in xs.iter_mut().enumerate() {
        let raw = 2.0 * r * (theta - 2.0 * PI * k as f64 / 3.0).cos();
        *x = newton_polish(raw, g2, g3);
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    Ok(CubicRoots {
        x1: xs[0],
        x2: xs[1],
        x3: xs[2],
    })
}

/// Half-periods `(ω₁, Im ω₃)` for three simple real roots.
pub fn half_periods(roots: &CubicRoots) -> Result<HalfPeriods> {
    roots.require_simple()?;
    let span = roots.x3 - roots.x1;
    let root_span = span.sqrt();
    let m = (roots.x2 - roots.x1) / span;
    let m_comp = (roots.x3 - roots.x2) / span;
    Ok(HalfPeriods {
        omega1: complete_elliptic_k(m)? / root_span,
        omega3_im: complete_elliptic_k(m_comp)? / root_span,
    })
}

/// Limit of the real period when the two lowest roots merge: `2π/√(12|x_a|)`.
pub fn harmonic_period(double_root: f64) -> f64 {
    2.0 * PI / (12.0 * double_root.abs()).sqrt()
}

/// `(℘(t + ω₃), ℘′(t + ω₃))`, oscillating between `x1` and `x2`.
pub fn weierstrass_p_shifted(t: f64, roots: &CubicRoots) -> Result<(f64, f64)> {
    roots.require_simple()?;
    let span = roots.x3 - roots.x1;
    let root_span = span.sqrt();
    let gap = roots.x2 - roots.x1;
    let (sn, cn, dn) = jacobi_sn_cn_dn(t * root_span, gap / span)?;
    let x = roots.x1 + gap * sn * sn;
    let xdot = 2.0 * gap * root_span * sn * cn * dn;
    Ok((x, xdot))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k_by_quadrature(m: f64) -> f64 {
        // Composite Simpson in the substitution θ; the integrand is smooth for m < 1.
        let n = 20_000;
        let h = 0.5 * PI / n as f64;
        let f = |th: f64| 1.0 / (1.0 - m * th.sin().powi(2)).sqrt();
        let mut acc = f(0.0) + f(0.5 * PI);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn k_reference_values() {
        assert_eq!(complete_elliptic_k(0.0).unwrap(), 0.5 * PI);
        let m = (2.0 + 3.0 * 2f64.sqrt()) / 14.0;
        let k = complete_elliptic_k(m).unwrap();
        // Reference from a 30-digit evaluation.
        assert!((k - 1.810_769_910_259_438).abs() < 1e-13, "{k}");
        assert!((k - k_by_quadrature(m)).abs() < 1e-11 * k);
        let big = complete_elliptic_k(0.999_999).unwrap();
        assert!(big.is_finite() && big > 7.0);
        assert!(complete_elliptic_k(1.0).is_err());
        assert!(complete_elliptic_k(-0.1).is_err());
    }

    #[test]
    fn k_matches_quadrature_over_parameter_grid() {
        for i in 1..=99 {
            let m = i as f64 / 100.0;
            let k = complete_elliptic_k(m).unwrap();
            let q = k_by_quadrature(m);
            assert!((k - q).abs() <= 1e-11 * q, "m={m}: {k} vs {q}");
        }
    }

    #[test]
    fn sn_special_values() {
        for &m in &[0.0, 0.1, 0.5, 0.9, 0.999] {
            assert_eq!(jacobi_sn(0.0, m).unwrap(), 0.0);
            let k = complete_elliptic_k(m).unwrap();
            assert!((jacobi_sn(k, m).unwrap() - 1.0).abs() < 1e-12);
        }
        for &u in &[-3.0, 0.3, 1.7, 25.0] {
            assert_eq!(jacobi_sn(u, 0.0).unwrap(), u.sin());
        }
        assert!(jacobi_sn(0.3, 1.0).is_err());
    }

    #[test]
    fn sn_satisfies_its_differential_equation() {
        // (sn')² = (1 − sn²)(1 − m sn²) with sn' = cn·dn.
        for &m in &[0.2, 0.7, 0.95] {
            for i in 0..50 {
                let u = -5.0 + 0.23 * i as f64;
                let (sn, cn, dn) = jacobi_sn_cn_dn(u, m).unwrap();
                assert!((sn * sn + cn * cn - 1.0).abs() < 1e-14);
                let h = 1e-5;
                let fd = (jacobi_sn(u + h, m).unwrap() - jacobi_sn(u - h, m).unwrap()) / (2.0 * h);
                assert!((fd - cn * dn).abs() < 1e-9, "m={m} u={u}");
            }
        }
    }

    #[test]
    fn cubic_reference_cases() {
        let s2 = 2f64.sqrt();
        let g2 = (4680.0 + 3240.0 * s2) / 6912.0;
        let g3 = (193.0 + 135.0 * s2) / 6912.0;
        let r = solve_depressed_cubic(g2, g3).unwrap();
        assert!((r.x1 - (-14.0 - 9.0 * s2) / 48.0).abs() < 1e-14);
        assert!((r.x2 + 1.0 / 24.0).abs() < 1e-14);
        assert!((r.x3 - (16.0 + 9.0 * s2) / 48.0).abs() < 1e-14);

        let r = solve_depressed_cubic(0.0, 0.0).unwrap();
        assert_eq!(r.as_array(), [0.0, 0.0, 0.0]);

        let r = solve_depressed_cubic(4.0, 0.0).unwrap();
        assert!((r.x1 + 1.0).abs() < 1e-15 && r.x2.abs() < 1e-15 && (r.x3 - 1.0).abs() < 1e-15);

        assert!(matches!(
            solve_depressed_cubic(1.0, 1.0),
            Err(Error::ComplexRoots { .. })
        ));
    }

    #[test]
    fn cubic_double_root_is_exact() {
        let a = -0.3;
        let r = solve_depressed_cubic(12.0 * a * a, -8.0 * a * a * a).unwrap();
        assert_eq!(r.x1, r.x2);
        assert!((r.x1 - a).abs() < 1e-15);
        assert!((r.x3 + 2.0 * a).abs() < 1e-15);
        assert!(r.is_degenerate());
        assert!(half_periods(&r).is_err());
    }

    #[test]
    fn half_periods_reference() {
        let r = CubicRoots {
            x1: -1.0,
            x2: 0.0,
            x3: 1.0,
        };
        let hp = half_periods(&r).unwrap();
        let expect = k_by_quadrature(0.5) / 2f64.sqrt();
        assert!((hp.omega1 - expect).abs() < 1e-12);
        assert!((hp.omega1 - hp.omega3_im).abs() < 1e-14);
    }

    #[test]
    fn half_periods_approach_harmonic_limit() {
        let xa = -0.2;
        let eps = 1e-7;
        let r = CubicRoots {
            x1: xa - eps,
            x2: xa + eps,
            x3: -2.0 * xa,
        };
        let hp = half_periods(&r).unwrap();
        assert!((hp.period() - harmonic_period(xa)).abs() < 1e-6);
    }

    #[test]
    fn shifted_p_turning_points() {
        let r = solve_depressed_cubic(4.0, 0.3).unwrap();
        let hp = half_periods(&r).unwrap();
        let (x, xd) = weierstrass_p_shifted(0.0, &r).unwrap();
        assert_eq!((x, xd), (r.x1, 0.0));
        let (x, xd) = weierstrass_p_shifted(hp.omega1, &r).unwrap();
        assert!((x - r.x2).abs() < 1e-13 && xd.abs() < 1e-12);
    }
}
