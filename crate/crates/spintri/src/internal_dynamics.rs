//! Internal motion of `(u, v, w, δ)` along the conservation line.
//!
//! With `x = x₀ + g·u` the squared volume becomes a depressed cubic,
//! `ẋ² = Π(x) = 4x³ − g₂x − g₃`, and `x(t) = ℘(t + ω₃)` oscillates between
//! the two lowest roots. The reference phase puts `x = x₁` at `t = 0`.

use serde::{Deserialize, Serialize};

use crate::core_model::{Couplings, GramPoint};
use crate::error::{Error, Result};
use crate::special_functions::{
    half_periods, solve_depressed_cubic, weierstrass_p_shifted, CubicRoots, HalfPeriods,
};

/// Relative residual allowed on the cubic and quadratic coefficients of `Π`.
pub const COEF_TOL: f64 = 1e-10;

/// Affine parametrization of the conservation line by `u`, and the cubic `Π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineInvariants {
    pub g: f64,
    pub x0: f64,
    pub g2: f64,
    pub g3: f64,
    /// `v = v_slope·u + v0`.
    pub v_slope: f64,
    pub v0: f64,
    /// `w = w_slope·u + w0`.
    pub w_slope: f64,
    pub w0: f64,
    /// `δ = ẋ / xdot_per_delta`, i.e. `g(J₃ − J₂)`.
    pub xdot_per_delta: f64,
}

impl LineInvariants {
    pub fn u_of_x(&self, x: f64) -> f64 {
        (x - self.x0) / self.g
    }

    pub fn x_of_u(&self, u: f64) -> f64 {
        self.x0 + self.g * u
    }

    /// `(u, v, w)` at reduced coordinate `x`.
    pub fn uvw_at(&self, x: f64) -> (f64, f64, f64) {
        let u = self.u_of_x(x);
        (u, self.v_slope * u + self.v0, self.w_slope * u + self.w0)
    }

    pub fn discriminant(&self) -> f64 {
        crate::special_functions::discriminant(self.g2, self.g3)
    }

    /// `Π(x) = 4x³ − g₂x − g₃`.
    pub fn pi(&self, x: f64) -> f64 {
        4.0 * x * x * x - self.g2 * x - self.g3
    }

    /// `Π′(x) = 12x² − g₂`.
    pub fn pi_prime(&self, x: f64) -> f64 {
        12.0 * x * x - self.g2
    }
}

/// Reduction constants together with the roots and half-periods of `Π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeierstrassData {
    pub line: LineInvariants,
    pub roots: CubicRoots,
    pub periods: HalfPeriods,
    pub epsilon: f64,
    pub sigma: f64,
}

impl WeierstrassData {
    pub fn g(&self) -> f64 {
        self.line.g
    }

    pub fn x0(&self) -> f64 {
        self.line.x0
    }

    pub fn g2(&self) -> f64 {
        self.line.g2
    }

    pub fn g3(&self) -> f64 {
        self.line.g3
    }

    /// Internal period `T = 2ω₁`.
    pub fn period(&self) -> f64 {
        self.periods.period()
    }
}

/// Closed-form `g = −(J₁−J₂)(J₁−J₃)/2`.
pub fn scale_g(j: &Couplings) -> f64 {
    -0.5 * (j.j1 - j.j2) * (j.j1 - j.j3)
}

/// Closed-form shift `x₀`.
pub fn shift_x0(j: &Couplings, epsilon: f64, sigma: f64) -> f64 {
    let (j1, j2, j3) = (j.j1, j.j2, j.j3);
    (-j1 * j1 - j2 * j2 - j3 * j3
        + j1 * j3
        + j2 * j3
        + j1 * j2
        + (2.0 * j1 - j2 - j3) * epsilon
        + (2.0 * j2 * j3 - j1 * (j2 + j3)) * sigma)
        / 6.0
}

/// Coefficients of `δ²(u) = 1 − u² − v² − w² + 2uvw` with `v = a·u + b`, `w = c·u + d`.
fn delta_sq_poly(a: f64, b: f64, c: f64, d: f64) -> [f64; 4] {
    [
        1.0 - b * b - d * d,
        -2.0 * (a * b + c * d) + 2.0 * b * d,
        -1.0 - a * a - c * c + 2.0 * (a * d + b * c),
        2.0 * a * c,
    ]
}

/// Builds `x₀`, `g` and the invariants `g₂, g₃` of the line `H = ε`, `H₁ = σ`.
///
/// Requires `J₁ ∉ {J₂, J₃}` and `J₂ ≠ J₃`.
pub fn line_invariants(j: &Couplings, epsilon: f64, sigma: f64) -> Result<LineInvariants> {
    let (j1, j2, j3) = (j.j1, j.j2, j.j3);
    let g = scale_g(j);
    let d23 = j2 - j3;
    let scale_j = j1.abs().max(j2.abs()).max(j3.abs()).max(1e-300);
    if d23.abs() <= 1e-12 * scale_j || g.abs() <= 1e-24 * scale_j * scale_j {
        return Err(Error::NotGeneric(
            "Weierstrass reduction needs pairwise distinct couplings".into(),
        ));
    }
    let x0 = shift_x0(j, epsilon, sigma);
    let v_slope = (j3 - j1) / d23;
    let v0 = (epsilon - j3 * sigma) / d23;
    // Direct quotient: `−1 − v_slope` cancels badly when J₁ ≈ J₂.
    let w_slope = (j1 - j2) / d23;
    let w0 = sigma - v0;

    let coef = delta_sq_poly(v_slope, v0, w_slope, w0);

    // Π(x) = K·P((x − x₀)/g) expanded in powers of x.
    let kk = g * g * d23 * d23;
    let (p0, p1, p2, p3) = (coef[0], coef[1], coef[2], coef[3]);
    let (g1, g2p, g3p) = (g, g * g, g * g * g);
    let c3 = kk * p3 / g3p;
    let c2 = kk * (p2 / g2p - 3.0 * p3 * x0 / g3p);
    let c1 = kk * (p1 / g1 - 2.0 * p2 * x0 / g2p + 3.0 * p3 * x0 * x0 / g3p);
    let c0 = kk * (p0 - p1 * x0 / g1 + p2 * x0 * x0 / g2p - p3 * x0 * x0 * x0 / g3p);

    let term_scale = kk
        * [p0, p1 / g1, p2 / g2p, p3 / g3p]
            .iter()
            .map(|c| c.abs())
            .fold(1.0, f64::max)
        * (1.0 + x0.abs()).powi(3);
    if (c3 - 4.0).abs() > COEF_TOL * term_scale.max(4.0) || c2.abs() > COEF_TOL * term_scale {
        return Err(Error::Domain(format!(
            "Weierstrass reduction inconsistent: cubic {c3}, quadratic {c2}"
        )));
    }
    Ok(LineInvariants {
        g,
        x0,
        g2: -c1,
        g3: -c0,
        v_slope,
        v0,
        w_slope,
        w0,
        xdot_per_delta: g * (j3 - j2),
    })
}

/// Full reduction for a generic instance.
pub fn reduce(j: &Couplings, epsilon: f64, sigma: f64) -> Result<WeierstrassData> {
    let line = line_invariants(j, epsilon, sigma)?;
    let roots = refine_turning_points(&line, solve_depressed_cubic(line.g2, line.g3)?);
    let periods = half_periods(&roots)?;
    Ok(WeierstrassData {
        line,
        roots,
        periods,
        epsilon,
        sigma,
    })
}

/// Recomputes `x₁, x₂` as roots of `δ²(u)`.
///
/// Near equal couplings `g → 0` squeezes the turning points together in `x`,
/// where the cubic formula loses half the digits, while in `u` they stay far
/// apart. Falls back to `rough` when no positive local maximum of `δ²` exists.
fn refine_turning_points(line: &LineInvariants, rough: CubicRoots) -> CubicRoots {
    let p = delta_sq_poly(line.v_slope, line.v0, line.w_slope, line.w0);
    let eval = |u: f64| ((p[3] * u + p[2]) * u + p[1]) * u + p[0];
    // Critical points of δ²: 3p₃u² + 2p₂u + p₁ = 0, in the cancellation-free form.
    let (a, b, c) = (3.0 * p[3], 2.0 * p[2], p[1]);
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        return rough;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let peak = [q / a, c / q]
        .into_iter()
        .find(|u| u.is_finite() && 6.0 * p[3] * u + 2.0 * p[2] < 0.0 && eval(*u) > 0.0);
    let Some(uc) = peak else { return rough };
    let mut ends = [0.0; 2];
    for (end, dir) in ends.iter_mut().zip([-1.0, 1.0]) {
        let mut h = 1e-3;
        while eval(uc + dir * h) > 0.0 {
            h *= 2.0;
            if h > 1e6 {
                return rough;
            }
        }
        let (mut inside, mut outside) = (uc, uc + dir * h);
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if eval(mid) > 0.0 {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        *end = line.x_of_u(0.5 * (inside + outside));
    }
    let (x1, x2) = (ends[0].min(ends[1]), ends[0].max(ends[1]));
    let x3 = -(x1 + x2);
    if !(x3 > x2) || (x1 - rough.x1).abs() + (x2 - rough.x2).abs() > 1e-6 * (1.0 + rough.x3.abs()) {
        return rough;
    }
    CubicRoots { x1, x2, x3 }
}

/// `(x(t), ẋ(t))` on the reference trajectory.
pub fn reduced_coordinate(t: f64, wd: &WeierstrassData) -> (f64, f64) {
    weierstrass_p_shifted(t, &wd.roots).expect("reduction holds simple roots")
}

/// Gram point at time `t` of the reference trajectory (`x = x₁` at `t = 0`).
pub fn internal_state(t: f64, wd: &WeierstrassData) -> GramPoint {
    let (x, xdot) = reduced_coordinate(t, wd);
    gram_at(x, xdot, wd)
}

/// Gram point for a given `(x, ẋ)` on the line.
pub fn gram_at(x: f64, xdot: f64, wd: &WeierstrassData) -> GramPoint {
    let (u, v, w) = wd.line.uvw_at(x);
    GramPoint::new(u, v, w, xdot / wd.line.xdot_per_delta)
}

/// Time derivatives `(u̇, v̇, ẇ, δ̇)`.
pub fn internal_rates(gp: &GramPoint, j: &Couplings) -> (f64, f64, f64, f64) {
    let GramPoint { u, v, w, delta } = *gp;
    (
        (j.j3 - j.j2) * delta,
        (j.j1 - j.j3) * delta,
        (j.j2 - j.j1) * delta,
        j.j1 * (u + 1.0) * (w - v) + j.j2 * (v + 1.0) * (u - w) + j.j3 * (w + 1.0) * (v - u),
    )
}
