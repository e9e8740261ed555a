//! Rotation of the configuration about the total spin.
//!
//! The motion is `s(t) = Z(t)·r(t)` with `r` the standard configuration of
//! the internal state and `Z(t) = ℛ(S, α(t))`. The rate `α̇` is the `(2,1)`
//! entry of `Ω = (𝒥(r) − ṙ)·r⁻¹`; at the turning points, where `r` is
//! singular, the limit along the conservation line is used instead.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::core_model::{
    best_rotation, conserved_values, gram, standard_columns, standard_config, torque_field,
    total_spin_length, ConservedValues, Couplings, Evolution, GramPoint, Mat3, Rotation, SpinConfiguration,
};
use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::gram_geometry::{classify_state, critical_energies, energy_range, CaseLabel};
use crate::internal_dynamics::{internal_rates, internal_state, reduce, reduced_coordinate, WeierstrassData};
use crate::quadrature::{gk15, integrate_panels, integrate_with_budget};

/// Grid cells per period for the cached `α`.
pub const ALPHA_GRID: usize = 4096;

/// `δ_switch` as a fraction of `max |δ|` on the orbit.
pub const DELTA_SWITCH_FRACTION: f64 = 1e-5;

/// Absolute tolerance of the `α` quadrature over one period.
pub const ALPHA_TOL: f64 = 1e-10;

/// Denominator of the turning-point limit below which `α̇` is treated as divergent.
pub const CRITICAL_DENOM_TOL: f64 = 1e-10;

/// Tolerance on the Gram point recovered by phase matching.
pub const PHASE_MATCH_TOL: f64 = 1e-8;

/// `max |δ|` on the orbit, attained where `Π` has its local maximum.
pub fn max_abs_delta(wd: &WeierstrassData) -> f64 {
    let xa = -(wd.g2() / 12.0).sqrt();
    wd.line.pi(xa).max(0.0).sqrt() / wd.line.xdot_per_delta.abs()
}

pub fn delta_switch(wd: &WeierstrassData) -> f64 {
    DELTA_SWITCH_FRACTION * max_abs_delta(wd)
}

/// `α̇` from the full matrix formula; `None` when `r` is not invertible.
pub fn alpha_rate_full(gp: &GramPoint, j: &Couplings) -> Option<f64> {
    let (du, dv, dw, dd) = internal_rates(gp, j);
    let cols = standard_columns(
        Dual::new(gp.u, du),
        Dual::new(gp.v, dv),
        Dual::new(gp.w, dw),
        Dual::new(gp.delta, dd),
    )?;
    let r = Mat3::from_fn(|i, mu| cols[mu][i].re);
    let rdot = Mat3::from_fn(|i, mu| cols[mu][i].du);
    let jr = torque_field(&SpinConfiguration::from_matrix_unchecked(r), j);
    let omega = (jr - rdot) * r.try_inverse()?;
    Some(omega[(1, 0)])
}

/// `α̇` at a turning point (`δ = 0`), from the limit along the line.
pub fn alpha_rate_limit(u: f64, j: &Couplings, epsilon: f64, sigma: f64) -> Result<f64> {
    let denom = 2.0 * (u + 1.0) - (u - sigma) * (u - sigma);
    if denom.abs() < CRITICAL_DENOM_TOL {
        return Err(Error::CriticalPointSingularity { u });
    }
    let s = total_spin_length(sigma);
    Ok(s * ((j.j2 + j.j3) * (u + 1.0) - (u - sigma) * (j.j1 * u - epsilon)) / denom)
}

/// `α̇` at a Gram point, switching to the limit form for `|δ| ≤ switch`.
pub fn alpha_rate(gp: &GramPoint, j: &Couplings, wd: &WeierstrassData, switch: f64) -> Result<f64> {
    if gp.delta.abs() > switch {
        if let Some(rate) = alpha_rate_full(gp, j) {
            return Ok(rate);
        }
    }
    alpha_rate_limit(gp.u, j, wd.epsilon, wd.sigma)
}

/// `α̇(t)` on the reference trajectory.
pub fn omega_dot_alpha(t: f64, wd: &WeierstrassData, j: &Couplings) -> Result<f64> {
    alpha_rate(&internal_state(t, wd), j, wd, delta_switch(wd))
}

/// `α(T)` by adaptive quadrature with the turning points as panel breaks.
pub fn raw_alpha_period(j: &Couplings, epsilon: f64, sigma: f64) -> Result<f64> {
    let wd = reduce(j, epsilon, sigma)?;
    period_integral(&wd, j)
}

fn period_integral(wd: &WeierstrassData, j: &Couplings) -> Result<f64> {
    let period = wd.period();
    let switch = delta_switch(wd);
    integrate_panels(
        |t| alpha_rate(&internal_state(t, wd), j, wd, switch),
        &[0.0, 0.5 * period, period],
        ALPHA_TOL,
    )
}

/// Generic solution for an arbitrary initial configuration.
#[derive(Debug, Clone)]
pub struct ExternalSolution {
    pub couplings: Couplings,
    pub conserved: ConservedValues,
    pub wd: WeierstrassData,
    /// Maps the standard frame onto the lab frame.
    pub alignment_rotation: Rotation,
    /// Reference-trajectory time at which the initial condition sits.
    pub t_init: f64,
    /// `α(T)` as integrated; differs from the smoothed branch by a multiple of `2π`.
    pub alpha_period: f64,
    delta_switch: f64,
    /// Cumulative `α` of the reference trajectory at `k·T/ALPHA_GRID`.
    alpha_table: Vec<f64>,
    alpha_at_init: f64,
}

impl ExternalSolution {
    pub fn period(&self) -> f64 {
        self.wd.period()
    }

    pub fn alpha_table(&self) -> &[f64] {
        &self.alpha_table
    }

    fn rate(&self, t: f64) -> Result<f64> {
        alpha_rate(
            &internal_state(t, &self.wd),
            &self.couplings,
            &self.wd,
            self.delta_switch,
        )
    }

    /// `∫₀ᵗ α̇` along the reference trajectory (`x = x₁` at `t = 0`).
    pub fn reference_alpha(&self, t: f64) -> Result<f64> {
        let period = self.period();
        let h = period / ALPHA_GRID as f64;
        let n = (t / period).floor();
        let tau = t - n * period;
        let k = ((tau / h).floor() as usize).min(ALPHA_GRID - 1);
        let tk = k as f64 * h;
        let (tail, _) = gk15(&mut |s| self.rate(s), tk, tau)?;
        Ok(n * self.alpha_period + self.alpha_table[k] + tail)
    }

    /// `α(t)` relative to the initial condition, so that `α(0) = 0`.
    pub fn alpha(&self, t: f64) -> Result<f64> {
        Ok(self.reference_alpha(t + self.t_init)? - self.alpha_at_init)
    }

    pub fn internal_state(&self, t: f64) -> GramPoint {
        internal_state(t + self.t_init, &self.wd)
    }

    pub fn evaluate(&self, t: f64) -> Result<SpinConfiguration> {
        let r = standard_config(&self.internal_state(t))?;
        let z = Rotation::about_z(self.alpha(t)?);
        Ok(r.rotated(&self.alignment_rotation.compose(&z)))
    }

    /// `α(T)` on the branch that is continuous in `ε` from the bottom of the energy range.
    pub fn smoothed_alpha_period(&self) -> Result<f64> {
        Ok(self.alpha_period - alpha_branch_offset(&self.couplings, self.wd.sigma, self.wd.epsilon)?)
    }
}

impl Evolution for ExternalSolution {
    fn couplings(&self) -> Couplings {
        self.couplings
    }

    fn state(&self, t: f64) -> Result<SpinConfiguration> {
        self.evaluate(t)
    }

    fn period(&self) -> Option<f64> {
        Some(self.wd.period())
    }
}

/// Solves the generic initial-value problem.
pub fn solve(j: &Couplings, s0: &SpinConfiguration) -> Result<ExternalSolution> {
    let label = classify_state(j, s0)?;
    if label != CaseLabel::Generic {
        return Err(Error::NotGeneric(label.name().into()));
    }
    let cv = conserved_values(s0, j);
    let wd = reduce(j, cv.epsilon, cv.sigma)?;
    let target = gram(s0);
    let t_init = match_phase(&wd, &target)?;

    let found = internal_state(t_init, &wd);
    let mismatch = (found.u - target.u)
        .abs()
        .max((found.v - target.v).abs())
        .max((found.w - target.w).abs())
        .max((found.delta - target.delta).abs());
    if mismatch > PHASE_MATCH_TOL {
        return Err(Error::NoPhaseMatch(format!(
            "Gram point off the reference orbit by {mismatch:e}"
        )));
    }
    let r0 = standard_config(&found)?;
    let alignment = best_rotation(&r0, s0)?;
    let residual = r0.rotated(&alignment).max_abs_diff(s0);
    if residual > 1e-7 {
        return Err(Error::NoPhaseMatch(format!("alignment residual {residual:e}")));
    }

    let alpha_table = reference_alpha_grid(&wd, j, ALPHA_GRID)?;
    let mut sol = ExternalSolution {
        couplings: *j,
        conserved: cv,
        wd,
        alignment_rotation: alignment,
        t_init,
        alpha_period: alpha_table[ALPHA_GRID],
        delta_switch: delta_switch(&wd),
        alpha_table,
        alpha_at_init: 0.0,
    };
    sol.alpha_at_init = sol.reference_alpha(t_init)?;
    Ok(sol)
}

/// Cumulative `α` of the reference trajectory at `k·T/cells`, `k = 0..=cells`.
pub fn reference_alpha_grid(wd: &WeierstrassData, j: &Couplings, cells: usize) -> Result<Vec<f64>> {
    let switch = delta_switch(wd);
    let h = wd.period() / cells as f64;
    let cell_tol = ALPHA_TOL / cells as f64;
    let mut rate = |t: f64| alpha_rate(&internal_state(t, wd), j, wd, switch);
    let mut table = Vec::with_capacity(cells + 1);
    table.push(0.0);
    let mut acc = 0.0;
    for k in 0..cells {
        acc += integrate_with_budget(&mut rate, k as f64 * h, (k + 1) as f64 * h, cell_tol, 200)?.0;
        table.push(acc);
    }
    Ok(table)
}

/// Time `t ∈ [0, T)` on the reference trajectory reproducing `(u, δ)` of `target`.
fn match_phase(wd: &WeierstrassData, target: &GramPoint) -> Result<f64> {
    let period = wd.period();
    let roots = wd.roots;
    let x_t = wd.line.x_of_u(target.u).clamp(roots.x1, roots.x2);
    let xdot_t = wd.line.xdot_per_delta * target.delta;

    // x increases from x₁ to x₂ on the first half period.
    let (mut lo, mut hi) = (0.0, 0.5 * period);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if reduced_coordinate(mid, wd).0 < x_t {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * period {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    let residual = |t: f64| {
        let (x, xd) = reduced_coordinate(t, wd);
        (x - x_t, xd - xdot_t, xd)
    };
    let cost = |t: f64| {
        let (a, b, _) = residual(t);
        a * a + b * b
    };
    let mut t = if cost(tau) <= cost(period - tau) {
        tau
    } else {
        period - tau
    };
    // Gauss–Newton on (x − x_t, ẋ − ẋ_t) with Jacobian (ẋ, ẍ).
    for _ in 0..8 {
        let (rx, rxd, xd) = residual(t);
        let x = rx + x_t;
        let xdd = 0.5 * wd.line.pi_prime(x);
        let jj = xd * xd + xdd * xdd;
        if jj == 0.0 {
            break;
        }
        let step = -(xd * rx + xdd * rxd) / jj;
        let trial = t + step;
        if cost(trial) >= cost(t) {
            break;
        }
        t = trial;
    }
    if !t.is_finite() {
        return Err(Error::NoPhaseMatch("phase search diverged".into()));
    }
    Ok(t.rem_euclid(period))
}

/// Representative of `a` modulo `2π` in `(−π, π]`.
pub fn principal_angle(a: f64) -> f64 {
    let r = a - 2.0 * PI * (a / (2.0 * PI)).round();
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Floquet data of the rotation `Z(t) = P(t)·e^{F t}`.
#[derive(Debug, Clone, Copy)]
pub struct Floquet {
    /// Quasienergy `f = α(T)/T`, with `α(T)` taken in `(−π, π]`.
    pub f: f64,
    pub z_t: Rotation,
    /// `‖e^{F T} − Z_T‖_max`.
    pub reconstruction_error: f64,
}

fn generator_z(rate: f64) -> Mat3 {
    Matrix3::new(0.0, -rate, 0.0, rate, 0.0, 0.0, 0.0, 0.0, 0.0)
}

pub fn floquet_monodromy(sol: &ExternalSolution) -> Floquet {
    let period = sol.period();
    let f = principal_angle(sol.alpha_period) / period;
    let z_t = Rotation::about_z(sol.alpha_period);
    let exp_ft = (generator_z(f) * period).exp();
    let reconstruction_error = (exp_ft - z_t.r).abs().max();
    Floquet {
        f,
        z_t,
        reconstruction_error,
    }
}

impl Floquet {
    /// `P(t) = Z(t)·e^{−F t}` on the reference trajectory; `T`-periodic.
    pub fn periodic_part(&self, sol: &ExternalSolution, t: f64) -> Result<Rotation> {
        let z = Rotation::about_z(sol.reference_alpha(t)?);
        Ok(Rotation {
            r: z.r * (generator_z(-self.f) * t).exp(),
        })
    }
}

/// Sum of `2π` jumps of the raw `α(T)` at critical energies in `(E_min, ε)`.
pub fn alpha_branch_offset(j: &Couplings, sigma: f64, epsilon: f64) -> Result<f64> {
    let range = energy_range(j, sigma)?;
    let width = range.e_max - range.e_min;
    let h = 1e-4 * width;
    let mut offset = 0.0;
    for (ec, _) in critical_energies(j, sigma) {
        if ec - h <= range.e_min || ec + h >= range.e_max || ec >= epsilon {
            continue;
        }
        let jump = raw_alpha_period(j, ec + h, sigma)? - raw_alpha_period(j, ec - h, sigma)?;
        offset += 2.0 * PI * (jump / (2.0 * PI)).round();
    }
    Ok(offset)
}

/// One row of a smoothed `α(T)` table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaPeriodSample {
    pub epsilon: f64,
    pub raw: f64,
    pub smoothed: f64,
}

/// `α(T)` over an increasing energy grid with `2π` jumps at critical energies removed.
pub fn smoothed_alpha_t(j: &Couplings, sigma: f64, epsilon_grid: &[f64]) -> Result<Vec<AlphaPeriodSample>> {
    let crit: Vec<f64> = critical_energies(j, sigma).into_iter().map(|c| c.0).collect();
    let mut out: Vec<AlphaPeriodSample> = Vec::with_capacity(epsilon_grid.len());
    let mut offset = 0.0;
    for &eps in epsilon_grid {
        let raw = raw_alpha_period(j, eps, sigma)?;
        if let Some(prev) = out.last() {
            let diff = raw - prev.raw;
            let k = (diff / (2.0 * PI)).round();
            let straddled = crit.iter().find(|&&c| prev.epsilon < c && c <= eps);
            let rest = diff - 2.0 * PI * k;
            match straddled {
                Some(&c) if rest.abs() > 0.5 * PI => return Err(Error::RefinementRequired { epsilon_c: c }),
                Some(_) => offset += 2.0 * PI * k,
                None if diff.abs() > 0.5 * PI => {
                    return Err(Error::RefinementRequired {
                        epsilon_c: 0.5 * (prev.epsilon + eps),
                    })
                }
                None => {}
            }
        }
        out.push(AlphaPeriodSample {
            epsilon: eps,
            raw,
            smoothed: raw - offset,
        });
    }
    Ok(out)
}
