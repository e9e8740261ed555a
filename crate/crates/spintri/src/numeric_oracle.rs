//! Reference integration of the spin equations of motion.
//!
//! Dormand–Prince 5(4) with local extrapolation and its fourth-order continuous
//! extension. The Butcher tableau (FSAL, seven stages):
//!
//! ```text
//! 0    |
//! 1/5  | 1/5
//! 3/10 | 3/40        9/40
//! 4/5  | 44/45       −56/15       32/9
//! 8/9  | 19372/6561  −25360/2187  64448/6561  −212/729
//! 1    | 9017/3168   −355/33      46732/5247  49/176   −5103/18656
//! 1    | 35/384      0            500/1113    125/192  −2187/6784    11/84
//! -----+--------------------------------------------------------------------------
//! b    | 35/384      0            500/1113    125/192  −2187/6784    11/84     0
//! b̂    | 5179/57600  0            7571/16695  393/640  −92097/339200 187/2100  1/40
//! ```
//!
//! No projection onto the unit spheres happens unless requested, so the
//! conservation audit measures the genuine integration error.

use crate::core_model::{
    gram_det, hamiltonian, torque_with_field, total_spin, Couplings, Mat3, Rotation, SpinConfiguration, Vec3,
};
use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
/// `b − b̂`.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Continuous-extension weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Field magnitude `B(t)` along a fixed axis.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldProfile {
    Constant(f64),
    /// `mean + amplitude·sin(2πt/period)`.
    Sinusoid {
        mean: f64,
        amplitude: f64,
        period: f64,
    },
    /// Piecewise-linear through `(t, B)` samples, constant outside.
    Table(Vec<(f64, f64)>),
}

impl FieldProfile {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            FieldProfile::Constant(b) => *b,
            FieldProfile::Sinusoid {
                mean,
                amplitude,
                period,
            } => mean + amplitude * (2.0 * std::f64::consts::PI * t / period).sin(),
            FieldProfile::Table(pts) => table_value(pts, t),
        }
    }

    /// `∫₀ᵗ B`.
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            FieldProfile::Constant(b) => b * t,
            FieldProfile::Sinusoid {
                mean,
                amplitude,
                period,
            } => {
                let w = 2.0 * std::f64::consts::PI / period;
                mean * t + amplitude * (1.0 - (w * t).cos()) / w
            }
            FieldProfile::Table(pts) => table_integral(pts, t) - table_integral(pts, 0.0),
        }
    }

    /// Time average over one period, or the value for a constant field.
    pub fn mean(&self) -> Option<f64> {
        match self {
            FieldProfile::Constant(b) => Some(*b),
            FieldProfile::Sinusoid { mean, .. } => Some(*mean),
            FieldProfile::Table(_) => None,
        }
    }
}

fn table_value(pts: &[(f64, f64)], t: f64) -> f64 {
    match pts.len() {
        0 => 0.0,
        1 => pts[0].1,
        _ => {
            if t <= pts[0].0 {
                return pts[0].1;
            }
            for w in pts.windows(2) {
                if t <= w[1].0 {
                    let s = (t - w[0].0) / (w[1].0 - w[0].0);
                    return w[0].1 + s * (w[1].1 - w[0].1);
                }
            }
            pts[pts.len() - 1].1
        }
    }
}

/// Antiderivative of the piecewise-linear table with value 0 at the first node.
fn table_integral(pts: &[(f64, f64)], t: f64) -> f64 {
    if pts.is_empty() {
        return 0.0;
    }
    let (t0, b0) = pts[0];
    if t <= t0 {
        return b0 * (t - t0);
    }
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let (ta, ba) = w[0];
        let (tb, bb) = w[1];
        if t <= tb {
            let bt = table_value(pts, t);
            return acc + 0.5 * (ba + bt) * (t - ta);
        }
        acc += 0.5 * (ba + bb) * (tb - ta);
    }
    let (tl, bl) = pts[pts.len() - 1];
    acc + bl * (t - tl)
}

/// Zeeman field `B(t)·e`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeemanField {
    pub axis: Vec3,
    pub profile: FieldProfile,
}

impl ZeemanField {
    pub fn new(axis: Vec3, profile: FieldProfile) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Domain("field axis must be a nonzero vector".into()));
        }
        Ok(Self {
            axis: axis / n,
            profile,
        })
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.axis * self.profile.value(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Project each column back onto the unit sphere after every step.
    pub renormalize: bool,
    /// Spacing of recorded samples; `0` records every accepted step.
    pub monitor_interval: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            renormalize: false,
            monitor_interval: 0.0,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol: 1e-2 * rel_tol,
            ..Self::default()
        }
    }

    /// Steps of exactly `h` (up to the last), for order studies.
    pub fn fixed_step(h: f64) -> Self {
        Self {
            rel_tol: 1e30,
            abs_tol: 1e30,
            max_step: h,
            ..Self::default()
        }
    }
}

/// Conserved quantities at one recorded sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditSample {
    pub energy: f64,
    pub total_spin: Vec3,
    /// `max_μ | |s_μ| − 1 |`.
    pub norm_deviation: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpinConfiguration>,
    pub audits: Vec<AuditSample>,
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone)]
struct Step {
    t0: f64,
    h: f64,
    rc: [Mat3; 5],
}

impl Step {
    fn eval(&self, t: f64) -> Mat3 {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        self.rc[0] + (self.rc[1] + (self.rc[2] + (self.rc[3] + self.rc[4] * th1) * th) * th1) * th
    }
}

/// Dense solution over `[0, t_end]` (or `[t_end, 0]`).
#[derive(Debug, Clone)]
pub struct DenseSolution {
    steps: Vec<Step>,
    pub t_end: f64,
    pub final_state: Mat3,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl DenseSolution {
    /// State at any `t` within the integrated span.
    pub fn eval(&self, t: f64) -> SpinConfiguration {
        if self.steps.is_empty() {
            return SpinConfiguration::from_matrix_unchecked(self.final_state);
        }
        let forward = self.t_end >= 0.0;
        let idx = self
            .steps
            .partition_point(|s| if forward { s.t0 + s.h < t } else { s.t0 + s.h > t })
            .min(self.steps.len() - 1);
        SpinConfiguration::from_matrix_unchecked(self.steps[idx].eval(t))
    }

    pub fn step_times(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.steps.iter().map(|s| s.t0).collect();
        v.push(self.t_end);
        v
    }
}

fn rhs(s: &Mat3, j: &Couplings, field: Option<&ZeemanField>, t: f64) -> Mat3 {
    let b = field.map_or_else(Vec3::zeros, |f| f.at(t));
    torque_with_field(s, j, &b)
}

fn renormalized(s: &Mat3) -> Mat3 {
    Mat3::from_fn(|i, mu| s[(i, mu)] / s.column(mu).norm())
}

/// Integrates from `t = 0` to `t_end` (either sign), keeping the dense output.
pub fn integrate_dense(
    j: &Couplings,
    s0: &SpinConfiguration,
    t_end: f64,
    cfg: &IntegratorConfig,
    field: Option<&ZeemanField>,
) -> Result<DenseSolution> {
    if !(cfg.rel_tol > 0.0 && cfg.abs_tol > 0.0) {
        return Err(Error::Domain("tolerances must be positive".into()));
    }
    if !t_end.is_finite() {
        return Err(Error::Domain("t_end must be finite".into()));
    }
    let dir = if t_end >= 0.0 { 1.0 } else { -1.0 };
    let mut t = 0.0;
    let mut y = s0.s;
    let mut k1 = rhs(&y, j, field, t);
    let mut steps = Vec::new();
    let (mut accepted, mut rejected) = (0, 0);
    if t_end == 0.0 {
        return Ok(DenseSolution {
            steps,
            t_end,
            final_state: y,
            accepted_steps: 0,
            rejected_steps: 0,
        });
    }

    let max_step = cfg.max_step.abs().min(t_end.abs());
    let tol0 = cfg.abs_tol + cfg.rel_tol * y.abs().max();
    let mut h = (0.01 * (tol0 / k1.abs().max().max(1e-300)).powf(0.2))
        .clamp(1e-10 * t_end.abs(), max_step)
        .max(1e-12);
    if cfg.rel_tol >= 1e20 {
        h = max_step;
    }

    while dir * (t_end - t) > 0.0 {
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        let last = h >= dir * (t_end - t);
        let hs = if last { t_end - t } else { dir * h };

        let k2 = rhs(&(y + k1 * (hs * A2[0])), j, field, t + C[1] * hs);
        let k3 = rhs(&(y + (k1 * A3[0] + k2 * A3[1]) * hs), j, field, t + C[2] * hs);
        let k4 = rhs(
            &(y + (k1 * A4[0] + k2 * A4[1] + k3 * A4[2]) * hs),
            j,
            field,
            t + C[3] * hs,
        );
        let k5 = rhs(
            &(y + (k1 * A5[0] + k2 * A5[1] + k3 * A5[2] + k4 * A5[3]) * hs),
            j,
            field,
            t + C[4] * hs,
        );
        let k6 = rhs(
            &(y + (k1 * A6[0] + k2 * A6[1] + k3 * A6[2] + k4 * A6[3] + k5 * A6[4]) * hs),
            j,
            field,
            t + C[5] * hs,
        );
        let y1 = y + (k1 * B[0] + k3 * B[2] + k4 * B[3] + k5 * B[4] + k6 * B[5]) * hs;
        let k7 = rhs(&y1, j, field, t + hs);
        let err_vec = (k1 * E[0] + k3 * E[2] + k4 * E[3] + k5 * E[4] + k6 * E[5] + k7 * E[6]) * hs;
        let mut sum = 0.0;
        for i in 0..9 {
            let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y1[i].abs());
            sum += (err_vec[i] / sc).powi(2);
        }
        let err = (sum / 9.0).sqrt();

        if err <= 1.0 {
            let ydiff = y1 - y;
            let bspl = k1 * hs - ydiff;
            let rc = [
                y,
                ydiff,
                bspl,
                ydiff - k7 * hs - bspl,
                (k1 * D[0] + k3 * D[2] + k4 * D[3] + k5 * D[4] + k6 * D[5] + k7 * D[6]) * hs,
            ];
            steps.push(Step { t0: t, h: hs, rc });
            accepted += 1;
            t = if last { t_end } else { t + hs };
            if cfg.renormalize {
                y = renormalized(&y1);
                k1 = rhs(&y, j, field, t);
            } else {
                y = y1;
                k1 = k7;
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * fac).min(max_step);
        } else {
            rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
    Ok(DenseSolution {
        steps,
        t_end,
        final_state: y,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

fn audit_sample(s: &SpinConfiguration, j: &Couplings) -> AuditSample {
    let norm_deviation = (0..3)
        .map(|mu| (s.spin(mu).norm() - 1.0).abs())
        .fold(0.0, f64::max);
    AuditSample {
        energy: hamiltonian(s, j),
        total_spin: total_spin(s),
        norm_deviation,
    }
}

/// Integrates and records samples every `monitor_interval` (or every step).
pub fn integrate(
    j: &Couplings,
    s0: &SpinConfiguration,
    t_end: f64,
    cfg: &IntegratorConfig,
    field: Option<&ZeemanField>,
) -> Result<Trajectory> {
    let dense = integrate_dense(j, s0, t_end, cfg, field)?;
    let times: Vec<f64> = if cfg.monitor_interval > 0.0 {
        let n = (t_end.abs() / cfg.monitor_interval).floor() as usize;
        let dir = t_end.signum();
        let mut v: Vec<f64> = (0..=n).map(|k| dir * k as f64 * cfg.monitor_interval).collect();
        if (v[v.len() - 1] - t_end).abs() > 1e-12 * t_end.abs().max(1.0) {
            v.push(t_end);
        }
        v
    } else {
        dense.step_times()
    };
    let states: Vec<SpinConfiguration> = times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                *s0
            } else if t == t_end {
                SpinConfiguration::from_matrix_unchecked(dense.final_state)
            } else {
                dense.eval(t)
            }
        })
        .collect();
    let audits = states.iter().map(|s| audit_sample(s, j)).collect();
    Ok(Trajectory {
        times,
        states,
        audits,
    })
}

/// Largest deviations along a trajectory, relative to its first sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditReport {
    pub energy: f64,
    pub total_spin: [f64; 3],
    pub norm: f64,
    /// `max |δ² − det G(u, v, w)|`.
    pub gram_identity: f64,
}

impl AuditReport {
    pub fn max_deviation(&self) -> f64 {
        self.energy
            .max(self.total_spin[0])
            .max(self.total_spin[1])
            .max(self.total_spin[2])
            .max(self.norm)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_deviation() <= tol
    }
}

pub fn audit(traj: &Trajectory, j: &Couplings) -> AuditReport {
    let first = audit_sample(&traj.states[0], j);
    let mut rep = AuditReport {
        energy: 0.0,
        total_spin: [0.0; 3],
        norm: 0.0,
        gram_identity: 0.0,
    };
    for s in &traj.states {
        let a = audit_sample(s, j);
        rep.energy = rep.energy.max((a.energy - first.energy).abs());
        for k in 0..3 {
            rep.total_spin[k] = rep.total_spin[k].max((a.total_spin[k] - first.total_spin[k]).abs());
        }
        rep.norm = rep.norm.max(a.norm_deviation);
        let c = [s.spin(0), s.spin(1), s.spin(2)];
        let det = s.s.determinant();
        let g = gram_det(c[1].dot(&c[2]), c[2].dot(&c[0]), c[0].dot(&c[1]));
        rep.gram_identity = rep.gram_identity.max((det * det - g).abs());
    }
    rep
}

/// Lab-frame state with field from the zero-field state `s′(t)`: `ℛ(e, ∫₀ᵗ B)·s′(t)`.
pub fn apply_field_rotation(field: &ZeemanField, t: f64, s_prime: &SpinConfiguration) -> SpinConfiguration {
    s_prime.rotated(&Rotation::axis_angle(&field.axis, field.profile.integral(t)))
}
