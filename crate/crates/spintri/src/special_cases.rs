//! Closed-form motion for every non-generic instance, the rotating-frame
//! treatment of a uniform field, and the shift/scale symmetries of the couplings.
//!
//! Two facts carry most of this module. Adding `δ` to every coupling adds
//! `δ·H₁` to the Hamiltonian, and `H₁` generates rigid rotations about `S`, so
//! the shifted motion is the old one followed by `ℛ(S, δ|S|t)`. Scaling the
//! couplings by `c` rescales time, `s_{cJ}(t) = s_J(ct)`, for either sign of `c`.

use std::f64::consts::PI;

use crate::core_model::{
    best_rotation, conserved_values, gram, torque_field, total_spin, Couplings, Evolution, Rotation,
    SpinConfiguration, Vec3,
};
use crate::error::{Error, Result};
use crate::gram_geometry::{
    classify_state, energy_range, separatrix_energies, singular_index, CaseLabel, ENDPOINT_TOL,
    SINGULAR_POINTS,
};
use crate::numeric_oracle::{apply_field_rotation, ZeemanField};

/// Relative tolerance for treating two couplings as equal.
pub const COUPLING_TOL: f64 = 1e-6;

/// Agreement required between the three angular-velocity formulas of a stationary Gram state.
pub const OMEGA_AGREEMENT_TOL: f64 = 1e-9;

/// Relative distance from the energy endpoint accepted by [`stationary_gram_solve`].
pub const BOUNDARY_TOL: f64 = 1e-8;

/// Largest alignment residual accepted when fitting a closed form to an initial state.
pub const ALIGNMENT_TOL: f64 = 1e-7;

fn coupling_scale(j: &Couplings) -> f64 {
    j.as_array().iter().fold(1f64, |m, x| m.max(x.abs()))
}

fn nearly_equal(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= COUPLING_TOL * scale
}

fn unit(i: usize) -> Vec3 {
    let mut v = Vec3::zeros();
    v[i] = 1.0;
    v
}

/// Uniform rotation of the whole configuration, `s(t) = ℛ(axis, rate·t)·s₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidRotation {
    pub couplings: Couplings,
    pub s0: SpinConfiguration,
    pub axis: Vec3,
    pub rate: f64,
}

impl Evolution for RigidRotation {
    fn couplings(&self) -> Couplings {
        self.couplings
    }

    fn state(&self, t: f64) -> Result<SpinConfiguration> {
        Ok(self.s0.rotated(&Rotation::axis_angle(&self.axis, self.rate * t)))
    }
    fn period(&self) -> Option<f64> {
        (self.rate != 0.0).then(|| 2.0 * PI / self.rate.abs())
    }
}

/// All couplings equal: rotation about `S` at `J|S|`.
pub fn equilateral_solve(j: &Couplings, s0: &SpinConfiguration) -> Result<RigidRotation> {
    let jj = j.as_array();
    let scale = coupling_scale(j);
    if !(nearly_equal(jj[0], jj[1], scale) && nearly_equal(jj[1], jj[2], scale)) {
        return Err(Error::Domain(format!("couplings {jj:?} are not all equal")));
    }
    let mean = (jj[0] + jj[1] + jj[2]) / 3.0;
    let st = total_spin(s0);
    Ok(RigidRotation {
        couplings: *j,
        s0: *s0,
        axis: st,
        rate: mean * st.norm(),
    })
}

/// Constants of the isosceles motion with `J₁ = J₂ = J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoscelesParams {
    /// `Ŝ·s₃ = (1 + u + v)/S`.
    pub alpha_p: f64,
    /// `|s₁ − s₂| = √(3 − S² + 2αS)`.
    pub beta_p: f64,
    /// `|s₁ + s₂| = √(S² − 2αS + 1)`.
    pub r12: f64,
    /// `(J₃ − J)·r₁₂`.
    pub omega12: f64,
}

impl IsoscelesParams {
    pub fn new(alpha_p: f64, s_len: f64, j_equal: f64, j_odd: f64) -> Self {
        let beta_p = (3.0 - s_len * s_len + 2.0 * alpha_p * s_len).max(0.0).sqrt();
        let r12 = (s_len * s_len - 2.0 * alpha_p * s_len + 1.0).max(0.0).sqrt();
        Self {
            alpha_p,
            beta_p,
            r12,
            omega12: (j_odd - j_equal) * r12,
        }
    }

    /// The coplanar start: `S` along the third axis, every spin in the 1–3 plane.
    pub fn canonical_state(&self, s_len: f64) -> Result<SpinConfiguration> {
        self.explicit_state(s_len, 0.0, 0.0)
    }

    /// Two-frequency closed form from the canonical start, with the overall
    /// rotation at rate `jS` and the relative one at `ω₁₂`.
    pub fn explicit_state(&self, s_len: f64, j_equal: f64, t: f64) -> Result<SpinConfiguration> {
        if self.r12 <= 0.0 {
            return Err(Error::Degenerate("s₁ + s₂ = 0; use the face case".into()));
        }
        let a = self.alpha_p;
        let b = self.beta_p;
        let rho = (1.0 - a * a).max(0.0).sqrt();
        let (sg, cg) = (j_equal * s_len * t).sin_cos();
        let (sl, cl) = (self.omega12 * t).sin_cos();
        let p = b * (s_len - a) * cl / self.r12;
        let q = rho * b * cl / self.r12;
        let s1 = 0.5
            * Vec3::new(
                -cg * (rho - p) - b * sl * sg,
                -sg * (rho - p) + b * sl * cg,
                -a + q + s_len,
            );
        let s2 = 0.5
            * Vec3::new(
                -cg * (rho + p) + b * sl * sg,
                -sg * (rho + p) - b * sl * cg,
                -a - q + s_len,
            );
        let s3 = Vec3::new(rho * cg, rho * sg, a);
        Ok(SpinConfiguration::from_matrix_unchecked(
            crate::core_model::Mat3::from_columns(&[s1, s2, s3]),
        ))
    }
}

/// Isosceles motion for an arbitrary start.
///
/// With `a, b` the spins joined by the odd coupling and `k` the third one,
/// `s_k` and `c = s_a + s_b` turn rigidly about `S` at `J|S|`, and in that frame
/// `d = s_a − s_b` precesses about `c` at `ω₁₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoscelesSolution {
    pub couplings: Couplings,
    pub params: IsoscelesParams,
    /// 0-based index of the spin touched by both equal couplings.
    pub odd: usize,
    pub j_equal: f64,
    s0: SpinConfiguration,
    total: Vec3,
    c: Vec3,
    d0: Vec3,
}

impl Evolution for IsoscelesSolution {
    fn couplings(&self) -> Couplings {
        self.couplings
    }

    fn state(&self, t: f64) -> Result<SpinConfiguration> {
        let global = Rotation::axis_angle(&self.total, self.j_equal * self.total.norm() * t);
        let d = Rotation::axis_angle(&self.c, self.params.omega12 * t).apply(&self.d0);
        let (a, b) = pair_of(self.odd);
        let mut s = self.s0.s;
        s.set_column(a, &global.apply(&(0.5 * (self.c + d))));
        s.set_column(b, &global.apply(&(0.5 * (self.c - d))));
        s.set_column(self.odd, &global.apply(&self.s0.spin(self.odd)));
        Ok(SpinConfiguration::from_matrix_unchecked(s))
    }
    fn period(&self) -> Option<f64> {
        (self.params.omega12 != 0.0).then(|| 2.0 * PI / self.params.omega12.abs())
    }
}

fn pair_of(odd: usize) -> (usize, usize) {
    match odd {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    }
}

/// Index of the coupling that differs from the other two, if two agree.
fn odd_coupling(j: &Couplings) -> Option<usize> {
    let jj = j.as_array();
    let scale = coupling_scale(j);
    (0..3)
        .filter(|&k| {
            let (a, b) = pair_of(k);
            nearly_equal(jj[a], jj[b], scale)
        })
        .min_by(|&x, &y| {
            let gap = |k: usize| {
                let (a, b) = pair_of(k);
                (jj[a] - jj[b]).abs()
            };
            gap(x).total_cmp(&gap(y))
        })
}

pub fn isosceles_solve(j: &Couplings, s0: &SpinConfiguration) -> Result<IsoscelesSolution> {
    let odd = odd_coupling(j)
        .ok_or_else(|| Error::Domain(format!("couplings {:?} have no equal pair", j.as_array())))?;
    let jj = j.as_array();
    let (a, b) = pair_of(odd);
    let j_equal = 0.5 * (jj[a] + jj[b]);
    let total = total_spin(s0);
    let s_len = total.norm();
    let c = s0.spin(a) + s0.spin(b);
    if s_len <= 1e-12 {
        return Err(Error::Degenerate(
            "zero total spin; use the stationary Gram solver".into(),
        ));
    }
    if c.norm() <= 1e-12 {
        return Err(Error::Degenerate(
            "paired spins are antiparallel; use the face case".into(),
        ));
    }
    let alpha_p = total.dot(&s0.spin(odd)) / s_len;
    Ok(IsoscelesSolution {
        couplings: *j,
        params: IsoscelesParams::new(alpha_p, s_len, j_equal, jj[odd]),
        odd,
        j_equal,
        s0: *s0,
        total,
        c,
        d0: s0.spin(a) - s0.spin(b),
    })
}

/// `s₃ = E₃`, `s₁ = −s₂` tilted by `γ = s₁·s₃`; everything turns about `E₃` at `J`.
pub fn face_case_solve(j: &Couplings, gamma: f64) -> Result<RigidRotation> {
    let scale = coupling_scale(j);
    if !nearly_equal(j.j1, j.j2, scale) {
        return Err(Error::Domain("face case needs J₁ = J₂".into()));
    }
    if !(gamma.abs() < 1.0) {
        return Err(Error::Domain(format!("γ = {gamma} outside (−1, 1)")));
    }
    let rho = (1.0 - gamma * gamma).sqrt();
    let s1 = Vec3::new(rho, 0.0, gamma);
    let s0 = SpinConfiguration::from_columns(s1, -s1, unit(2))?;
    Ok(RigidRotation {
        couplings: *j,
        s0,
        axis: unit(2),
        rate: 0.5 * (j.j1 + j.j2),
    })
}

/// The three angular velocities of a coplanar state in the frame with `e_z = Ŝ`.
pub fn stationary_omegas(j: &Couplings, phi: [f64; 3]) -> [f64; 3] {
    let [p1, p2, p3] = phi;
    let (j1, j2, j3) = (j.j1, j.j2, j.j3);
    [
        (j2 * (p1 - p3).sin() + j3 * (p1 - p2).sin()) / p1.sin(),
        -(j3 * (p1 - p2).sin() - j1 * (p2 - p3).sin()) / p2.sin(),
        -(j1 * (p2 - p3).sin() + j2 * (p1 - p3).sin()) / p3.sin(),
    ]
}

/// Uniform rotation of a state whose Gram point sits at an end of the energy range.
pub fn stationary_gram_solve(j: &Couplings, s0: &SpinConfiguration) -> Result<RigidRotation> {
    let st = total_spin(s0);
    let s_len = st.norm();
    let scale = coupling_scale(j);
    if s_len <= 1e-9 {
        let m = (j.j3 - j.j1) * s0.spin(0) + (j.j3 - j.j2) * s0.spin(1);
        return Ok(RigidRotation {
            couplings: *j,
            s0: *s0,
            axis: m,
            rate: m.norm(),
        });
    }
    let jj = j.as_array();
    if nearly_equal(jj[0], jj[1], scale) && nearly_equal(jj[1], jj[2], scale) {
        return equilateral_solve(j, s0);
    }
    let g = gram(s0);
    if singular_index(g.u, g.v, g.w).is_some() {
        return Ok(RigidRotation {
            couplings: *j,
            s0: *s0,
            axis: st,
            rate: 0.0,
        });
    }
    let cv = conserved_values(s0, j);
    let range = energy_range(j, cv.sigma)?;
    let distance = (cv.epsilon - range.e_min)
        .abs()
        .min((cv.epsilon - range.e_max).abs());
    if distance > BOUNDARY_TOL.max(ENDPOINT_TOL) * scale {
        return Err(Error::NotOnBoundary { distance });
    }

    let ez = st / s_len;
    let normal = (0..3)
        .map(|k| {
            let (a, b) = pair_of(k);
            s0.spin(a).cross(&s0.spin(b))
        })
        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
        .unwrap_or_else(Vec3::zeros);
    let ey = normal - normal.dot(&ez) * ez;
    if ey.norm() <= 1e-12 {
        return Err(Error::Collinear);
    }
    let ey = ey.normalize();
    let ex = ey.cross(&ez);
    let phi = [0, 1, 2].map(|mu| {
        let s = s0.spin(mu);
        s.dot(&ex).atan2(s.dot(&ez))
    });
    let omegas = stationary_omegas(j, phi);
    let best = (0..3)
        .max_by(|&a, &b| phi[a].sin().abs().total_cmp(&phi[b].sin().abs()))
        .unwrap_or(0);
    let omega = omegas[best];
    for mu in 0..3 {
        let sin = phi[mu].sin().abs();
        // 0/0 where a spin is parallel to S; the remaining formulas must agree.
        if sin > 1e-3 && (omegas[mu] - omega).abs() > OMEGA_AGREEMENT_TOL * scale / sin {
            return Err(Error::Domain(format!("angular velocities disagree: {omegas:?}")));
        }
    }
    Ok(RigidRotation {
        couplings: *j,
        s0: *s0,
        axis: ez,
        rate: omega,
    })
}

/// Separatrix motion for couplings `(λ, 1, 0)`, `σ = −1`, `ε = λ − 1`.
///
/// The state leaves `↓↑↑` along `E₃` at `t → −∞`, passes the coplanar state at
/// `t = 0` and returns to `↓↑↑` as `t → ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AperiodicSolution {
    pub lambda: f64,
    /// `√(λ(1 − λ))`.
    pub gamma: f64,
}

pub fn aperiodic_solve(lambda: f64) -> Result<AperiodicSolution> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!("λ = {lambda} outside (0, 1)")));
    }
    Ok(AperiodicSolution {
        lambda,
        gamma: (lambda * (1.0 - lambda)).sqrt(),
    })
}

impl AperiodicSolution {
    /// Simple root `x₁` and double root `x₂` of the degenerate cubic.
    pub fn roots(&self) -> (f64, f64) {
        let p = self.lambda * (1.0 - self.lambda);
        (-2.0 / 3.0 * p, p / 3.0)
    }

    /// `x(t) = x₁ + (x₂ − x₁)·tanh²(γt)`.
    pub fn x(&self, t: f64) -> f64 {
        let (x1, x2) = self.roots();
        x1 + (x2 - x1) * (self.gamma * t).tanh().powi(2)
    }

    /// Constant rotation rate about `E₃`.
    pub fn omega(&self) -> f64 {
        self.lambda
    }

    /// The collinear limit `↓↑↑`.
    pub fn limit_state() -> SpinConfiguration {
        SpinConfiguration::from_matrix_unchecked(crate::core_model::Mat3::from_columns(&[
            -unit(2),
            unit(2),
            unit(2),
        ]))
    }

    fn eval(&self, t: f64) -> SpinConfiguration {
        let l = self.lambda;
        let g = self.gamma;
        let th = (g * t).tanh();
        let sh = 1.0 / (g * t).cosh();
        let (sn, cs) = (l * t).sin_cos();
        let s1 = Vec3::new(2.0 * th * sh * cs, 2.0 * th * sh * sn, 1.0 - 2.0 * th * th);
        let s2 = Vec3::new(
            2.0 * sh * (g * sn - l * th * cs),
            -2.0 * sh * (g * cs + l * th * sn),
            1.0 - 2.0 * l * sh * sh,
        );
        let s3 = Vec3::new(
            -2.0 * sh * (g * sn + (1.0 - l) * th * cs),
            2.0 * sh * (g * cs - (1.0 - l) * th * sn),
            1.0 - 2.0 * (1.0 - l) * sh * sh,
        );
        SpinConfiguration::from_matrix_unchecked(crate::core_model::Mat3::from_columns(&[s1, s2, s3]))
    }
}

impl Evolution for AperiodicSolution {
    fn couplings(&self) -> Couplings {
        Couplings::new(self.lambda, 1.0, 0.0)
    }

    fn state(&self, t: f64) -> Result<SpinConfiguration> {
        Ok(self.eval(t))
    }
}

/// A separatrix instance mapped onto the normal form.
///
/// Spins are relabelled by `perm` (normal-form label → original index), the
/// couplings become `Δ + k·(λ, 1, 0)`, and the state is
/// `ℛ(S, Δ|S|t)·R₀·y(kt + τ)` with `y` the normal-form solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparatrixSolution {
    pub couplings: Couplings,
    pub normal: AperiodicSolution,
    pub perm: [usize; 3],
    pub k: f64,
    pub shift: f64,
    pub tau: f64,
    pub alignment: Rotation,
    total: Vec3,
}

impl Evolution for SeparatrixSolution {
    fn couplings(&self) -> Couplings {
        self.couplings
    }

    fn state(&self, t: f64) -> Result<SpinConfiguration> {
        let y = self.normal.eval(self.k * t + self.tau).rotated(&self.alignment);
        let mut s = y.s;
        for (label, &orig) in self.perm.iter().enumerate() {
            s.set_column(orig, &y.spin(label));
        }
        let shift = Rotation::axis_angle(&self.total, self.shift * self.total.norm() * t);
        Ok(SpinConfiguration::from_matrix_unchecked(shift.r * s))
    }
}

pub fn aperiodic_solve_general(j: &Couplings, s0: &SpinConfiguration) -> Result<SeparatrixSolution> {
    let cv = conserved_values(s0, j);
    let es = separatrix_energies(j);
    let scale = coupling_scale(j);
    let n = (0..3)
        .min_by(|&a, &b| (cv.epsilon - es[a]).abs().total_cmp(&(cv.epsilon - es[b]).abs()))
        .unwrap_or(0);
    if (cv.sigma + 1.0).abs() > 1e-8 || (cv.epsilon - es[n]).abs() > 1e-8 * scale {
        return Err(Error::Domain("state is not on a separatrix".into()));
    }
    let (a, b) = pair_of(n);
    let perm = [n, a, b];
    let jp = perm.map(|i| j.as_array()[i]);
    let k = jp[1] - jp[2];
    if k.abs() <= COUPLING_TOL * scale {
        return Err(Error::Degenerate("separatrix of an isosceles instance".into()));
    }
    let normal = aperiodic_solve((jp[0] - jp[2]) / k)?;
    let shift = jp[2];

    let permuted = SpinConfiguration::from_matrix_unchecked(crate::core_model::Mat3::from_columns(
        &perm.map(|i| s0.spin(i)),
    ));
    let st = total_spin(s0);
    let c = ((1.0 - permuted.spin(0).dot(&st) / st.norm()) / 2.0)
        .clamp(0.0, 1.0)
        .sqrt();
    if c >= 1.0 - 1e-15 {
        return Err(Error::Degenerate("state is the collinear limit point".into()));
    }
    let tau_abs = c.atanh() / normal.gamma;
    let target = gram(&permuted);
    let tau = [tau_abs, -tau_abs]
        .into_iter()
        .min_by(|&x, &y| {
            let dx = (gram(&normal.eval(x)).delta - target.delta).abs();
            let dy = (gram(&normal.eval(y)).delta - target.delta).abs();
            dx.total_cmp(&dy)
        })
        .unwrap_or(tau_abs);
    let y0 = normal.eval(tau);
    let alignment = best_rotation(&y0, &permuted)?;
    let residual = y0.rotated(&alignment).max_abs_diff(&permuted);
    if residual > ALIGNMENT_TOL {
        return Err(Error::NoPhaseMatch(format!(
            "separatrix alignment residual {residual:e}"
        )));
    }
    Ok(SeparatrixSolution {
        couplings: *j,
        normal,
        perm,
        k,
        shift,
        tau,
        alignment,
        total: st,
    })
}

/// Origin of a stationary state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryKind {
    CoplanarCritical,
    /// Singular Gram point `eₙ`, `n = 0..3`.
    Collinear(usize),
    /// A representative of the two-spin families that occur when two couplings vanish.
    TwoSpin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryState {
    pub config: SpinConfiguration,
    pub energy: f64,
    pub kind: StationaryKind,
}

/// Gram point `(u, v, w)` of the coplanar critical state, whether or not it lies in `𝒢`.
pub fn coplanar_critical_gram(j: &Couplings) -> Option<Vec3> {
    let (j1, j2, j3) = (j.j1, j.j2, j.j3);
    if j1 == 0.0 || j2 == 0.0 || j3 == 0.0 {
        return None;
    }
    Some(Vec3::new(
        0.5 * (j2 * j3 / (j1 * j1) - j2 / j3 - j3 / j2),
        0.5 * (j1 * j3 / (j2 * j2) - j1 / j3 - j3 / j1),
        0.5 * (j1 * j2 / (j3 * j3) - j1 / j2 - j2 / j1),
    ))
}

/// `E_c = J₁ + J₂ + J₃ − (J₁J₂ + J₂J₃ + J₃J₁)²/(2J₁J₂J₃)`.
pub fn coplanar_critical_energy(j: &Couplings) -> f64 {
    let (j1, j2, j3) = (j.j1, j.j2, j.j3);
    let p = j1 * j2 + j2 * j3 + j3 * j1;
    j1 + j2 + j3 - p * p / (2.0 * j1 * j2 * j3)
}

fn collinear_state(n: usize) -> SpinConfiguration {
    let mut s = crate::core_model::Mat3::from_columns(&[unit(2), unit(2), unit(2)]);
    if n > 0 {
        s.set_column(n - 1, &-unit(2));
    }
    SpinConfiguration::from_matrix_unchecked(s)
}

/// Stationary states up to rotation.
///
/// The coplanar critical state is kept only when its Gram entries lie in `[−1, 1]`.
pub fn stationary_states(j: &Couplings) -> Vec<StationaryState> {
    let jj = j.as_array();
    let zeros: Vec<usize> = (0..3).filter(|&i| jj[i] == 0.0).collect();
    let mut out = Vec::new();
    if zeros.len() == 2 {
        let k = (0..3).find(|i| !zeros.contains(i)).unwrap_or(2);
        let (a, b) = pair_of(k);
        let samples = [unit(0), unit(2), Vec3::new(1.0, 1.0, 1.0).normalize()];
        for (sb, energy) in [(-unit(2), -jj[k]), (unit(2), jj[k])] {
            for sk in samples {
                let mut s = crate::core_model::Mat3::zeros();
                s.set_column(a, &unit(2));
                s.set_column(b, &sb);
                s.set_column(k, &sk);
                out.push(StationaryState {
                    config: SpinConfiguration::from_matrix_unchecked(s),
                    energy,
                    kind: StationaryKind::TwoSpin,
                });
            }
        }
        return out;
    }
    if zeros.is_empty() {
        if let Some(g) = coplanar_critical_gram(j) {
            let (u, v) = (g.x, g.y);
            if g.iter().all(|x| x.abs() <= 1.0) {
                let sign = (j.j1 * j.j2).signum();
                let config =
                    SpinConfiguration::from_matrix_unchecked(crate::core_model::Mat3::from_columns(&[
                        Vec3::new(v, (1.0 - v * v).sqrt(), 0.0),
                        Vec3::new(u, -sign * (1.0 - u * u).sqrt(), 0.0),
                        unit(0),
                    ]));
                out.push(StationaryState {
                    config,
                    energy: coplanar_critical_energy(j),
                    kind: StationaryKind::CoplanarCritical,
                });
            }
        }
    }
    for (n, e) in SINGULAR_POINTS.iter().enumerate() {
        out.push(StationaryState {
            config: collinear_state(n),
            energy: j.energy_of(e[0], e[1], e[2]),
            kind: StationaryKind::Collinear(n),
        });
    }
    out
}

/// Largest torque entry of a state; zero for a stationary one.
pub fn torque_norm(s: &SpinConfiguration, j: &Couplings) -> f64 {
    torque_field(s, j).amax()
}

/// A zero-field motion viewed in the lab frame of a uniform field along `e`:
/// `s(t) = ℛ(e, ∫₀ᵗ B)·s′(t)`.
#[derive(Debug, Clone)]
pub struct FieldFrame<E> {
    pub inner: E,
    pub field: ZeemanField,
}

impl<E> FieldFrame<E> {
    /// Extra precession frequency about `e`, the time average of `B`.
    pub fn omega3(&self) -> Option<f64> {
        self.field.profile.mean()
    }
}

impl<E: Evolution> Evolution for FieldFrame<E> {
    fn couplings(&self) -> Couplings {
        self.inner.couplings()
    }

    fn state(&self, t: f64) -> Result<SpinConfiguration> {
        Ok(apply_field_rotation(&self.field, t, &self.inner.state(t)?))
    }
    fn period(&self) -> Option<f64> {
        self.inner.period()
    }
}

/// The field only adds a rotation because `e·S` commutes with `H`; the
/// zero-field motion must start from the same state.
pub fn magnetic_frame_transform<E: Evolution>(inner: E, field: ZeemanField) -> FieldFrame<E> {
    FieldFrame { inner, field }
}

/// Shift by `delta` and scale by `scale` relating the couplings `base` to others.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingReduction {
    pub base: Couplings,
    pub delta: f64,
    pub scale: f64,
}

pub fn coupling_reductions(j: &Couplings, delta: f64, scale: f64) -> Result<CouplingReduction> {
    if scale == 0.0 || !scale.is_finite() || !delta.is_finite() {
        return Err(Error::Domain(format!(
            "invalid reduction δ = {delta}, c = {scale}"
        )));
    }
    Ok(CouplingReduction {
        base: *j,
        delta,
        scale,
    })
}

impl CouplingReduction {
    pub fn shifted_couplings(&self) -> Couplings {
        self.base.shifted(self.delta)
    }

    pub fn scaled_couplings(&self) -> Couplings {
        self.base.scaled(self.scale)
    }

    /// Motion under `base + δ` from a motion under `base`.
    pub fn shift<E: Evolution>(&self, inner: E) -> Shifted<E> {
        Shifted {
            inner,
            delta: self.delta,
        }
    }

    /// Motion under `c·base` from a motion under `base`.
    pub fn scale<E: Evolution>(&self, inner: E) -> Scaled<E> {
        Scaled {
            inner,
            scale: self.scale,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Shifted<E> {
    pub inner: E,
    pub delta: f64,
}

impl<E: Evolution> Evolution for Shifted<E> {
    fn couplings(&self) -> Couplings {
        self.inner.couplings().shifted(self.delta)
    }

    fn state(&self, t: f64) -> Result<SpinConfiguration> {
        let s = self.inner.state(t)?;
        let st = total_spin(&s);
        Ok(s.rotated(&Rotation::axis_angle(&st, self.delta * st.norm() * t)))
    }
    fn period(&self) -> Option<f64> {
        self.inner.period()
    }
}

#[derive(Debug, Clone)]
pub struct Scaled<E> {
    pub inner: E,
    pub scale: f64,
}

impl<E: Evolution> Evolution for Scaled<E> {
    fn couplings(&self) -> Couplings {
        self.inner.couplings().scaled(self.scale)
    }

    fn state(&self, t: f64) -> Result<SpinConfiguration> {
        self.inner.state(self.scale * t)
    }
    fn period(&self) -> Option<f64> {
        self.inner.period().map(|p| p / self.scale.abs())
    }
}

/// Closed-form motion for any non-generic state.
pub fn solve_special(j: &Couplings, s0: &SpinConfiguration) -> Result<Box<dyn Evolution + Send + Sync>> {
    Ok(match classify_state(j, s0)? {
        CaseLabel::Generic => return Err(Error::Domain("generic instance has no closed form".into())),
        CaseLabel::Equilateral => Box::new(equilateral_solve(j, s0)?),
        CaseLabel::Isosceles { .. } => Box::new(isosceles_solve(j, s0)?),
        // s_k = S is fixed and the antiparallel pair turns about it at J.
        CaseLabel::FaceCase => {
            let st = total_spin(s0);
            let odd = odd_coupling(j).unwrap_or(2);
            let (a, b) = pair_of(odd);
            Box::new(RigidRotation {
                couplings: *j,
                s0: *s0,
                axis: st,
                rate: 0.5 * (j.as_array()[a] + j.as_array()[b]) * st.norm(),
            })
        }
        CaseLabel::StationaryGram | CaseLabel::ZeroTotalSpin => Box::new(stationary_gram_solve(j, s0)?),
        CaseLabel::AperiodicSeparatrix => Box::new(aperiodic_solve_general(j, s0)?),
        CaseLabel::Collinear => Box::new(RigidRotation {
            couplings: *j,
            s0: *s0,
            axis: unit(2),
            rate: 0.0,
        }),
    })
}

/// Largest entry of `ṡ − torque`, with `ṡ` from the five-point central difference of step `h`.
pub fn eom_residual<E: Evolution + ?Sized>(evo: &E, t: f64, h: f64) -> Result<f64> {
    let at = |k: f64| evo.state(t + k * h).map(|s| s.s);
    let fd = (at(-2.0)? - at(2.0)? + 8.0 * (at(1.0)? - at(-1.0)?)) / (12.0 * h);
    Ok((fd - torque_field(&evo.state(t)?, &evo.couplings())).amax())
}
