//! Action variables `I₁, I₂, I₃` and their frequencies.
//!
//! `I₂ = S − 3` and `I₃ = S⁽³⁾ − 3` are closed forms. `I₁` is computed two
//! independent ways: by integrating `T(ε)/2π` up from the bottom of the energy
//! range, and as the signed spherical area swept by the three spins along the
//! basic cycle `r̄(t) = ℛ(S, −α(T)·t/T)·s(t)`.

use std::f64::consts::PI;

use crate::core_model::{standard_config, total_spin_length, ConservedValues, Couplings, Vec3};
use crate::error::{Error, Result};
use crate::external_dynamics::{
    alpha_branch_offset, principal_angle, reference_alpha_grid, ExternalSolution,
};
use crate::gram_geometry::{critical_energies, energy_range, EnergyRange};
use crate::internal_dynamics::{internal_state, reduce};
use crate::quadrature::integrate_panels;
use crate::special_functions::harmonic_period;

/// Samples per period of the swept-area polyline.
pub const AREA_SAMPLES: usize = 4096;

/// Closest approach to the antipode of `S` before the area becomes ambiguous.
pub const ANTIPODE_TOL: f64 = 1e-6;

/// Relative slack for energies at the ends of the range.
const ENDPOINT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionAngleData {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    /// `2π/T`.
    pub omega_1: f64,
    /// `α(T)/T` with `α(T)` in `(−π, π]`.
    pub omega_2: f64,
    /// Mean field strength; zero without field.
    pub omega_3: f64,
}

pub fn actions_i2_i3(cv: &ConservedValues) -> (f64, f64) {
    (cv.s_len - 3.0, cv.sigma3 - 3.0)
}

/// Internal period, with the harmonic limit where the two lowest roots merge.
pub fn period_at(j: &Couplings, sigma: f64, epsilon: f64) -> Result<f64> {
    match reduce(j, epsilon, sigma) {
        Ok(wd) => Ok(wd.period()),
        Err(Error::DegenerateRoots { roots }) if roots[1] - roots[0] <= roots[2] - roots[1] => {
            Ok(harmonic_period(0.5 * (roots[0] + roots[1])))
        }
        Err(e) => Err(e),
    }
}

fn checked_range(j: &Couplings, sigma: f64, epsilon: f64) -> Result<EnergyRange> {
    let range = energy_range(j, sigma)?;
    let slack = ENDPOINT_SLACK * (range.e_max - range.e_min).max(1.0);
    if epsilon < range.e_min - slack || epsilon > range.e_max + slack {
        return Err(Error::Domain(format!(
            "energy {epsilon} outside [{}, {}]",
            range.e_min, range.e_max
        )));
    }
    Ok(range)
}

/// `I₁(σ, ε) = (1/2π)∫ T dε′` from the bottom of the energy range, where the basic cycle
/// degenerates to a point.
pub fn action_i1_integral(j: &Couplings, sigma: f64, epsilon: f64) -> Result<f64> {
    let range = checked_range(j, sigma, epsilon)?;
    let eps = epsilon.clamp(range.e_min, range.e_max);
    if eps <= range.e_min {
        return Ok(0.0);
    }
    let mut breaks = vec![range.e_min];
    for (ec, _) in critical_energies(j, sigma) {
        if ec > range.e_min && ec < eps {
            breaks.push(ec);
        }
    }
    breaks.push(eps);
    let integral = integrate_panels(|e| period_at(j, sigma, e), &breaks, 1e-11)?;
    Ok(integral / (2.0 * PI))
}

/// Signed solid angle of the geodesic triangle `(n, a, b)`.
fn triangle_solid_angle(n: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let num = n.dot(&a.cross(b));
    let den = 1.0 + n.dot(a) + a.dot(b) + b.dot(n);
    2.0 * num.atan2(den)
}

/// Closed curves of the three spins along the basic cycle, in the standard frame.
pub fn basic_cycle(j: &Couplings, sigma: f64, epsilon: f64, samples: usize) -> Result<Vec<[Vec3; 3]>> {
    let wd = reduce(j, epsilon, sigma)?;
    let alpha = reference_alpha_grid(&wd, j, samples)?;
    let alpha_t = alpha[samples] - alpha_branch_offset(j, sigma, epsilon)?;
    let period = wd.period();
    (0..=samples)
        .map(|k| {
            let t = period * k as f64 / samples as f64;
            let r = standard_config(&internal_state(t, &wd))?;
            let angle = alpha[k] - alpha_t * k as f64 / samples as f64;
            let (c, s) = (angle.cos(), angle.sin());
            let rot = |v: Vec3| Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z);
            Ok([rot(r.spin(0)), rot(r.spin(1)), rot(r.spin(2))])
        })
        .collect()
}

/// Largest displacement of any spin along the basic cycle; zero when the cycle is a point.
pub fn basic_cycle_extent(j: &Couplings, sigma: f64, epsilon: f64) -> Result<f64> {
    let cycle = basic_cycle(j, sigma, epsilon, 256)?;
    let mut m: f64 = 0.0;
    for p in &cycle {
        for mu in 0..3 {
            m = m.max((p[mu] - cycle[0][mu]).norm());
        }
    }
    Ok(m)
}

/// `I₁` as `(1/2π)·Σ_μ` signed spherical areas of the basic-cycle curves.
///
/// Areas are measured from the direction of `S`; a curve traversed clockwise
/// about `S` (positive rotation sense) counts negatively.
pub fn action_i1_area(j: &Couplings, sigma: f64, epsilon: f64) -> Result<f64> {
    checked_range(j, sigma, epsilon)?;
    if total_spin_length(sigma) <= 0.0 {
        return Err(Error::Domain("swept area needs S > 0".into()));
    }
    let cycle = basic_cycle(j, sigma, epsilon, AREA_SAMPLES)?;
    let n = Vec3::z();
    let mut total = 0.0;
    for mu in 0..3 {
        if cycle.iter().any(|p| (p[mu] + n).norm() < ANTIPODE_TOL) {
            return Err(Error::AreaAmbiguity { spin: mu });
        }
        for w in cycle.windows(2) {
            total += triangle_solid_angle(&n, &w[0][mu], &w[1][mu]);
        }
    }
    Ok(-total / (2.0 * PI))
}

/// `(Ω₁, Ω₂) = (2π/T, α(T)/T)` with `α(T)` reduced to `(−π, π]`.
pub fn frequencies(sol: &ExternalSolution) -> (f64, f64) {
    let period = sol.period();
    (2.0 * PI / period, principal_angle(sol.alpha_period) / period)
}

/// All actions and frequencies of a generic solution; `field_mean` is `b₀` of a periodic field.
pub fn action_angle_data(sol: &ExternalSolution, field_mean: Option<f64>) -> Result<ActionAngleData> {
    let (i2, i3) = actions_i2_i3(&sol.conserved);
    let (omega_1, omega_2) = frequencies(sol);
    let i1 = action_i1_integral(&sol.couplings, sol.wd.sigma, sol.wd.epsilon)?;
    Ok(ActionAngleData {
        i1,
        i2,
        i3,
        omega_1,
        omega_2,
        omega_3: field_mean.unwrap_or(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_model::tests::random_config;
    use crate::core_model::{conserved_values, SpinConfiguration};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn paper_range() -> EnergyRange {
        energy_range(&Couplings::paper_example(), 0.0).unwrap()
    }

    #[test]
    fn i2_i3_closed_forms() {
        let up = SpinConfiguration::from_columns(Vec3::z(), Vec3::z(), Vec3::z()).unwrap();
        let cv = conserved_values(&up, &Couplings::paper_example());
        let (i2, i3) = actions_i2_i3(&cv);
        assert!(i2.abs() < 1e-15 && i3.abs() < 1e-15);
        let cv = ConservedValues::new(0.1, 0.0, 0.4);
        assert!((actions_i2_i3(&cv).0 - (3f64.sqrt() - 3.0)).abs() < 1e-15);
    }

    #[test]
    fn i3_is_minus_sum_of_cap_areas() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let s = random_config(&mut rng);
            let cv = conserved_values(&s, &Couplings::paper_example());
            // Cap of the positive-sense circle about E₃ through s_μ, counted negatively.
            let caps: f64 = (0..3).map(|mu| 2.0 * PI * (1.0 - s.spin(mu).z)).sum();
            assert!((actions_i2_i3(&cv).1 + caps / (2.0 * PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn solid_angle_of_octant() {
        let o = triangle_solid_angle(&Vec3::x(), &Vec3::y(), &Vec3::z());
        assert!((o - PI / 2.0).abs() < 1e-14);
        let o = triangle_solid_angle(&Vec3::x(), &Vec3::z(), &Vec3::y());
        assert!((o + PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn polygon_area_of_a_cap() {
        // Negative-sense circle at height z about E₃ encloses +2π(1 − z) under the action sign.
        let z: f64 = 0.3;
        let rho = (1.0 - z * z).sqrt();
        let pts: Vec<Vec3> = (0..=2000)
            .map(|k| {
                let phi = -2.0 * PI * k as f64 / 2000.0;
                Vec3::new(rho * phi.cos(), rho * phi.sin(), z)
            })
            .collect();
        let area: f64 = pts
            .windows(2)
            .map(|w| triangle_solid_angle(&Vec3::z(), &w[0], &w[1]))
            .sum();
        assert!((-area - 2.0 * PI * (1.0 - z)).abs() < 1e-5);
    }

    #[test]
    fn integral_limits() {
        let j = Couplings::paper_example();
        let r = paper_range();
        assert_eq!(action_i1_integral(&j, 0.0, r.e_min).unwrap(), 0.0);
        let top = action_i1_integral(&j, 0.0, r.e_max).unwrap();
        assert!((top - (3.0 - 3f64.sqrt())).abs() < 1e-9, "{top}");
        assert!(action_i1_integral(&j, 0.0, r.e_max + 0.1).is_err());
    }

    #[test]
    fn derivative_is_period_over_two_pi() {
        let j = Couplings::paper_example();
        let r = paper_range();
        let w = r.e_max - r.e_min;
        let h = 1e-4 * w;
        for k in 1..20 {
            let e = r.e_min + w * k as f64 / 20.0;
            let d = (action_i1_integral(&j, 0.0, e + h).unwrap()
                - action_i1_integral(&j, 0.0, e - h).unwrap())
                / (2.0 * h);
            let tp = period_at(&j, 0.0, e).unwrap() / (2.0 * PI);
            assert!(((d - tp) / tp).abs() < 1e-6, "{e}: {d} vs {tp}");
        }
    }

    #[test]
    fn area_matches_integral() {
        let j = Couplings::paper_example();
        let r = paper_range();
        for frac in [0.2, 0.5, 0.8] {
            let e = r.e_min + frac * (r.e_max - r.e_min);
            let a = action_i1_area(&j, 0.0, e).unwrap();
            let b = action_i1_integral(&j, 0.0, e).unwrap();
            assert!((a - b).abs() < 1e-4, "{e}: area {a} integral {b}");
        }
    }

    #[test]
    fn cycle_degenerates_at_the_bottom_only() {
        let j = Couplings::paper_example();
        let r = paper_range();
        let w = r.e_max - r.e_min;
        let low = basic_cycle_extent(&j, 0.0, r.e_min + 1e-6 * w).unwrap();
        let high = basic_cycle_extent(&j, 0.0, r.e_max - 1e-6 * w).unwrap();
        assert!(low < 1e-2, "{low}");
        assert!(high > 0.5, "{high}");
    }

    #[test]
    fn harmonic_limits_of_the_period() {
        let j = Couplings::paper_example();
        let r = paper_range();
        let w = r.e_max - r.e_min;
        for e in [r.e_min + 1e-7 * w, r.e_max - 1e-7 * w] {
            let wd = reduce(&j, e, 0.0).unwrap();
            let x_dbl = 0.5 * (wd.roots.x1 + wd.roots.x2);
            let harm = harmonic_period(x_dbl);
            assert!((wd.period() - harm).abs() < 1e-3, "{} vs {harm}", wd.period());
        }
    }
}
