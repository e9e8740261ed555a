//! Geometry of the Gram set, the conservation line and case classification.
//!
//! The Gram set `𝒢` is the set of `(u, v, w)` with `det G ≥ 0` and all
//! entries in `[−1, 1]`. Fixing `σ = u + v + w` cuts a convex slice; fixing
//! also the energy `ε` leaves a segment of the line `L` with direction `n`.

use serde::{Deserialize, Serialize};

use crate::core_model::{
    gram, gram_det, total_spin_length, ConservedValues, Couplings, GramPoint, SpinConfiguration, Vec3,
};
use crate::error::{Error, Result};
use crate::internal_dynamics::line_invariants;

/// Sign band on `det G` separating interior, boundary and outside.
pub const DET_TOL: f64 = 1e-12;

/// Distance below which a point counts as one of the singular points `e₀..e₃`.
pub const SINGULAR_TOL: f64 = 1e-9;

/// Tolerance on `σ = −1` and on the separatrix energies.
pub const SEPARATRIX_TOL: f64 = 1e-10;

/// Relative tolerance on `ε` at the ends of the energy range.
pub const ENDPOINT_TOL: f64 = 1e-9;

/// Number of directions in the coarse boundary scan.
const SCAN_DIRECTIONS: usize = 720;

/// The four singular points `e₀ = (1,1,1)`, `e₁ = (1,−1,−1)`, `e₂ = (−1,1,−1)`, `e₃ = (−1,−1,1)`.
pub const SINGULAR_POINTS: [[f64; 3]; 4] = [
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
];

/// Rank-based classification of a point relative to `𝒢`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    Interior,
    Boundary,
    Singular(usize),
    Outside,
}

/// Dynamical case of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseLabel {
    Generic,
    /// 1-based indices of the two equal couplings.
    Isosceles {
        equal_pair: (usize, usize),
    },
    Equilateral,
    StationaryGram,
    AperiodicSeparatrix,
    FaceCase,
    Collinear,
    ZeroTotalSpin,
}

impl CaseLabel {
    pub fn name(&self) -> &'static str {
        match self {
            CaseLabel::Generic => "Generic",
            CaseLabel::Isosceles { .. } => "Isosceles",
            CaseLabel::Equilateral => "Equilateral",
            CaseLabel::StationaryGram => "StationaryGram",
            CaseLabel::AperiodicSeparatrix => "AperiodicSeparatrix",
            CaseLabel::FaceCase => "FaceCase",
            CaseLabel::Collinear => "Collinear",
            CaseLabel::ZeroTotalSpin => "ZeroTotalSpin",
        }
    }
}

/// Extremal energies on a `σ` slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRange {
    pub e_min: f64,
    pub e_max: f64,
}

/// Energy range together with the Gram points where the extremes are attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyExtremes {
    pub range: EnergyRange,
    pub argmin: Vec3,
    pub argmax: Vec3,
}

/// Index `n` of the singular point `eₙ` within [`SINGULAR_TOL`], if any.
pub fn singular_index(u: f64, v: f64, w: f64) -> Option<usize> {
    SINGULAR_POINTS.iter().position(|e| {
        (u - e[0]).abs() <= SINGULAR_TOL
            && (v - e[1]).abs() <= SINGULAR_TOL
            && (w - e[2]).abs() <= SINGULAR_TOL
    })
}

pub fn gram_membership(u: f64, v: f64, w: f64) -> Membership {
    if let Some(n) = singular_index(u, v, w) {
        return Membership::Singular(n);
    }
    let box_tol = 1e-12;
    if u.abs() > 1.0 + box_tol || v.abs() > 1.0 + box_tol || w.abs() > 1.0 + box_tol {
        return Membership::Outside;
    }
    let det = gram_det(u, v, w);
    if det < -DET_TOL {
        Membership::Outside
    } else if det <= DET_TOL {
        Membership::Boundary
    } else {
        Membership::Interior
    }
}

fn couplings_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * 1f64.max(a.abs()).max(b.abs())
}

fn all_equal(j: &Couplings) -> bool {
    couplings_equal(j.j1, j.j2) && couplings_equal(j.j2, j.j3) && couplings_equal(j.j1, j.j3)
}

/// Direction `n = (J₃−J₂, J₁−J₃, J₂−J₁)` of the conservation line.
pub fn line_direction(j: &Couplings) -> Result<Vec3> {
    let spread = (j.j1 - j.j2)
        .abs()
        .max((j.j2 - j.j3).abs())
        .max((j.j1 - j.j3).abs());
    if spread < 1e-12 {
        return Err(Error::Equilateral);
    }
    Ok(Vec3::new(j.j3 - j.j2, j.j1 - j.j3, j.j2 - j.j1))
}

/// `∇ det G = 2(vw − u, uw − v, uv − w)`.
pub fn grad_det(u: f64, v: f64, w: f64) -> Vec3 {
    2.0 * Vec3::new(v * w - u, u * w - v, u * v - w)
}

/// `γ = n·∇det G`.
pub fn tangency_factor(g: &GramPoint, j: &Couplings) -> Result<f64> {
    Ok(line_direction(j)?.dot(&grad_det(g.u, g.v, g.w)))
}

fn in_gram_set(p: &Vec3) -> bool {
    p.iter().all(|x| x.abs() <= 1.0) && gram_det(p.x, p.y, p.z) >= 0.0
}

/// Orthonormal basis of the plane `u + v + w = 0`.
fn slice_basis() -> (Vec3, Vec3) {
    (
        Vec3::new(1.0, -1.0, 0.0) / 2f64.sqrt(),
        Vec3::new(1.0, 1.0, -2.0) / 6f64.sqrt(),
    )
}

/// Boundary point of the slice `σ` in direction `θ`, by bisection from the centre.
pub fn slice_boundary_point(sigma: f64, theta: f64) -> Vec3 {
    let c = Vec3::from_element(sigma / 3.0);
    let (ea, eb) = slice_basis();
    let d = ea * theta.cos() + eb * theta.sin();
    let (mut lo, mut hi) = (0.0f64, 2.0 * 3f64.sqrt());
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if in_gram_set(&(c + d * mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    c + d * lo
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > -1.5 && sigma < 3.0) {
        return Err(Error::Domain(format!("σ = {sigma} outside (−3/2, 3)")));
    }
    Ok(())
}

/// Golden-section search for the extremum of `f` on `[a, b]`; `sign = 1` maximizes.
fn golden_extremum(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, sign: f64) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (sign * f(c), sign * f(d));
    for _ in 0..100 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = sign * f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = sign * f(d);
        }
    }
    0.5 * (a + b)
}

/// Extremes of `J·(u,v,w)` on the slice boundary found by scanning and golden refinement.
pub fn energy_extremes_by_scan(j: &Couplings, sigma: f64) -> EnergyExtremes {
    let energy = |th: f64| {
        let p = slice_boundary_point(sigma, th);
        j.energy_of(p.x, p.y, p.z)
    };
    let step = 2.0 * std::f64::consts::PI / SCAN_DIRECTIONS as f64;
    let values: Vec<f64> = (0..SCAN_DIRECTIONS).map(|k| energy(k as f64 * step)).collect();
    let (mut kmin, mut kmax) = (0, 0);
    for (k, &e) in values.iter().enumerate() {
        if e < values[kmin] {
            kmin = k;
        }
        if e > values[kmax] {
            kmax = k;
        }
    }
    let refine = |k: usize, sign: f64| {
        let th0 = k as f64 * step;
        golden_extremum(&energy, th0 - step, th0 + step, sign)
    };
    let th_min = refine(kmin, -1.0);
    let th_max = refine(kmax, 1.0);
    let pmin = slice_boundary_point(sigma, th_min);
    let pmax = slice_boundary_point(sigma, th_max);
    EnergyExtremes {
        range: EnergyRange {
            e_min: j.energy_of(pmin.x, pmin.y, pmin.z).min(values[kmin]),
            e_max: j.energy_of(pmax.x, pmax.y, pmax.z).max(values[kmax]),
        },
        argmin: pmin,
        argmax: pmax,
    }
}

/// Discriminant `Δ(ε) = g₂³ − 27g₃²` of the reduction at `(ε, σ)`.
pub fn discriminant_at(j: &Couplings, epsilon: f64, sigma: f64) -> Result<f64> {
    Ok(line_invariants(j, epsilon, sigma)?.discriminant())
}

/// Refines a scan estimate to the nearby sign change of `Δ(ε)`.
///
/// `outward` is `+1` at the top of the range and `−1` at the bottom.
fn polish_with_discriminant(
    j: &Couplings,
    sigma: f64,
    estimate: f64,
    outward: f64,
    width: f64,
) -> Option<(f64, Vec3)> {
    let disc = |e: f64| discriminant_at(j, e, sigma).ok();
    let mut h = 1e-9 * (1.0 + width);
    let mut bracket = None;
    for _ in 0..12 {
        let inner = estimate - outward * h;
        let outer = estimate + outward * h;
        if let (Some(di), Some(do_)) = (disc(inner), disc(outer)) {
            if di > 0.0 && do_ < 0.0 {
                bracket = Some((inner, outer));
                break;
            }
        }
        h *= 4.0;
        if h > 0.05 * width.max(1e-12) {
            break;
        }
    }
    let (mut a, mut b) = bracket?;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        if disc(mid)? > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let e = 0.5 * (a + b);
    // The double root must sit at the lower pair and map into the Gram box.
    let inv = line_invariants(j, e, sigma).ok()?;
    if inv.g2 <= 0.0 || inv.g3 <= 0.0 {
        return None;
    }
    let xd = -1.5 * inv.g3 / inv.g2;
    let (u, v, w) = inv.uvw_at(xd);
    let p = Vec3::new(u, v, w);
    if p.iter().any(|c| c.abs() > 1.0 + 1e-6) {
        return None;
    }
    Some((e, p))
}

/// Extremal energies on the slice `σ`, with the Gram points attaining them.
pub fn energy_extremes(j: &Couplings, sigma: f64) -> Result<EnergyExtremes> {
    if (sigma - 3.0).abs() <= 1e-12 {
        let e = j.j1 + j.j2 + j.j3;
        let p = Vec3::from_element(1.0);
        return Ok(EnergyExtremes {
            range: EnergyRange { e_min: e, e_max: e },
            argmin: p,
            argmax: p,
        });
    }
    check_sigma(sigma)?;
    if all_equal(j) {
        return Err(Error::Equilateral);
    }
    let mut ext = energy_extremes_by_scan(j, sigma);
    let width = ext.range.e_max - ext.range.e_min;
    let distinct =
        !couplings_equal(j.j1, j.j2) && !couplings_equal(j.j2, j.j3) && !couplings_equal(j.j1, j.j3);
    if distinct {
        let tol = 1e-7 * (1.0 + width);
        if let Some((e, p)) = polish_with_discriminant(j, sigma, ext.range.e_min, -1.0, width) {
            if (e - ext.range.e_min).abs() <= tol {
                ext.range.e_min = e;
                ext.argmin = p;
            }
        }
        if let Some((e, p)) = polish_with_discriminant(j, sigma, ext.range.e_max, 1.0, width) {
            if (e - ext.range.e_max).abs() <= tol {
                ext.range.e_max = e;
                ext.argmax = p;
            }
        }
    }
    Ok(ext)
}

/// `[E_min(σ), E_max(σ)]`.
pub fn energy_range(j: &Couplings, sigma: f64) -> Result<EnergyRange> {
    Ok(energy_extremes(j, sigma)?.range)
}

/// Which closed form produced a critical energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticalBranch {
    First,
    Second,
}

/// Energies at which the standard configuration passes a critical point.
pub fn critical_energies(j: &Couplings, sigma: f64) -> Vec<(f64, CriticalBranch)> {
    let mut out = Vec::new();
    let s = total_spin_length(sigma);
    let tol = 1e-12;
    if (-1.5 - tol..=3.0 + tol).contains(&sigma) {
        out.push((
            0.5 * (j.j2 + j.j3) * (s - 1.0) + j.j1 * (1.0 + sigma - s),
            CriticalBranch::First,
        ));
    }
    if (-1.5 - tol..=-1.0 + tol).contains(&sigma) {
        out.push((
            -0.5 * (j.j2 + j.j3) * (s + 1.0) + j.j1 * (1.0 + sigma + s),
            CriticalBranch::Second,
        ));
    }
    out
}

/// Critical Gram coordinates `(u_c, v_c)` with `w_c = v_c` for each branch.
pub fn critical_point(sigma: f64, branch: CriticalBranch) -> (f64, f64) {
    let s = total_spin_length(sigma);
    match branch {
        CriticalBranch::First => (1.0 + sigma - s, 0.5 * (s - 1.0)),
        CriticalBranch::Second => (1.0 + sigma + s, -0.5 * (s + 1.0)),
    }
}

/// Energies `J·eₙ` of the singular points `e₁, e₂, e₃`.
pub fn separatrix_energies(j: &Couplings) -> [f64; 3] {
    [j.j1 - j.j2 - j.j3, j.j2 - j.j3 - j.j1, j.j3 - j.j1 - j.j2]
}

/// Dynamical case label from couplings and conserved values.
pub fn classify_case(j: &Couplings, cv: &ConservedValues) -> Result<CaseLabel> {
    let sigma = cv.sigma;
    let s_len = total_spin_length(sigma);
    if !j.is_finite() || !cv.epsilon.is_finite() || !sigma.is_finite() || !cv.sigma3.is_finite() {
        return Err(Error::InconsistentConservedValues("non-finite input".into()));
    }
    if !(-1.5 - 1e-9..=3.0 + 1e-9).contains(&sigma) {
        return Err(Error::InconsistentConservedValues(format!(
            "σ = {sigma} outside [−3/2, 3]"
        )));
    }
    if cv.sigma3.abs() > s_len + 1e-9 {
        return Err(Error::InconsistentConservedValues(format!(
            "|σ₃| = {} exceeds S = {s_len}",
            cv.sigma3.abs()
        )));
    }
    if all_equal(j) {
        return Ok(CaseLabel::Equilateral);
    }
    if s_len <= 1e-9 {
        return Ok(CaseLabel::ZeroTotalSpin);
    }
    if sigma >= 3.0 - 1e-9 {
        return Ok(CaseLabel::Collinear);
    }
    let jj = j.as_array();
    let pairs = [(0usize, 1usize, 2usize), (1, 2, 0), (0, 2, 1)];
    for &(a, b, odd) in &pairs {
        if couplings_equal(jj[a], jj[b]) {
            // The Gram entry coupled by the odd constant is fixed along L.
            let fixed = (cv.epsilon - jj[a] * sigma) / (jj[odd] - jj[a]);
            let equal_pair = (a + 1, b + 1);
            return Ok(if (fixed + 1.0).abs() <= 1e-9 {
                CaseLabel::FaceCase
            } else {
                CaseLabel::Isosceles { equal_pair }
            });
        }
    }
    let scale = 1f64.max(jj.iter().map(|x| x.abs()).sum());
    if (sigma + 1.0).abs() <= SEPARATRIX_TOL {
        let es = separatrix_energies(j);
        if let Some(n) = es
            .iter()
            .position(|e| (cv.epsilon - e).abs() <= SEPARATRIX_TOL * scale)
        {
            let below = es.iter().filter(|&&e| e < es[n] - SEPARATRIX_TOL * scale).count();
            let above = es.iter().filter(|&&e| e > es[n] + SEPARATRIX_TOL * scale).count();
            return Ok(if below > 0 && above > 0 {
                CaseLabel::AperiodicSeparatrix
            } else {
                CaseLabel::Collinear
            });
        }
    }
    let range = energy_range(j, sigma)?;
    let tol = ENDPOINT_TOL * scale;
    if cv.epsilon < range.e_min - tol || cv.epsilon > range.e_max + tol {
        return Err(Error::InconsistentConservedValues(format!(
            "ε = {} outside [{}, {}]",
            cv.epsilon, range.e_min, range.e_max
        )));
    }
    if (cv.epsilon - range.e_min).abs() <= tol || (cv.epsilon - range.e_max).abs() <= tol {
        return Ok(CaseLabel::StationaryGram);
    }
    Ok(CaseLabel::Generic)
}

/// Classification that also inspects the Gram point of a concrete state.
pub fn classify_state(j: &Couplings, s: &SpinConfiguration) -> Result<CaseLabel> {
    let g = gram(s);
    if singular_index(g.u, g.v, g.w).is_some() {
        return Ok(CaseLabel::Collinear);
    }
    classify_case(j, &crate::core_model::conserved_values(s, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_model::tests::random_config;
    use crate::core_model::{conserved_values, standard_config};
    use crate::internal_dynamics::{internal_state, reduce};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const S2: f64 = std::f64::consts::SQRT_2;

    /// Independent oracle: sample the slice boundary by a polar sweep of `det G = 0`.
    fn boundary_scan_oracle(j: &Couplings, sigma: f64, n: usize) -> (f64, f64) {
        let c = Vec3::from_element(sigma / 3.0);
        let a = Vec3::new(2.0, -1.0, -1.0) / 6f64.sqrt();
        let b = Vec3::new(0.0, 1.0, -1.0) / 2f64.sqrt();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..n {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let d = a * th.cos() + b * th.sin();
            let inside = |r: f64| {
                let p = c + d * r;
                p.iter().all(|x| x.abs() <= 1.0) && gram_det(p.x, p.y, p.z) >= 0.0
            };
            let (mut r0, mut r1) = (0.0, 4.0);
            for _ in 0..60 {
                let m = 0.5 * (r0 + r1);
                if inside(m) {
                    r0 = m
                } else {
                    r1 = m
                }
            }
            let p = c + d * r0;
            let e = j.energy_of(p.x, p.y, p.z);
            lo = lo.min(e);
            hi = hi.max(e);
        }
        (lo, hi)
    }

    #[test]
    fn membership_examples() {
        assert_eq!(gram_membership(0.0, 0.0, 0.0), Membership::Interior);
        assert_eq!(gram_membership(1.0, -1.0, -1.0), Membership::Singular(1));
        assert_eq!(gram_membership(1.0, 1.0, 1.0), Membership::Singular(0));
        // det G = 1 − 3·0.81 + 2·0.729 = 0.028 > 0.
        let det = gram_det(0.9, 0.9, 0.9);
        let brute = nalgebra::Matrix3::new(1.0, 0.9, 0.9, 0.9, 1.0, 0.9, 0.9, 0.9, 1.0).determinant();
        assert!((det - brute).abs() < 1e-15 && det > 0.0);
        assert_eq!(gram_membership(0.9, 0.9, 0.9), Membership::Interior);
        assert_eq!(gram_membership(0.9, -0.9, 0.9), Membership::Outside);
        assert_eq!(gram_membership(1.0, 0.3, 0.3), Membership::Boundary);
        assert_eq!(gram_membership(1.2, 0.0, 0.0), Membership::Outside);
    }

    #[test]
    fn line_direction_examples() {
        assert_eq!(
            line_direction(&Couplings::new(0.0, 1.0, 2.0)).unwrap(),
            Vec3::new(1.0, -2.0, 1.0)
        );
        let lam = 0.3;
        assert_eq!(
            line_direction(&Couplings::new(lam, 1.0, 0.0)).unwrap(),
            Vec3::new(-1.0, lam, 1.0 - lam)
        );
        assert_eq!(
            line_direction(&Couplings::new(1.0, 1.0, 2.0)).unwrap(),
            Vec3::new(1.0, -1.0, 0.0)
        );
        assert_eq!(
            line_direction(&Couplings::new(2.0, 2.0, 2.0)),
            Err(Error::Equilateral)
        );
    }

    #[test]
    fn paper_energy_range() {
        let j = Couplings::paper_example();
        let r = energy_range(&j, 0.0).unwrap();
        assert!((r.e_min + 1.47328).abs() < 1e-4, "{r:?}");
        assert!((r.e_max - 1.23498).abs() < 1e-4, "{r:?}");
        for e in [r.e_min, r.e_max] {
            let inv = line_invariants(&j, e, 0.0).unwrap();
            let scale = inv.g2.abs().powi(3).max(27.0 * inv.g3 * inv.g3);
            assert!(inv.discriminant().abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn energy_range_near_top_slice() {
        let j = Couplings::new(0.4, -1.0, 0.9);
        let r = energy_range(&j, 3.0).unwrap();
        assert_eq!(r.e_min, r.e_max);
        assert!((r.e_min - 0.3).abs() < 1e-15);
        let r = energy_range(&j, 3.0 - 1e-8).unwrap();
        assert!((r.e_min - 0.3).abs() < 1e-6 && (r.e_max - 0.3).abs() < 1e-6);
        assert!(energy_range(&j, 3.5).is_err());
        assert!(energy_range(&j, -1.6).is_err());
    }

    #[test]
    fn energy_range_matches_dense_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..6 {
            let j = Couplings::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let sigma = rng.gen_range(-1.4..2.9);
            let r = energy_range(&j, sigma).unwrap();
            let (lo, hi) = boundary_scan_oracle(&j, sigma, 100_000);
            assert!(
                (r.e_min - lo).abs() < 1e-6,
                "{j:?} σ={sigma}: {} vs {lo}",
                r.e_min
            );
            assert!(
                (r.e_max - hi).abs() < 1e-6,
                "{j:?} σ={sigma}: {} vs {hi}",
                r.e_max
            );
        }
    }

    #[test]
    fn critical_energy_branches() {
        let j = Couplings::new(0.3, 0.5, -0.7);
        let top = critical_energies(&j, 3.0);
        assert_eq!(top.len(), 1);
        assert!((top[0].0 - (j.j1 + j.j2 + j.j3)).abs() < 1e-14);
        assert_eq!(critical_energies(&j, 0.0).len(), 1);
        let two = critical_energies(&j, -4.0 / 3.0);
        assert_eq!(two.len(), 2);
        for (e, branch) in two {
            let (u, v) = critical_point(-4.0 / 3.0, branch);
            assert!((j.energy_of(u, v, v) - e).abs() < 1e-12);
            assert!((u + 2.0 * v + 4.0 / 3.0).abs() < 1e-12);
            assert!((2.0 * (u + 1.0) - 4.0 * v * v).abs() < 1e-12);
        }
    }

    #[test]
    fn classification_examples() {
        let j = Couplings::paper_example();
        let cv = ConservedValues::new(S2 / 4.0, 0.0, 1.0);
        assert_eq!(classify_case(&j, &cv).unwrap(), CaseLabel::Generic);

        let iso = classify_case(
            &Couplings::new(1.0, 1.0, 0.0),
            &ConservedValues::new(0.1, 0.0, 0.0),
        );
        assert_eq!(iso.unwrap(), CaseLabel::Isosceles { equal_pair: (1, 2) });

        let ap = classify_case(
            &Couplings::new(0.5, 1.0, 0.0),
            &ConservedValues::new(-0.5, -1.0, 0.0),
        );
        assert_eq!(ap.unwrap(), CaseLabel::AperiodicSeparatrix);

        let eq = classify_case(
            &Couplings::new(0.7, 0.7, 0.7),
            &ConservedValues::new(0.0, 0.0, 0.0),
        );
        assert_eq!(eq.unwrap(), CaseLabel::Equilateral);

        let zero = classify_case(&j, &ConservedValues::new(0.0, -1.5, 0.0));
        assert_eq!(zero.unwrap(), CaseLabel::ZeroTotalSpin);

        // J₁ = J₂ with w = −1: face case.
        let jf = Couplings::new(1.0, 1.0, 0.4);
        let gam = 0.3;
        let eps = jf.energy_of(-gam, gam, -1.0);
        let face = classify_case(&jf, &ConservedValues::new(eps, -1.0, 0.0)).unwrap();
        assert_eq!(face, CaseLabel::FaceCase);

        let r = energy_range(&j, 0.0).unwrap();
        let st = classify_case(&j, &ConservedValues::new(r.e_max, 0.0, 0.0)).unwrap();
        assert_eq!(st, CaseLabel::StationaryGram);

        let bad = classify_case(&j, &ConservedValues::new(5.0, 0.0, 0.0));
        assert!(matches!(bad, Err(Error::InconsistentConservedValues(_))));
        let bad = classify_case(&j, &ConservedValues::new(0.0, 0.0, 2.0));
        assert!(matches!(bad, Err(Error::InconsistentConservedValues(_))));
    }

    #[test]
    fn separatrix_extremes_are_collinear() {
        // Energies of e₁, e₂, e₃ for (1/2, 1, 0) are (−1/2, 1/2, −3/2).
        let j = Couplings::new(0.5, 1.0, 0.0);
        let lab = classify_case(&j, &ConservedValues::new(0.5, -1.0, 0.0)).unwrap();
        assert_eq!(lab, CaseLabel::Collinear);
    }

    #[test]
    fn classification_is_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..30 {
            let j = Couplings::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let s = random_config(&mut rng);
            let cv = conserved_values(&s, &j);
            let dj = rng.gen_range(-1.0..1.0);
            let shifted = ConservedValues::new(cv.epsilon + dj * cv.sigma, cv.sigma, cv.sigma3);
            assert_eq!(
                classify_case(&j, &cv).unwrap(),
                classify_case(&j.shifted(dj), &shifted).unwrap()
            );
        }
    }

    #[test]
    fn tangency_examples() {
        let j = Couplings::paper_example();
        assert_eq!(
            tangency_factor(&GramPoint::new(0.0, 0.0, 0.0, 1.0), &j).unwrap(),
            0.0
        );
        assert_eq!(
            tangency_factor(&GramPoint::new(1.0, -1.0, -1.0, 0.0), &j).unwrap(),
            0.0
        );
        let wd = reduce(&j, S2 / 4.0, 0.0).unwrap();
        let g1 = GramPoint::new(-0.5, -0.5, 1.0, 0.0);
        let gamma = tangency_factor(&g1, &j).unwrap();
        assert!(gamma.abs() > 1e-3);
        let x2 = wd.roots.x2;
        let ratio = gamma * wd.line.xdot_per_delta / wd.line.pi_prime(x2);
        assert!((ratio - 1.0).abs() < 1e-9, "ratio {ratio}");
    }

    #[test]
    fn tangency_proportional_to_pi_prime_along_orbits() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut found = 0;
        while found < 100 {
            let j = Couplings::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let s = random_config(&mut rng);
            let cv = conserved_values(&s, &j);
            if classify_case(&j, &cv).unwrap() != CaseLabel::Generic {
                continue;
            }
            found += 1;
            let wd = reduce(&j, cv.epsilon, cv.sigma).unwrap();
            assert!(wd.line.discriminant() > 0.0);
            assert!(!wd.roots.is_degenerate());
            for k in 0..10 {
                let t = wd.period() * k as f64 / 10.0;
                let gp = internal_state(t, &wd);
                let x = wd.line.x_of_u(gp.u);
                let gamma = tangency_factor(&gp, &j).unwrap();
                let rhs = wd.line.pi_prime(x) / wd.line.xdot_per_delta;
                assert!((gamma - rhs).abs() < 1e-9 * (1.0 + rhs.abs()), "{gamma} vs {rhs}");
            }
        }
    }

    #[test]
    fn standard_config_of_range_endpoints_is_stationary_gram() {
        let j = Couplings::paper_example();
        let ext = energy_extremes(&j, 0.0).unwrap();
        for p in [ext.argmin, ext.argmax] {
            let r = standard_config(&GramPoint::with_orientation(p.x, p.y, p.z, 1.0)).unwrap();
            let lab = classify_case(&j, &conserved_values(&r, &j)).unwrap();
            assert_eq!(lab, CaseLabel::StationaryGram);
        }
    }
}
