//! Spin configurations, couplings, Gram points and the Heisenberg torque field.
//!
//! A configuration is a 3×3 matrix whose columns are the unit spins
//! `s₁, s₂, s₃`. The couplings are labelled by the spin they do *not* touch:
//! `H = J₁ s₂·s₃ + J₂ s₃·s₁ + J₃ s₁·s₂ = J₁u + J₂v + J₃w`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dual::Real;
use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Column-norm tolerance accepted by [`SpinConfiguration::new`].
pub const UNIT_TOL: f64 = 1e-9;

/// Threshold on `2(1+u) − (v+w)²` below which the critical limit is used.
pub const CRITICAL_LIMIT_TOL: f64 = 1e-12;

/// Three unit spins stored as the columns of a matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinConfiguration {
    pub s: Mat3,
}

impl SpinConfiguration {
    /// Wraps a matrix after checking that every column is a unit vector.
    pub fn new(s: Mat3) -> Result<Self> {
        for mu in 0..3 {
            let n = s.column(mu).norm();
            if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
                return Err(Error::Domain(format!("spin {} has norm {n}", mu + 1)));
            }
        }
        Ok(Self { s })
    }

    /// Wraps a matrix without validation.
    pub fn from_matrix_unchecked(s: Mat3) -> Self {
        Self { s }
    }

    pub fn from_columns(s1: Vec3, s2: Vec3, s3: Vec3) -> Result<Self> {
        Self::new(Mat3::from_columns(&[s1, s2, s3]))
    }

    /// Normalizes each column; used for directions given only approximately.
    pub fn normalized(s: Mat3) -> Result<Self> {
        let mut out = s;
        for mu in 0..3 {
            let n = s.column(mu).norm();
            if n == 0.0 || !n.is_finite() {
                return Err(Error::Domain(format!("spin {} has zero length", mu + 1)));
            }
            out.set_column(mu, &(s.column(mu) / n));
        }
        Ok(Self { s: out })
    }

    pub fn spin(&self, mu: usize) -> Vec3 {
        self.s.column(mu).into_owned()
    }

    pub fn rotated(&self, r: &Rotation) -> Self {
        Self { s: r.r * self.s }
    }

    /// Row-major copy `[[s11, s12, s13], …]`, i.e. component `i` of spin `μ` at `[i][μ]`.
    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (mu, x) in row.iter_mut().enumerate() {
                *x = self.s[(i, mu)];
            }
        }
        out
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::new(Mat3::from_fn(|i, mu| rows[i][mu]))
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.s - other.s).amax()
    }
}

impl Serialize for SpinConfiguration {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(ser)
    }
}

impl<'de> Deserialize<'de> for SpinConfiguration {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(de)?;
        SpinConfiguration::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// Exchange constants; `J₁` couples spins 2 and 3, `J₂` spins 3 and 1, `J₃` spins 1 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
}

impl Couplings {
    pub fn new(j1: f64, j2: f64, j3: f64) -> Self {
        Self { j1, j2, j3 }
    }

    /// `(−1/2, 1/2 + √2/2, √2/2)`, the couplings of the worked example.
    pub fn paper_example() -> Self {
        let h = 0.5 * std::f64::consts::SQRT_2;
        Self::new(-0.5, 0.5 + h, h)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.j1, self.j2, self.j3]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Symmetric coupling `J_{μκ}` between spins `μ ≠ κ` (0-based), zero on the diagonal.
    pub fn pair(&self, mu: usize, kappa: usize) -> f64 {
        if mu == kappa {
            0.0
        } else {
            self.as_array()[3 - mu - kappa]
        }
    }

    pub fn shifted(&self, delta: f64) -> Self {
        Self::new(self.j1 + delta, self.j2 + delta, self.j3 + delta)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(c * self.j1, c * self.j2, c * self.j3)
    }

    /// `J·(u,v,w)`.
    pub fn energy_of(&self, u: f64, v: f64, w: f64) -> f64 {
        self.j1 * u + self.j2 * v + self.j3 * w
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|x| x.is_finite())
    }
}

/// Internal state: the off-diagonal Gram entries and the signed volume `δ = det s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GramPoint {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub delta: f64,
}

impl GramPoint {
    pub fn new(u: f64, v: f64, w: f64, delta: f64) -> Self {
        Self { u, v, w, delta }
    }

    /// Builds the point with `δ = sign·√det G`.
    pub fn with_orientation(u: f64, v: f64, w: f64, sign: f64) -> Self {
        let d = gram_det(u, v, w).max(0.0).sqrt();
        Self::new(u, v, w, if sign < 0.0 { -d } else { d })
    }

    pub fn sigma(&self) -> f64 {
        self.u + self.v + self.w
    }

    pub fn det(&self) -> f64 {
        gram_det(self.u, self.v, self.w)
    }

    pub fn uvw(&self) -> Vec3 {
        Vec3::new(self.u, self.v, self.w)
    }
}

/// `det G = 1 − u² − v² − w² + 2uvw`.
pub fn gram_det(u: f64, v: f64, w: f64) -> f64 {
    1.0 - u * u - v * v - w * w + 2.0 * u * v * w
}

/// Energy `ε`, `σ = u+v+w`, third component of the total spin, and `S = |Σ sμ|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedValues {
    pub epsilon: f64,
    pub sigma: f64,
    pub sigma3: f64,
    pub s_len: f64,
}

impl ConservedValues {
    /// Builds the record from `(ε, σ, σ₃)`; `S` follows from `σ`.
    pub fn new(epsilon: f64, sigma: f64, sigma3: f64) -> Self {
        Self {
            epsilon,
            sigma,
            sigma3,
            s_len: total_spin_length(sigma),
        }
    }
}

/// `S = √(3 + 2σ)`, clamped at zero.
pub fn total_spin_length(sigma: f64) -> f64 {
    (3.0 + 2.0 * sigma).max(0.0).sqrt()
}

/// A rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub r: Mat3,
}

impl Rotation {
    pub fn identity() -> Self {
        Self { r: Mat3::identity() }
    }

    /// `ℛ(n, α)`: right-handed rotation by `α` about `n`; a zero axis gives the identity.
    pub fn axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        let k = axis / n;
        let (s, c) = angle.sin_cos();
        let kx = k.cross_matrix();
        Self {
            r: Mat3::identity() + kx * s + kx * kx * (1.0 - c),
        }
    }

    /// Rotation about the third axis.
    pub fn about_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            r: Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            r: self.r.transpose(),
        }
    }

    pub fn compose(&self, other: &Rotation) -> Self {
        Self { r: self.r * other.r }
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.r * x
    }

    /// `max |RᵀR − 1|`.
    pub fn orthogonality_error(&self) -> f64 {
        (self.r.transpose() * self.r - Mat3::identity()).amax()
    }
}

/// A trajectory `t ↦ s(t)` of the equations of motion for fixed couplings.
pub trait Evolution {
    fn couplings(&self) -> Couplings;
    fn state(&self, t: f64) -> Result<SpinConfiguration>;

    /// Period of the relative (Gram) motion, or of the whole motion when the
    /// Gram matrix is frozen; `None` for aperiodic or static solutions.
    fn period(&self) -> Option<f64> {
        None
    }
}

impl<E: Evolution + ?Sized> Evolution for Box<E> {
    fn couplings(&self) -> Couplings {
        self.as_ref().couplings()
    }

    fn state(&self, t: f64) -> Result<SpinConfiguration> {
        self.as_ref().state(t)
    }

    fn period(&self) -> Option<f64> {
        self.as_ref().period()
    }
}

/// `H = J₁u + J₂v + J₃w`.
pub fn hamiltonian(s: &SpinConfiguration, j: &Couplings) -> f64 {
    let g = gram(s);
    j.energy_of(g.u, g.v, g.w)
}

/// `H₁ = u + v + w`.
pub fn h1(s: &SpinConfiguration) -> f64 {
    gram(s).sigma()
}

/// `S = s₁ + s₂ + s₃`.
pub fn total_spin(s: &SpinConfiguration) -> Vec3 {
    s.s.column(0) + s.s.column(1) + s.s.column(2)
}

pub fn conserved_values(s: &SpinConfiguration, j: &Couplings) -> ConservedValues {
    let g = gram(s);
    let total = total_spin(s);
    ConservedValues {
        epsilon: j.energy_of(g.u, g.v, g.w),
        sigma: g.sigma(),
        sigma3: total.z,
        s_len: total_spin_length(g.sigma()),
    }
}

/// Right-hand side of the equations of motion; column `μ` is `(Σ_κ J_{μκ} s_κ) × s_μ`.
pub fn torque_field(s: &SpinConfiguration, j: &Couplings) -> Mat3 {
    torque_with_field(&s.s, j, &Vec3::zeros())
}

/// Torque with an additional uniform field `b`: column `μ` is `(Σ_κ J_{μκ} s_κ + b) × s_μ`.
pub fn torque_with_field(s: &Mat3, j: &Couplings, b: &Vec3) -> Mat3 {
    let c = [s.column(0), s.column(1), s.column(2)];
    let local = [
        c[1] * j.j3 + c[2] * j.j2 + b,
        c[0] * j.j3 + c[2] * j.j1 + b,
        c[0] * j.j2 + c[1] * j.j1 + b,
    ];
    Mat3::from_columns(&[
        local[0].cross(&c[0]),
        local[1].cross(&c[1]),
        local[2].cross(&c[2]),
    ])
}

/// `(u, v, w, δ) = (s₂·s₃, s₃·s₁, s₁·s₂, det s)`.
pub fn gram(s: &SpinConfiguration) -> GramPoint {
    let c = [s.spin(0), s.spin(1), s.spin(2)];
    GramPoint {
        u: c[1].dot(&c[2]),
        v: c[2].dot(&c[0]),
        w: c[0].dot(&c[1]),
        delta: s.s.determinant(),
    }
}

/// Standard configuration as generic arithmetic, for values and derivatives alike.
///
/// Returns `None` for the critical limit, which the caller handles separately.
pub(crate) fn standard_columns<T: Real>(u: T, v: T, w: T, delta: T) -> Option<[[T; 3]; 3]> {
    let one = T::cst(1.0);
    let two = T::cst(2.0);
    let n = T::cst(3.0) + two * (u + v + w);
    let d = two * (u + one) - (v + w) * (v + w);
    if d.value().abs() < CRITICAL_LIMIT_TOL {
        return None;
    }
    let sn = n.sqrt();
    let sd = d.sqrt();
    let sdn = sd * sn;
    let r1 = [sd / sn, T::cst(0.0), (v + w + one) / sn];
    let r2 = [
        (w * (u + v + one) - (u + one) * (v + one) + w * w) / sdn,
        delta / sd,
        (u + w + one) / sn,
    ];
    let r3 = [
        (v * (w + u + one) - (w + one) * (u + one) + v * v) / sdn,
        -delta / sd,
        (u + v + one) / sn,
    ];
    Some([r1, r2, r3])
}

/// Canonical realization `r(u,v,w,δ)` of a Gram point with total spin `(0, 0, S)`.
pub fn standard_config(g: &GramPoint) -> Result<SpinConfiguration> {
    let n = 3.0 + 2.0 * g.sigma();
    if n <= 1e-12 {
        return Err(Error::Domain(format!(
            "standard configuration needs S > 0 (3 + 2σ = {n})"
        )));
    }
    if let Some(idx) = crate::gram_geometry::singular_index(g.u, g.v, g.w) {
        return Err(Error::Domain(format!(
            "Gram point is the singular extremal point e{idx}"
        )));
    }
    let cols = match standard_columns(g.u, g.v, g.w, g.delta) {
        Some(c) => c,
        None => {
            // Critical limit: r₁ ∥ S and the pair r₂, r₃ mirror each other.
            if (g.v - g.w).abs() > 1e-6 {
                return Err(Error::Domain(
                    "2(1+u) − (v+w)² vanishes away from the critical limit".into(),
                ));
            }
            let sn = n.sqrt();
            let y = (1.0 - g.v * g.v).max(0.0).sqrt();
            [
                [0.0, 0.0, (g.v + g.w + 1.0) / sn],
                [0.0, y, (g.u + g.w + 1.0) / sn],
                [0.0, -y, (g.u + g.v + 1.0) / sn],
            ]
        }
    };
    Ok(SpinConfiguration::from_matrix_unchecked(Mat3::from_fn(
        |i, mu| cols[mu][i],
    )))
}

/// `s = R′·p′` with `R′ ∈ SO(3)` and `p′ = ±√(sᵀs)` carrying the sign of `det s`.
pub fn oriented_polar(s: &SpinConfiguration) -> Result<(Rotation, Mat3)> {
    let g = s.s.transpose() * s.s;
    let eig = SymmetricEigen::new(g);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lam: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let mut vecs: Vec<Vec3> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if lam[1] <= 1e-20 * lam[0].max(1.0) {
        return Err(Error::Collinear);
    }
    // Right-handed eigenbasis.
    vecs[2] = vecs[0].cross(&vecs[1]).normalize();
    let y1 = (s.s * vecs[0]) / lam[0].sqrt();
    let y2_raw = s.s * vecs[1] / lam[1].sqrt();
    let y2 = (y2_raw - y1 * y1.dot(&y2_raw)).normalize();
    let y3 = y1.cross(&y2);
    let vmat = Mat3::from_columns(&[vecs[0], vecs[1], vecs[2]]);
    let r = Mat3::from_columns(&[y1, y2, y3]) * vmat.transpose();
    let p = vmat
        * Mat3::from_diagonal(&Vec3::new(lam[0].sqrt(), lam[1].sqrt(), lam[2].sqrt()))
        * vmat.transpose();
    let det = s.s.determinant();
    if det < 0.0 {
        // The polar factor U = s·√G⁻¹ is improper here; R′ = −U and p′ = −√G.
        let u_pol = Mat3::from_columns(&[y1, y2, -y3]) * vmat.transpose();
        Ok((Rotation { r: -u_pol }, -p))
    } else {
        Ok((Rotation { r }, p))
    }
}

/// Proper rotation `R` minimizing `‖R·a − b‖` (Kabsch), for configurations of rank ≥ 2.
pub fn best_rotation(a: &SpinConfiguration, b: &SpinConfiguration) -> Result<Rotation> {
    let h = b.s * a.s.transpose();
    let svd = h.svd(true, true);
    let (uu, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(v)) => (u, v),
        _ => return Err(Error::Collinear),
    };
    let mut sv: Vec<(f64, usize)> = (0..3).map(|i| (svd.singular_values[i], i)).collect();
    sv.sort_by(|x, y| y.0.total_cmp(&x.0));
    if sv[1].0 <= 1e-10 * sv[0].0.max(1e-300) {
        return Err(Error::Collinear);
    }
    let d = (uu * vt).determinant().signum();
    let mut diag = Vec3::new(1.0, 1.0, 1.0);
    diag[sv[2].1] = d;
    Ok(Rotation {
        r: uu * Mat3::from_diagonal(&diag) * vt,
    })
}
