//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("cubic has complex roots (g2 = {g2}, g3 = {g3})")]
    ComplexRoots { g2: f64, g3: f64 },
    #[error("cubic roots are degenerate: {roots:?}")]
    DegenerateRoots { roots: [f64; 3] },
    #[error("spin configuration is collinear")]
    Collinear,
    #[error("couplings are all equal; the conservation line is undefined")]
    Equilateral,
    #[error("instance is not generic: {0}")]
    NotGeneric(String),
    #[error("inconsistent conserved values: {0}")]
    InconsistentConservedValues(String),
    #[error("no phase on the reference trajectory matches the initial state: {0}")]
    NoPhaseMatch(String),
    #[error("angular velocity diverges at a critical point (u = {u})")]
    CriticalPointSingularity { u: f64 },
    #[error("energy grid too coarse near critical energy {epsilon_c}")]
    RefinementRequired { epsilon_c: f64 },
    #[error("swept-area orbit is self-intersecting for spin {spin}")]
    AreaAmbiguity { spin: usize },
    #[error("degenerate special case: {0}")]
    Degenerate(String),
    #[error("Gram point is not at an endpoint of the energy range (distance {distance})")]
    NotOnBoundary { distance: f64 },
    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
