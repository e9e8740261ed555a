//! Semi-analytical solution of the classical Heisenberg spin triangle.
//!
//! The internal motion of the three dot products reduces to a Weierstrass
//! elliptic function; the remaining rotation about the total spin follows by
//! one quadrature. Special coupling and energy values have closed forms, and
//! an adaptive Runge–Kutta integrator serves as an independent reference.

// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action_angle;
pub mod core_model;
pub(crate) mod dual;
pub mod error;
pub mod external_dynamics;
pub mod gram_geometry;
pub mod internal_dynamics;
pub mod numeric_oracle;
pub mod quadrature;
pub mod special_cases;
pub mod special_functions;

pub use core_model::{ConservedValues, Couplings, Evolution, GramPoint, Rotation, SpinConfiguration};
pub use error::{Error, Result};
