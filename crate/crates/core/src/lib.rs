//! Parameter-estimation-based observers (PEBO).
//!
//! The unmeasured part `x` of a plant state is reconstructed from a partial
//! change of coordinates `z = φ(x, y)` whose dynamics `ż = h(y, u)` only
//! depend on measured signals. An open-loop copy `χ̇ = h(y, u)` differs from
//! `z` by the constant `θ = z(0) − χ(0)`, so observing `x` reduces to
//! estimating `θ` on-line and evaluating `x̂ = φᴸ(χ + θ̂, y)`.
//!
//! Modules:
//! * [`sim`]: fixed-step RK4 integration, block wiring and trajectory recording.
//! * [`framework`]: cascade forms, regression filtering, gradient estimation,
//!   excitation monitoring and observer assembly.
//! * [`lti`]: observability, cascade solvability and identifiability for LTI plants.
//! * [`cuk`], [`pmsm`], [`mech`]: the converter, motor and mechanical case studies.

// `!(x > 0.0)` style guards deliberately treat NaN as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cuk;
pub mod framework;
pub mod linalg;
pub mod lti;
pub mod mech;
pub mod pmsm;
pub mod sim;

pub use nalgebra::{DMatrix, DVector};
