//! Deterministic fixed-step simulation.
//!
//! Everything is integrated with the classical fourth-order Runge–Kutta
//! scheme on a uniform grid. Several [`VectorField`]s can be wired together
//! with [`Coupled`]; signals produced by a [`HeldLaw`] (controllers) are
//! sampled once at the start of each step and held for its duration, which
//! introduces a one-step delay but never an algebraic loop.

mod coupled;
mod field;
mod schedule;
mod trajectory;

pub use coupled::{coupled_integrate, integrate, Block, Coupled, Feed, HeldLaw};
pub use field::{FnField, StepContext, VectorField};
pub use schedule::{Input, InputSchedule};
pub use trajectory::Trajectory;

use thiserror::Error;

/// Default step for converter scenarios (µF/mH time constants).
pub const DT_CONVERTER: f64 = 1e-5;
/// Default step for mechanical and motor scenarios.
pub const DT_MECHANICAL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("integration diverged at step {step} (t = {time} s): non-finite value in `{signal}`")]
    Diverged { step: usize, time: f64, signal: String },
    #[error("wiring error: {0}")]
    Wiring(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid input schedule: {0}")]
    Schedule(String),
}

/// Number of samples `⌊horizon/dt⌋ + 1` of a uniform grid.
pub fn sample_count(dt: f64, horizon: f64) -> Result<usize, SimError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(SimError::Grid(format!("dt must be positive, got {dt}")));
    }
    if !(horizon >= dt) || !horizon.is_finite() {
        return Err(SimError::Grid(format!(
            "horizon must be at least dt ({dt}), got {horizon}"
        )));
    }
    // absorb representation error in ratios like 1.0 / 1e-3
    let steps = (horizon / dt * (1.0 + 1e-12)).floor() as usize;
    Ok(steps + 1)
}
