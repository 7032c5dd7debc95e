//! Numerical verification of the structural identities an observer relies on.
//!
//! All functions work on sampled sequences so they apply equally to
//! open-loop oracle runs and to closed-loop scenario recordings.

use std::sync::Arc;

use nalgebra::DVector;

use super::{extend, Cascade, FrameworkError, LinearRegression, PlantBlock, StaticRegression};
use crate::sim::{coupled_integrate, Block, Coupled, Feed, InputSchedule, SimError};

/// `|φᴸ(φ(x, y), y) − x|` relative to `max(|x|, |φ(x, y)|)`.
pub fn left_inverse_error(
    cascade: &dyn Cascade,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<f64, FrameworkError> {
    let z = cascade.phi(x, y);
    let back = cascade.phi_left(&z, y)?;
    let err = cascade.x_error(&back, x).norm();
    let scale = x.norm().max(z.norm()).max(f64::MIN_POSITIVE);
    Ok(err / scale)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OffsetReport {
    /// `z(0) − χ(0)`.
    pub theta: DVector<f64>,
    /// `max_t |(z(t) − χ(t)) − θ|`.
    pub max_drift: f64,
    /// `|z(0)|`.
    pub z0_norm: f64,
}

impl OffsetReport {
    /// `max_drift ≤ rtol · (1 + |z(0)|)`.
    pub fn within(&self, rtol: f64) -> bool {
        self.max_drift <= rtol * (1.0 + self.z0_norm)
    }
}

/// Tracks `z(t) − χ(t)` along a recorded run.
pub fn offset_drift(
    cascade: &dyn Cascade,
    plant_states: &[DVector<f64>],
    chis: &[DVector<f64>],
) -> OffsetReport {
    let z0 = cascade.z_of(&plant_states[0]);
    let theta = &z0 - &chis[0];
    let max_drift = plant_states
        .iter()
        .zip(chis)
        .map(|(s, c)| (cascade.z_of(s) - c - &theta).norm())
        .fold(0.0, f64::max);
    OffsetReport {
        theta,
        max_drift,
        z0_norm: z0.norm(),
    }
}

/// Simulates the plant from `state0` together with the extension `χ̇ = h(y, u)`
/// from `chi0` under an open-loop input, and reports the drift of `z − χ`.
pub fn offset_run(
    cascade: Arc<dyn Cascade>,
    state0: &DVector<f64>,
    chi0: &DVector<f64>,
    input: &InputSchedule,
    dt: f64,
    horizon: f64,
) -> Result<OffsetReport, SimError> {
    let mut sys = Coupled::new();
    let plant = sys.add(Block::new("plant", Arc::new(PlantBlock::new(cascade.clone())), state0.clone()).feed(Feed::External));
    let ext = extend(cascade.clone(), chi0.clone(), plant, Feed::External).map_err(|e| SimError::Wiring(e.to_string()))?;
    sys.add(ext);
    let tr = coupled_integrate(&sys, input, dt, horizon)?;
    let states: Vec<DVector<f64>> = (0..tr.len())
        .map(|k| DVector::from_row_slice(tr.group("plant", k).expect("plant group")))
        .collect();
    let chis: Vec<DVector<f64>> = (0..tr.len())
        .map(|k| DVector::from_row_slice(tr.group("chi", k).expect("chi group")))
        .collect();
    Ok(offset_drift(cascade.as_ref(), &states, &chis))
}

/// Largest `|d/dt φ(x, y) − h(y, u)|` over interior samples (central
/// differences), relative to the largest `|h|` seen.
pub fn transformability_residual(
    cascade: &dyn Cascade,
    plant_states: &[DVector<f64>],
    inputs: &[DVector<f64>],
    dt: f64,
) -> f64 {
    let z: Vec<DVector<f64>> = plant_states.iter().map(|s| cascade.z_of(s)).collect();
    let mut worst: f64 = 0.0;
    let mut h_scale: f64 = 0.0;
    for k in 1..plant_states.len().saturating_sub(1) {
        let (_, y) = cascade.split(&plant_states[k]);
        let h = cascade.h(&y, &inputs[k]);
        let dz = (&z[k + 1] - &z[k - 1]) / (2.0 * dt);
        worst = worst.max((dz - &h).norm());
        h_scale = h_scale.max(h.norm());
    }
    worst / h_scale.max(f64::MIN_POSITIVE)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionResidual {
    /// `max_k |Δyᵣ/Δt − Φ0 − Φ1 θ|` with central differences.
    pub max_residual: f64,
    /// `max_k |yᵣ'''|`, estimated with a five-point stencil.
    pub third_derivative: f64,
    /// `max_k |yᵣ|`, which sets the rounding error of the difference quotient.
    pub signal_max: f64,
}

impl RegressionResidual {
    /// Residual within `factor · dt² · |yᵣ'''|` (central differences err by `dt²/6 · |yᵣ'''|`).
    pub fn within(&self, factor: f64, dt: f64) -> bool {
        self.max_residual <= self.bound(factor, dt)
    }

    /// `factor · dt² · |yᵣ'''|` plus the rounding floor `4 ε |yᵣ| / dt`.
    pub fn bound(&self, factor: f64, dt: f64) -> f64 {
        factor * dt * dt * self.third_derivative + 4.0 * f64::EPSILON * self.signal_max / dt
    }
}

/// Residual of `ẏᵣ = Φ0 + Φ1 θ` along sampled `(y, χ, u)` with known `θ`.
pub fn regression_residual(
    regression: &dyn LinearRegression,
    theta: &DVector<f64>,
    ys: &[DVector<f64>],
    chis: &[DVector<f64>],
    inputs: &[DVector<f64>],
    dt: f64,
) -> RegressionResidual {
    let yr: Vec<DVector<f64>> = ys.iter().map(|y| regression.regressand(y)).collect();
    let n = yr.len();
    let mut max_residual: f64 = 0.0;
    for k in 1..n.saturating_sub(1) {
        let dy = (&yr[k + 1] - &yr[k - 1]) / (2.0 * dt);
        let model = regression.phi0(&chis[k], &ys[k], &inputs[k])
            + regression.phi1(&chis[k], &ys[k], &inputs[k]) * theta;
        max_residual = max_residual.max((dy - model).amax());
    }
    let mut third: f64 = 0.0;
    for k in 2..n.saturating_sub(2) {
        let d3 = (&yr[k + 2] - &yr[k + 1] * 2.0 + &yr[k - 1] * 2.0 - &yr[k - 2]) / (2.0 * dt.powi(3));
        third = third.max(d3.amax());
    }
    RegressionResidual {
        max_residual,
        third_derivative: third,
        signal_max: yr.iter().map(|v| v.amax()).fold(0.0, f64::max),
    }
}

/// `max_k |Y − Sᵀ η|` for a static regression with known `η`.
pub fn static_regression_residual(
    regression: &dyn StaticRegression,
    eta: &DVector<f64>,
    ys: &[DVector<f64>],
    chis: &[DVector<f64>],
) -> f64 {
    ys.iter()
        .zip(chis)
        .map(|(y, chi)| {
            let (target, st) = regression.eval(chi, y);
            (target - st * eta).amax()
        })
        .fold(0.0, f64::max)
}
