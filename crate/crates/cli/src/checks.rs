//! Built-in invariant suites evaluated by `run` and `check`.

use std::sync::Arc;

use nalgebra::DVector;
use pebo::framework::checks::{left_inverse_error, offset_run, regression_residual};
use pebo::framework::{Cascade, LinearRegression};
use pebo::sim::{integrate, InputSchedule};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::CliError;

/// One pass/fail line of the summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        format!("check {}: {verdict} ({})", self.name, self.detail)
    }
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, bounds: &[(f64, f64)]) -> DVector<f64> {
    DVector::from_iterator(bounds.len(), bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)))
}

/// `φᴸ(φ(x, y), y) = x` on `count` random samples, relative tolerance `1e−12`.
pub fn left_inverse(
    cascade: &dyn Cascade,
    rng: &mut ChaCha8Rng,
    count: usize,
    x_bounds: &[(f64, f64)],
    y_bounds: &[(f64, f64)],
) -> Check {
    let mut worst: f64 = 0.0;
    let mut failure = None;
    for _ in 0..count {
        let x = uniform_vec(rng, x_bounds);
        let y = uniform_vec(rng, y_bounds);
        match left_inverse_error(cascade, &x, &y) {
            Ok(e) => worst = worst.max(e),
            Err(e) => failure = Some(e.to_string()),
        }
    }
    match failure {
        Some(e) => Check::new("left_inverse", false, e),
        None => Check::new(
            "left_inverse",
            worst <= 1e-12,
            format!("{count} samples, max relative error {worst:.3e} <= 1e-12"),
        ),
    }
}

/// Offset drift of `z − χ` from `count` random initial states under an open-loop input.
#[allow(clippy::too_many_arguments)]
pub fn offset_random(
    cascade: Arc<dyn Cascade>,
    rng: &mut ChaCha8Rng,
    count: usize,
    state_bounds: &[(f64, f64)],
    chi_bound: f64,
    input: &InputSchedule,
    dt: f64,
    horizon: f64,
) -> Result<Check, CliError> {
    let nz = cascade.dims().nz;
    let mut worst_ratio: f64 = 0.0;
    let mut pass = true;
    for _ in 0..count {
        let s0 = uniform_vec(rng, state_bounds);
        let chi0 = uniform_vec(rng, &vec![(-chi_bound, chi_bound); nz]);
        let rep = offset_run(cascade.clone(), &s0, &chi0, input, dt, horizon)?;
        pass &= rep.within(1e-6);
        worst_ratio = worst_ratio.max(rep.max_drift / (1.0 + rep.z0_norm));
    }
    Ok(Check::new(
        "offset_invariance_random",
        pass,
        format!("{count} initialisations, max drift/(1+|z0|) {worst_ratio:.3e} <= 1e-6"),
    ))
}

/// Finite-difference regression residual along an open-loop oracle run with
/// the exact `χ(t) = z(t) − z(0)` (so `θ = z(0)`).
pub fn regression_nullity(
    cascade: &dyn Cascade,
    regression: &dyn LinearRegression,
    state0: &DVector<f64>,
    input: &InputSchedule,
    dt: f64,
    horizon: f64,
) -> Result<Check, CliError> {
    let tr = integrate(cascade.plant(), state0, input, dt, horizon)?;
    let states: Vec<DVector<f64>> = (0..tr.len()).map(|k| DVector::from_row_slice(tr.row(k))).collect();
    let theta = cascade.z_of(&states[0]);
    let chis: Vec<_> = states.iter().map(|s| cascade.z_of(s) - &theta).collect();
    let ys: Vec<_> = states.iter().map(|s| cascade.split(s).1).collect();
    let us: Vec<_> = (0..states.len()).map(|k| input.at(tr.time(k))).collect();
    let res = regression_residual(regression, &theta, &ys, &chis, &us, dt);
    Ok(Check::new(
        "regression_nullity",
        res.within(10.0, dt),
        format!(
            "max residual {:.3e} <= 10*dt^2*|y'''| (+rounding) = {:.3e}",
            res.max_residual,
            res.bound(10.0, dt)
        ),
    ))
}
