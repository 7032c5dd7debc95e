//! Ćuk DC–DC converter: averaged model, the two measurement cascades, the
//! I&I comparison observer, the certainty-equivalent controller and the
//! set-point tracking scenario.
//!
//! Plant state is `(i1, v2, i3, v4)`, input is the duty cycle `u`.

mod iandi;
mod scenario;

pub use iandi::{duty_cycle, iandi_controller, CukController, EstimateSource, IandIObserver};
pub use scenario::{ScenarioError, 
    reference_schedule, run_cuk_scenario, CukObserverKind, CukRun, CukScenario, SegmentMetric,
};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::framework::{Cascade, Dims, FrameworkError, LinearRegression};
use crate::sim::VectorField;

/// Duty-cycle limits applied by the plant and the controller.
pub const U_MIN: f64 = 0.02;
pub const U_MAX: f64 = 0.98;

pub fn clamp_duty(u: f64) -> f64 {
    u.clamp(U_MIN, U_MAX)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CukParams {
    pub l1: f64,
    pub c2: f64,
    pub l3: f64,
    pub c4: f64,
    pub e: f64,
    pub g: f64,
}

impl Default for CukParams {
    fn default() -> Self {
        Self {
            l1: 10e-3,
            c2: 22.0e-6,
            l3: 10e-3,
            c4: 22.9e-6,
            e: 12.0,
            g: 0.0447,
        }
    }
}

impl CukParams {
    pub fn validate(&self) -> Result<(), FrameworkError> {
        let all = [self.l1, self.c2, self.l3, self.c4, self.e, self.g];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(FrameworkError::InvalidArgument(format!(
                "converter parameters must be positive: {self:?}"
            )))
        }
    }

    /// Equilibrium `(i1, v2, i3, v4)` for a constant duty cycle.
    pub fn equilibrium(&self, u: f64) -> DVector<f64> {
        let (e, g) = (self.e, self.g);
        let r = 1.0 - u;
        DVector::from_vec(vec![
            g * u * u * e / (r * r),
            e / r,
            -g * u * e / r,
            -u * e / r,
        ])
    }

    /// `G·L3/C4`, the gain of the Case II coordinate shift.
    pub fn shift_gain(&self) -> f64 {
        self.g * self.l3 / self.c4
    }
}

/// Averaged converter dynamics.
#[derive(Clone, Copy, Debug)]
pub struct CukPlant {
    pub params: CukParams,
}

impl CukPlant {
    pub fn derivative(&self, s: &DVector<f64>, u: f64) -> DVector<f64> {
        let p = &self.params;
        let u = clamp_duty(u);
        let (i1, v2, i3, v4) = (s[0], s[1], s[2], s[3]);
        DVector::from_vec(vec![
            (-(1.0 - u) * v2 + p.e) / p.l1,
            ((1.0 - u) * i1 + u * i3) / p.c2,
            (-u * v2 - v4) / p.l3,
            (i3 - p.g * v4) / p.c4,
        ])
    }
}

/// The averaged model as a vector field over `(i1, v2, i3, v4)`.
pub fn cuk_field(p: CukParams) -> Arc<dyn VectorField> {
    Arc::new(CukPlant { params: p })
}

impl VectorField for CukPlant {
    fn dim(&self) -> usize {
        4
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn eval(&self, _t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.derivative(x, u[0])
    }

    fn labels(&self) -> Vec<String> {
        ["i1", "v2", "i3", "v4"].map(String::from).to_vec()
    }
}

/// Measurement configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CukCase {
    /// `y = (v2, v4)`, `x = (i1, i3)`.
    I,
    /// `y = (v2, i3)`, `x = (i1, v4)`.
    II,
}

impl CukCase {
    pub fn cascade(self, p: CukParams) -> Arc<CukCascade> {
        Arc::new(CukCascade { params: p, case: self })
    }
}

/// Cascade form and linear regression for either measurement case.
///
/// Case I uses `φ(x, y) = x`. Case II uses `φ(x, y) = x − (0, G·L3·y2/C4)`,
/// which removes the `v4` dependence from `ż`.
#[derive(Clone, Copy, Debug)]
pub struct CukCascade {
    pub params: CukParams,
    pub case: CukCase,
}

pub fn case1_cascade(p: CukParams) -> Arc<CukCascade> {
    CukCase::I.cascade(p)
}

pub fn case2_cascade(p: CukParams) -> Arc<CukCascade> {
    CukCase::II.cascade(p)
}

impl CukCascade {
    /// Full plant state from `(x, y)` in this case's coordinates.
    pub fn plant_state(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        match self.case {
            CukCase::I => DVector::from_vec(vec![x[0], y[0], x[1], y[1]]),
            CukCase::II => DVector::from_vec(vec![x[0], y[0], y[1], x[1]]),
        }
    }

    fn shift(&self, y: &DVector<f64>) -> DVector<f64> {
        match self.case {
            CukCase::I => DVector::zeros(2),
            CukCase::II => DVector::from_vec(vec![0.0, self.params.shift_gain() * y[1]]),
        }
    }
}

impl Cascade for CukCascade {
    fn dims(&self) -> Dims {
        Dims {
            nx: 2,
            ny: 2,
            nz: 2,
            m: 1,
        }
    }

    fn plant(&self) -> Arc<dyn VectorField> {
        cuk_field(self.params)
    }

    fn split(&self, s: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        match self.case {
            CukCase::I => (
                DVector::from_vec(vec![s[0], s[2]]),
                DVector::from_vec(vec![s[1], s[3]]),
            ),
            CukCase::II => (
                DVector::from_vec(vec![s[0], s[3]]),
                DVector::from_vec(vec![s[1], s[2]]),
            ),
        }
    }

    fn phi(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        x - self.shift(y)
    }

    fn phi_left(&self, z: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>, FrameworkError> {
        Ok(z + self.shift(y))
    }

    fn h(&self, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let p = &self.params;
        let u = clamp_duty(u[0]);
        let first = (-(1.0 - u) * y[0] + p.e) / p.l1;
        let second = match self.case {
            CukCase::I => (-u * y[0] - y[1]) / p.l3,
            CukCase::II => (y[1] + p.g * u * y[0]) / p.c4,
        };
        DVector::from_vec(vec![first, second])
    }

    fn x_labels(&self) -> Vec<String> {
        match self.case {
            CukCase::I => vec!["i1".into(), "i3".into()],
            CukCase::II => vec!["i1".into(), "v4".into()],
        }
    }

    fn y_labels(&self) -> Vec<String> {
        match self.case {
            CukCase::I => vec!["v2".into(), "v4".into()],
            CukCase::II => vec!["v2".into(), "i3".into()],
        }
    }
}

impl LinearRegression for CukCascade {
    fn rows(&self) -> usize {
        2
    }

    fn nz(&self) -> usize {
        2
    }

    fn phi0(&self, chi: &DVector<f64>, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let p = &self.params;
        let u = clamp_duty(u[0]);
        match self.case {
            CukCase::I => DVector::from_vec(vec![
                ((1.0 - u) * chi[0] + u * chi[1]) / p.c2,
                chi[1] / p.c4 - p.g * y[1] / p.c4,
            ]),
            // di3/dt = (−u v2 − v4)/L3 with v4 = χ2 + θ2 + G·L3·i3/C4
            CukCase::II => DVector::from_vec(vec![
                ((1.0 - u) * chi[0] + u * y[1]) / p.c2,
                -u * y[0] / p.l3 - chi[1] / p.l3 - p.g * y[1] / p.c4,
            ]),
        }
    }

    fn phi1(&self, _chi: &DVector<f64>, _y: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        let p = &self.params;
        let u = clamp_duty(u[0]);
        match self.case {
            CukCase::I => DMatrix::from_row_slice(
                2,
                2,
                &[(1.0 - u) / p.c2, u / p.c2, 0.0, 1.0 / p.c4],
            ),
            CukCase::II => DMatrix::from_row_slice(2, 2, &[(1.0 - u) / p.c2, 0.0, 0.0, -1.0 / p.l3]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::checks::{left_inverse_error, regression_residual, transformability_residual};
    use crate::sim::{integrate, InputSchedule};

    fn u_const(u: f64) -> DVector<f64> {
        DVector::from_element(1, u)
    }

    #[test]
    fn equilibrium_is_stationary() {
        let p = CukParams::default();
        let u = 25.0 / 37.0;
        let eq = p.equilibrium(u);
        let d = CukPlant { params: p }.derivative(&eq, u);
        assert!(d.amax() < 1e-9, "{d}");
        // v4* = −25 V for the 25 V set point
        assert!((eq[3] + 25.0).abs() < 1e-12);
    }

    #[test]
    fn sourceless_origin_is_equilibrium() {
        let p = CukParams {
            e: 0.0,
            ..CukParams::default()
        };
        let d = CukPlant { params: p }.derivative(&DVector::zeros(4), 0.4);
        assert_eq!(d, DVector::zeros(4));
    }

    #[test]
    fn equilibrium_holds_under_integration() {
        let p = CukParams::default();
        let u = 25.0 / 37.0;
        let eq = p.equilibrium(u);
        let tr = integrate(cuk_field(p), &eq, &InputSchedule::constant(u_const(u), 0.1), 1e-5, 0.1).unwrap();
        for k in (0..tr.len()).step_by(100) {
            let row = DVector::from_row_slice(tr.row(k));
            assert!((row - &eq).amax() < 1e-6);
        }
    }

    #[test]
    fn case1_regression_matrix() {
        let p = CukParams::default();
        let c = case1_cascade(p);
        let u = 0.3;
        let phi1 = c.phi1(&DVector::zeros(2), &DVector::zeros(2), &u_const(u));
        let expected = DMatrix::from_row_slice(2, 2, &[0.7 / p.c2, 0.3 / p.c2, 0.0, 1.0 / p.c4]);
        assert!((phi1 - expected).amax() < 1e-9);
    }

    #[test]
    fn case2_regression_matrix_is_diagonal() {
        let p = CukParams::default();
        let c = case2_cascade(p);
        for u in [0.1, 0.5, 0.9] {
            let phi1 = c.phi1(&DVector::zeros(2), &DVector::zeros(2), &u_const(u));
            assert_eq!(phi1[(0, 1)], 0.0);
            assert_eq!(phi1[(1, 0)], 0.0);
            assert_eq!(phi1[(1, 1)], -1.0 / p.l3);
        }
    }

    #[test]
    fn case2_theta_for_reference_initial_conditions() {
        let p = CukParams::default();
        let c = case2_cascade(p);
        let x0 = DVector::from_vec(vec![0.5, -1.0]);
        let y0 = DVector::from_vec(vec![10.0, -12.0]);
        let theta = c.phi(&x0, &y0);
        let expected = DVector::from_vec(vec![0.5, 12.0 * p.g * p.l3 / p.c4 - 1.0]);
        assert!((theta - expected).amax() < 1e-12);
    }

    #[test]
    fn case1_theta_is_initial_current() {
        let c = case1_cascade(CukParams::default());
        let x0 = DVector::from_vec(vec![0.5, -1.0]);
        assert_eq!(c.phi(&x0, &DVector::from_vec(vec![10.0, -12.0])), x0);
    }

    #[test]
    fn left_inverse_is_exact() {
        for case in [CukCase::I, CukCase::II] {
            let c = case.cascade(CukParams::default());
            for k in 0..50 {
                let a = k as f64 * 0.37;
                let x = DVector::from_vec(vec![a.sin() * 3.0, a.cos() * 20.0]);
                let y = DVector::from_vec(vec![a * 2.0 - 10.0, (2.0 * a).sin() * 5.0]);
                assert!(left_inverse_error(c.as_ref(), &x, &y).unwrap() <= 1e-12);
            }
        }
    }

    fn open_loop(case: CukCase, u: f64, horizon: f64) -> (Vec<DVector<f64>>, Vec<DVector<f64>>, Arc<CukCascade>) {
        let p = CukParams::default();
        let c = case.cascade(p);
        let s0 = c.plant_state(&DVector::from_vec(vec![0.5, -1.0]), &DVector::from_vec(vec![10.0, -12.0]));
        let tr = integrate(cuk_field(p), &s0, &InputSchedule::constant(u_const(u), horizon), 1e-5, horizon).unwrap();
        let states: Vec<_> = (0..tr.len()).map(|k| DVector::from_row_slice(tr.row(k))).collect();
        let inputs = vec![u_const(u); states.len()];
        (states, inputs, c)
    }

    #[test]
    fn cascade_form_holds_along_trajectories() {
        for case in [CukCase::I, CukCase::II] {
            let (states, inputs, c) = open_loop(case, 0.5, 0.02);
            let r = transformability_residual(c.as_ref(), &states, &inputs, 1e-5);
            assert!(r < 1e-3, "{case:?}: {r}");
        }
    }

    #[test]
    fn z_derivative_along_field_is_h() {
        // z is linear in the state, so a symmetric difference along f is exact up to rounding
        let p = CukParams::default();
        let f = CukPlant { params: p };
        for case in [CukCase::I, CukCase::II] {
            let c = case.cascade(p);
            for k in 0..40 {
                let a = k as f64 * 0.61;
                let s = DVector::from_vec(vec![a.sin() * 4.0, 15.0 + a.cos() * 10.0, -(a * 0.7).cos() * 3.0, -10.0 + a.sin()]);
                let u = 0.05 + 0.9 * (0.5 + 0.5 * (1.3 * a).sin());
                let fx = f.derivative(&s, u);
                let d = 1e-6;
                let dz = (c.z_of(&(&s + &fx * d)) - c.z_of(&(&s - &fx * d))) / (2.0 * d);
                let (_, y) = c.split(&s);
                let h = c.h(&y, &u_const(u));
                assert!((&dz - &h).norm() <= 1e-6 * (1.0 + h.norm()), "{case:?}: {dz} vs {h}");
            }
        }
    }

    #[test]
    fn regression_is_exact_with_true_theta() {
        for case in [CukCase::I, CukCase::II] {
            let (states, inputs, c) = open_loop(case, 25.0 / 37.0, 0.02);
            // χ(t) = z(t) − z(0) is the exact extension started at χ(0) = 0
            let theta = c.z_of(&states[0]);
            let chis: Vec<_> = states.iter().map(|s| c.z_of(s) - &theta).collect();
            let ys: Vec<_> = states.iter().map(|s| c.split(s).1).collect();
            let res = regression_residual(c.as_ref(), &theta, &ys, &chis, &inputs, 1e-5);
            assert!(res.within(10.0, 1e-5), "{case:?}: {res:?}");
        }
    }
}
