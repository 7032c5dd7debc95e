use std::sync::Arc;

use nalgebra::DVector;

use super::{clamp_duty, CukCase, CukParams};
use crate::framework::{Cascade, FrameworkError};
use crate::sim::{HeldLaw, VectorField};

/// Immersion-and-invariance observer for Case II measurements `y = (v2, i3)`,
/// with `E` and `G` known.
///
/// `x̂ = (ζ1 + C2 γ1 y1, ζ2 − L3 γ2 y2)`. The error dynamics are
/// `ė1 = −γ1 (1 − u) e1` and `ė2 = −(G/C4 + γ2) e2`, so the manifold
/// `x̂ = x` is invariant and attractive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IandIObserver {
    pub params: CukParams,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl IandIObserver {
    pub fn new(params: CukParams, gamma1: f64, gamma2: f64) -> Result<Self, FrameworkError> {
        if !(gamma1 > 0.0 && gamma2 > 0.0) {
            return Err(FrameworkError::InvalidGain(format!(
                "I&I gains must be positive, got {gamma1}, {gamma2}"
            )));
        }
        Ok(Self {
            params,
            gamma1,
            gamma2,
        })
    }

    fn injection(&self, y: &DVector<f64>) -> DVector<f64> {
        let p = &self.params;
        DVector::from_vec(vec![
            p.c2 * self.gamma1 * y[0],
            -p.l3 * self.gamma2 * y[1],
        ])
    }

    /// `x̂ = (i1, v4)` estimate from `ζ` and `y`.
    pub fn estimate(&self, zeta: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        zeta + self.injection(y)
    }

    /// The `ζ` that makes `x̂ = x`.
    pub fn matched_zeta(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        x - self.injection(y)
    }
}

impl VectorField for IandIObserver {
    fn dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        3
    }

    fn eval(&self, _t: f64, zeta: &DVector<f64>, input: &DVector<f64>) -> DVector<f64> {
        let p = &self.params;
        let (y1, y2, u) = (input[0], input[1], clamp_duty(input[2]));
        let (g1, g2) = (self.gamma1, self.gamma2);
        let x1 = zeta[0] + p.c2 * g1 * y1;
        let x2 = zeta[1] - p.l3 * g2 * y2;
        DVector::from_vec(vec![
            (-(1.0 - u) * y1 + p.e) / p.l1 - g1 * ((1.0 - u) * x1 + u * y2),
            (y2 - p.g * x2) / p.c4 - g2 * (u * y1 + x2),
        ])
    }

    fn labels(&self) -> Vec<String> {
        vec!["zeta1".into(), "zeta2".into()]
    }
}

/// Duty cycle of the certainty-equivalent I&I controller, before clamping.
///
/// `u = |Vd|/(|Vd|+E) + λ s/(1+s²)` with `s = G|Vd| v2 + E(i3 − i1)` and
/// `λ = λ0 min(|Vd|/(|Vd|+E), E/(|Vd|+E))`.
pub fn duty_cycle(p: &CukParams, vd: f64, lambda0: f64, v2: f64, i1: f64, i3: f64) -> f64 {
    let vd = vd.abs();
    let feedforward = vd / (vd + p.e);
    let lambda = lambda0 * feedforward.min(p.e / (vd + p.e));
    let s = p.g * vd * v2 + p.e * (i3 - i1);
    feedforward + lambda * s / (1.0 + s * s)
}

/// [`duty_cycle`] clamped to `[U_MIN, U_MAX]`.
pub fn iandi_controller(p: &CukParams, vd: f64, lambda0: f64, v2: f64, i1: f64, i3: f64) -> f64 {
    clamp_duty(duty_cycle(p, vd, lambda0, v2, i1, i3))
}

/// How the controller turns the observer block output into `x̂`.
#[derive(Clone)]
pub enum EstimateSource {
    /// Observer output is `ẑ = χ + θ̂`; `x̂ = φᴸ(ẑ, y)`.
    Pebo(Arc<dyn Cascade>),
    /// Observer output is `ζ`.
    IandI(IandIObserver),
}

impl EstimateSource {
    pub fn estimate(&self, observer_output: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>, FrameworkError> {
        match self {
            EstimateSource::Pebo(c) => c.phi_left(observer_output, y),
            EstimateSource::IandI(o) => Ok(o.estimate(observer_output, y)),
        }
    }
}

/// The controller as a held law reading the plant measurement and the
/// observer output; the external input is the set point `|Vd|`.
#[derive(Clone)]
pub struct CukController {
    pub params: CukParams,
    pub lambda0: f64,
    pub case: CukCase,
    pub source: EstimateSource,
    pub plant: usize,
    pub observer: usize,
}

impl HeldLaw for CukController {
    fn dim(&self) -> usize {
        1
    }

    fn labels(&self) -> Vec<String> {
        vec!["u".into()]
    }

    fn eval(&self, _t: f64, outputs: &[DVector<f64>], external: &DVector<f64>) -> DVector<f64> {
        let y = &outputs[self.plant];
        let u = match self.source.estimate(&outputs[self.observer], y) {
            Ok(x_hat) => {
                let (i1, i3) = match self.case {
                    CukCase::I => (x_hat[0], x_hat[1]),
                    CukCase::II => (x_hat[0], y[1]),
                };
                iandi_controller(&self.params, external[0], self.lambda0, y[0], i1, i3)
            }
            Err(_) => f64::NAN,
        };
        DVector::from_element(1, u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_correction_gives_feedforward() {
        let p = CukParams::default();
        // s = 0 when E(i3 − i1) = −G|Vd| v2
        let (vd, v2, i1) = (25.0, 2.0, 1.0);
        let i3 = i1 - p.g * vd * v2 / p.e;
        let u = duty_cycle(&p, vd, 1.0, v2, i1, i3);
        assert!((u - 25.0 / 37.0).abs() < 1e-12);
    }

    #[test]
    fn feedforward_for_reference_set_point() {
        let p = CukParams::default();
        let eq = p.equilibrium(25.0 / 37.0);
        let u = duty_cycle(&p, 25.0, 1.0, eq[1], eq[0], eq[2]);
        assert!((u - 0.675_675_675_675_675_7).abs() < 1e-9);
    }

    #[test]
    fn correction_is_bounded_by_half_lambda() {
        let p = CukParams::default();
        for vd in [5.0, 15.0, 25.0, 30.0] {
            let ff = vd / (vd + p.e);
            let lambda = 1.5 * ff.min(p.e / (vd + p.e));
            for k in -200..200 {
                let v2 = k as f64 * 0.37;
                let u = duty_cycle(&p, vd, 1.5, v2, 0.3 * k as f64, -0.1);
                assert!((u - ff).abs() <= lambda / 2.0 + 1e-15);
            }
        }
    }

    #[test]
    fn matched_initialisation_stays_on_manifold() {
        // the observer error obeys ė = diag(−γ1(1−u), −(G/C4+γ2)) e regardless of the plant motion
        let p = CukParams::default();
        let obs = IandIObserver::new(p, 25.0, 1.0).unwrap();
        let x = DVector::from_vec(vec![0.7, -3.0]);
        let y = DVector::from_vec(vec![11.0, -0.4]);
        let u = 0.6;
        let zeta = obs.matched_zeta(&x, &y);
        let dz = obs.eval(0.0, &zeta, &DVector::from_vec(vec![y[0], y[1], u]));
        // d/dt x̂ = ζ̇ + (C2 γ1 ẏ1, −L3 γ2 ẏ2) must equal ẋ at the true state
        let plant = super::super::CukPlant { params: p };
        let s = DVector::from_vec(vec![x[0], y[0], y[1], x[1]]);
        let ds = plant.derivative(&s, u);
        let dxhat1 = dz[0] + p.c2 * 25.0 * ds[1];
        let dxhat2 = dz[1] - p.l3 * 1.0 * ds[2];
        assert!((dxhat1 - ds[0]).abs() < 1e-9 * ds[0].abs().max(1.0));
        assert!((dxhat2 - ds[3]).abs() < 1e-9 * ds[3].abs().max(1.0));
    }

    #[test]
    fn rejects_nonpositive_gains() {
        assert!(IandIObserver::new(CukParams::default(), 0.0, 1.0).is_err());
    }
}
