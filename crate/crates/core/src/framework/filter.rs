use nalgebra::{DMatrix, DVector};

use super::FrameworkError;
use crate::linalg::{mat_of, vec_of};
use crate::sim::VectorField;

/// Initial condition of the regression filters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FilterInit {
    /// All filter states start at zero. The mismatch produces the decaying
    /// term `ε = α e^{-αt} yᵣ(0)` in `ϑ = Φ̄1 θ + ε`.
    #[default]
    Zero,
    /// `ȳ(0) = yᵣ(0)` with `Φ̄0(0) = 0`, `Φ̄1(0) = 0`, which makes `ε ≡ 0`.
    TransientFree,
}

/// First-order filters `α/(p + α)` applied to `yᵣ`, `Φ0` and `Φ1`.
///
/// State layout: `[ȳ (r) | Φ̄0 (r) | vec Φ̄1 (r·nz, column-major)]`.
/// The filtered regressand `ϑ = α(yᵣ − ȳ) − Φ̄0` realises
/// `αp/(p+α) yᵣ − α/(p+α) Φ0` without differentiating `yᵣ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilteredRegression {
    alpha: f64,
    rows: usize,
    nz: usize,
}

impl FilteredRegression {
    pub fn new(alpha: f64, rows: usize, nz: usize) -> Result<Self, FrameworkError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(FrameworkError::InvalidGain(format!(
                "filter pole must be positive, got {alpha}"
            )));
        }
        Ok(Self { alpha, rows, nz })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn state_dim(&self) -> usize {
        self.rows * (2 + self.nz)
    }

    pub fn initial_state(&self, init: FilterInit, y_r0: &DVector<f64>) -> DVector<f64> {
        let mut s = DVector::zeros(self.state_dim());
        if init == FilterInit::TransientFree {
            s.rows_mut(0, self.rows).copy_from(y_r0);
        }
        s
    }

    pub fn derivative(
        &self,
        state: &DVector<f64>,
        y_r: &DVector<f64>,
        phi0: &DVector<f64>,
        phi1: &DMatrix<f64>,
    ) -> DVector<f64> {
        let r = self.rows;
        let mut d = DVector::zeros(self.state_dim());
        for i in 0..r {
            d[i] = self.alpha * (y_r[i] - state[i]);
            d[r + i] = self.alpha * (phi0[i] - state[r + i]);
        }
        for (j, v) in phi1.iter().enumerate() {
            d[2 * r + j] = self.alpha * (v - state[2 * r + j]);
        }
        d
    }

    /// `(ϑ, Φ̄1)` from the filter state and the current regressand.
    pub fn readout(&self, state: &DVector<f64>, y_r: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let r = self.rows;
        let y_bar = state.rows(0, r);
        let phi0_bar = state.rows(r, r);
        let vartheta = (y_r - y_bar) * self.alpha - phi0_bar;
        let phi1_bar = mat_of(&state.as_slice()[2 * r..], r, self.nz);
        (vartheta, phi1_bar)
    }
}

/// One exact zero-order-hold step of the regression filters.
///
/// Inputs are held over `[t, t + dt)`; returns the new filter state together
/// with `(ϑ, Φ̄1)` evaluated after the step against `y_r_next`.
pub fn filter_regression(
    filter: &FilteredRegression,
    state: &DVector<f64>,
    y_r: &DVector<f64>,
    phi0: &DVector<f64>,
    phi1: &DMatrix<f64>,
    y_r_next: &DVector<f64>,
    dt: f64,
) -> (DVector<f64>, DVector<f64>, DMatrix<f64>) {
    let decay = (-filter.alpha * dt).exp();
    let mut target = DVector::zeros(filter.state_dim());
    let r = filter.rows;
    target.rows_mut(0, r).copy_from(y_r);
    target.rows_mut(r, r).copy_from(phi0);
    target.rows_mut(2 * r, r * filter.nz).copy_from(&vec_of(phi1));
    let next = state * decay + target * (1.0 - decay);
    let (vartheta, phi1_bar) = filter.readout(&next, y_r_next);
    (next, vartheta, phi1_bar)
}

/// The regression filters as a standalone block. Input is
/// `col(yᵣ, Φ0, vec Φ1)`.
pub struct RegressionFilterField {
    pub filter: FilteredRegression,
}

impl VectorField for RegressionFilterField {
    fn dim(&self) -> usize {
        self.filter.state_dim()
    }

    fn input_dim(&self) -> usize {
        self.filter.state_dim()
    }

    fn eval(&self, _t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let r = self.filter.rows;
        let y_r = u.rows(0, r).into_owned();
        let phi0 = u.rows(r, r).into_owned();
        let phi1 = mat_of(&u.as_slice()[2 * r..], r, self.filter.nz);
        self.filter.derivative(x, &y_r, &phi0, &phi1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_pole() {
        assert!(FilteredRegression::new(0.0, 1, 1).is_err());
        assert!(FilteredRegression::new(-1.0, 1, 1).is_err());
    }

    #[test]
    fn constant_signals_reach_unit_gain() {
        // constant y, Φ0 = 0, Φ1 = I: ϑ → 0 and Φ̄1 → I
        let f = FilteredRegression::new(2.0, 2, 2).unwrap();
        let y = DVector::from_vec(vec![3.0, -1.0]);
        let phi0 = DVector::zeros(2);
        let phi1 = DMatrix::identity(2, 2);
        let mut s = f.initial_state(FilterInit::Zero, &y);
        let (mut vt, mut p1) = f.readout(&s, &y);
        for _ in 0..2000 {
            let (n, v, p) = filter_regression(&f, &s, &y, &phi0, &phi1, &y, 0.01);
            s = n;
            vt = v;
            p1 = p;
        }
        // 20 s = 40 time constants
        assert!(vt.norm() < 1e-12);
        assert!((p1 - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn zero_init_transient_is_alpha_times_initial_output() {
        // y = const, Φ0 = 0, Φ1 = 0: ϑ(t) = α y e^{-αt}
        let alpha = 0.5;
        let f = FilteredRegression::new(alpha, 1, 1).unwrap();
        let y = DVector::from_element(1, 10.0);
        let zero = DVector::zeros(1);
        let phi1 = DMatrix::zeros(1, 1);
        let mut s = f.initial_state(FilterInit::Zero, &y);
        let dt = 0.01;
        for k in 1..=100 {
            let (n, v, _) = filter_regression(&f, &s, &y, &zero, &phi1, &y, dt);
            s = n;
            let t = k as f64 * dt;
            assert!((v[0] - alpha * 10.0 * (-alpha * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn transient_free_init_has_no_epsilon() {
        let f = FilteredRegression::new(1.0, 2, 2).unwrap();
        let y = DVector::from_vec(vec![10.0, -12.0]);
        let s = f.initial_state(FilterInit::TransientFree, &y);
        let (v, p) = f.readout(&s, &y);
        assert_eq!(v, DVector::zeros(2));
        assert_eq!(p, DMatrix::zeros(2, 2));
    }
}
