use nalgebra::{DMatrix, DVector};

use super::FrameworkError;
use crate::linalg::sym_eigen;

/// Gradient estimator `θ̂̇ = Γ Φᵀ (ϑ − Φ θ̂)` for a linear regression `ϑ = Φ θ`.
///
/// Each step integrates the flow exactly with `(ϑ, Φ)` frozen over the step,
/// in the coordinates `ξ = Γ^{-1/2} θ̂` where the flow matrix is symmetric.
/// This is unconditionally stable, so large adaptation gains do not impose a
/// step-size limit, and `θ̂ − θ` contracts in the `Γ⁻¹` norm whenever the
/// regression is exact.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimator {
    gamma: DMatrix<f64>,
    gamma_sqrt: DMatrix<f64>,
    theta_hat: DVector<f64>,
}

impl GradientEstimator {
    pub fn new(gamma: DMatrix<f64>, theta0: DVector<f64>) -> Result<Self, FrameworkError> {
        let n = gamma.nrows();
        if gamma.ncols() != n || theta0.len() != n {
            return Err(FrameworkError::Dimension(format!(
                "gain is {}x{}, initial estimate has {} entries",
                gamma.nrows(),
                gamma.ncols(),
                theta0.len()
            )));
        }
        let asym = (&gamma - gamma.transpose()).amax();
        if asym > 1e-12 * gamma.amax().max(1.0) {
            return Err(FrameworkError::InvalidGain("adaptation gain is not symmetric".into()));
        }
        let (eig, vecs) = sym_eigen(&gamma);
        if eig.iter().any(|&l| !(l > 0.0)) {
            return Err(FrameworkError::InvalidGain(format!(
                "adaptation gain must be positive definite, eigenvalues {:?}",
                eig.as_slice()
            )));
        }
        let sqrt = DMatrix::from_diagonal(&eig.map(f64::sqrt));
        let gamma_sqrt = &vecs * sqrt * vecs.transpose();
        Ok(Self {
            gamma,
            gamma_sqrt,
            theta_hat: theta0,
        })
    }

    /// `Γ = γ I`.
    pub fn scalar(gamma: f64, theta0: DVector<f64>) -> Result<Self, FrameworkError> {
        let n = theta0.len();
        Self::new(DMatrix::identity(n, n) * gamma, theta0)
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn theta_hat(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn with_theta(&self, theta: DVector<f64>) -> Self {
        Self {
            theta_hat: theta,
            ..self.clone()
        }
    }

    /// Advances `theta` over `dt` along the gradient flow for `target = regressor·θ`.
    pub fn advance(
        &self,
        theta: &DVector<f64>,
        target: &DVector<f64>,
        regressor: &DMatrix<f64>,
        dt: f64,
    ) -> Result<DVector<f64>, FrameworkError> {
        let n = self.dim();
        if theta.len() != n || regressor.ncols() != n || regressor.nrows() != target.len() {
            return Err(FrameworkError::Dimension(format!(
                "regressor {}x{}, target {}, parameter {}",
                regressor.nrows(),
                regressor.ncols(),
                target.len(),
                n
            )));
        }
        let g = &self.gamma_sqrt;
        let gp = g * regressor.transpose();
        let flow = &gp * gp.transpose();
        let drive = &gp * target;
        let (lambda, q) = sym_eigen(&flow);
        let xi = g.clone().lu().solve(theta).ok_or(FrameworkError::EstimatorDiverged)?;
        let w = q.transpose() * xi;
        let c = q.transpose() * drive;
        let mut w_next = DVector::zeros(n);
        for i in 0..n {
            let l = lambda[i].max(0.0);
            let ldt = l * dt;
            let (decay, gain) = if ldt > 1e-300 {
                ((-ldt).exp(), -(-ldt).exp_m1() / l)
            } else {
                (1.0, dt)
            };
            w_next[i] = decay * w[i] + gain * c[i];
        }
        let next = g * (q * w_next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(FrameworkError::EstimatorDiverged);
        }
        Ok(next)
    }

    /// One step for the filtered regression `ϑ = Φ̄1 θ`.
    pub fn gradient_step(
        &self,
        vartheta: &DVector<f64>,
        phi1_bar: &DMatrix<f64>,
        dt: f64,
    ) -> Result<Self, FrameworkError> {
        let theta = self.advance(&self.theta_hat, vartheta, phi1_bar, dt)?;
        Ok(self.with_theta(theta))
    }

    /// One step for the static regression `Y = Sᵀ η`; `s` holds the regressor
    /// vectors as columns.
    pub fn static_gradient_step(
        &self,
        y: &DVector<f64>,
        s: &DMatrix<f64>,
        dt: f64,
    ) -> Result<Self, FrameworkError> {
        let theta = self.advance(&self.theta_hat, y, &s.transpose(), dt)?;
        Ok(self.with_theta(theta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_indefinite_or_asymmetric_gain() {
        let z = DVector::zeros(2);
        assert!(GradientEstimator::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), z.clone()).is_err());
        assert!(GradientEstimator::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]), z.clone()).is_err());
        assert!(GradientEstimator::new(DMatrix::identity(3, 3), z).is_err());
    }

    #[test]
    fn zero_residual_means_no_update() {
        let est = GradientEstimator::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
            DVector::from_vec(vec![0.7, -0.2]),
        )
        .unwrap();
        let phi = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 3.0]);
        let target = &phi * est.theta_hat();
        let next = est.gradient_step(&target, &phi, 0.1).unwrap();
        assert!((next.theta_hat() - est.theta_hat()).norm() < 1e-14);
    }

    #[test]
    fn scalar_flow_matches_closed_form() {
        // θ̂(t) − θ = (θ̂(0) − θ) e^{−γt}
        let gamma = 3.0;
        let theta = 2.0;
        let mut est = GradientEstimator::scalar(gamma, DVector::from_element(1, -1.0)).unwrap();
        let phi = DMatrix::from_element(1, 1, 1.0);
        let target = DVector::from_element(1, theta);
        let dt = 1e-3;
        for k in 1..=2000 {
            est = est.gradient_step(&target, &phi, dt).unwrap();
            let t = k as f64 * dt;
            let expected = theta + (-1.0 - theta) * (-gamma * t).exp();
            assert!((est.theta_hat()[0] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_regressor_holds_estimate() {
        let est = GradientEstimator::scalar(10.0, DVector::from_vec(vec![1.0, 2.0])).unwrap();
        let next = est
            .gradient_step(&DVector::zeros(2), &DMatrix::zeros(2, 2), 0.5)
            .unwrap();
        assert_eq!(next.theta_hat(), est.theta_hat());
    }

    #[test]
    fn static_step_converges_at_predicted_rate() {
        // constant S with S Sᵀ > 0: error decays as exp(−Γ S Sᵀ t)
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 2.0]);
        let eta = DVector::from_vec(vec![0.3, -0.4]);
        let y = s.transpose() * &eta;
        let gamma = 0.7;
        let mut est = GradientEstimator::scalar(gamma, DVector::zeros(2)).unwrap();
        let t = 1.5;
        for _ in 0..150 {
            est = est.static_gradient_step(&y, &s, 0.01).unwrap();
        }
        let a = &s * s.transpose() * (-gamma * t);
        let expected = &eta + a.exp() * (DVector::zeros(2) - &eta);
        assert!((est.theta_hat() - expected).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn exact_regression_never_increases_error(
            p in proptest::collection::vec(-5.0f64..5.0, 4),
            theta in proptest::collection::vec(-3.0f64..3.0, 2),
            theta0 in proptest::collection::vec(-3.0f64..3.0, 2),
            gamma in 0.01f64..1e4,
            dt in 1e-5f64..1.0,
        ) {
            let phi = DMatrix::from_row_slice(2, 2, &p);
            let theta = DVector::from_vec(theta);
            let est = GradientEstimator::scalar(gamma, DVector::from_vec(theta0)).unwrap();
            let before = (est.theta_hat() - &theta).norm();
            let next = est.gradient_step(&(&phi * &theta), &phi, dt).unwrap();
            let after = (next.theta_hat() - &theta).norm();
            prop_assert!(after <= before + 1e-12 * (1.0 + before));
        }
    }
}
