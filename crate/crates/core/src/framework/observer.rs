use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{
    recover_state, Cascade, FilterInit, FilteredRegression, FrameworkError, GradientEstimator,
    LinearRegression, StaticRegression,
};
use crate::sim::{StepContext, VectorField};

/// Which regression feeds the estimator.
#[derive(Clone)]
pub enum EstimatorPath {
    /// `ẏᵣ = Φ0 + Φ1 θ` filtered into `ϑ = Φ̄1 θ + ε`.
    Filtered {
        regression: Arc<dyn LinearRegression>,
        alpha: f64,
        init: FilterInit,
    },
    /// `Y = Sᵀ η` used directly.
    Static { regression: Arc<dyn StaticRegression> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub gamma: DMatrix<f64>,
    /// Initial parameter estimate; zero when absent.
    pub initial: Option<DVector<f64>>,
}

impl EstimatorConfig {
    pub fn scalar(gamma: f64, dim: usize) -> Self {
        Self {
            gamma: DMatrix::identity(dim, dim) * gamma,
            initial: None,
        }
    }

    pub fn diagonal(gains: &[f64]) -> Self {
        Self {
            gamma: DMatrix::from_diagonal(&DVector::from_column_slice(gains)),
            initial: None,
        }
    }
}

/// The assembled observer `ξ̇ = F(ξ, y, u)`, `x̂ = φᴸ(χ + θ̂, y)`.
///
/// As a block its state is `[χ (nz) | filter states | parameter estimate]`,
/// its input is `col(y, u)` and its output is `ẑ = χ + θ̂`; the estimate
/// `x̂` is obtained with [`PeboObserver::estimate`] since it also depends on
/// `y`. The filters and `χ` are integrated with the surrounding RK4 step; the
/// parameter estimate is advanced after each step by
/// [`GradientEstimator::advance`] using the step-averaged regression.
pub struct PeboObserver {
    cascade: Arc<dyn Cascade>,
    path: EstimatorPath,
    filter: Option<FilteredRegression>,
    estimator: GradientEstimator,
}

/// Builds a [`PeboObserver`] after checking that all dimensions agree.
pub fn assemble(
    cascade: Arc<dyn Cascade>,
    path: EstimatorPath,
    config: &EstimatorConfig,
) -> Result<PeboObserver, FrameworkError> {
    let d = cascade.dims();
    let (filter, param_dim) = match &path {
        EstimatorPath::Filtered {
            regression, alpha, ..
        } => {
            if regression.nz() != d.nz {
                return Err(FrameworkError::Dimension(format!(
                    "regression parameter dimension {} differs from nz {}",
                    regression.nz(),
                    d.nz
                )));
            }
            (
                Some(FilteredRegression::new(*alpha, regression.rows(), d.nz)?),
                d.nz,
            )
        }
        EstimatorPath::Static { regression } => (None, regression.param_dim()),
    };
    let initial = config
        .initial
        .clone()
        .unwrap_or_else(|| DVector::zeros(param_dim));
    if initial.len() != param_dim {
        return Err(FrameworkError::Dimension(format!(
            "initial estimate has {} entries, expected {param_dim}",
            initial.len()
        )));
    }
    let estimator = GradientEstimator::new(config.gamma.clone(), initial)?;
    Ok(PeboObserver {
        cascade,
        path,
        filter,
        estimator,
    })
}

impl PeboObserver {
    pub fn cascade(&self) -> &Arc<dyn Cascade> {
        &self.cascade
    }

    pub fn estimator(&self) -> &GradientEstimator {
        &self.estimator
    }

    pub fn filter(&self) -> Option<&FilteredRegression> {
        self.filter.as_ref()
    }

    fn nz(&self) -> usize {
        self.cascade.dims().nz
    }

    fn filter_dim(&self) -> usize {
        self.filter.map_or(0, |f| f.state_dim())
    }

    pub fn param_dim(&self) -> usize {
        self.estimator.dim()
    }

    /// Initial block state for `χ(0) = chi0` given the first measurement.
    pub fn initial_state(&self, chi0: &DVector<f64>, y0: &DVector<f64>) -> Result<DVector<f64>, FrameworkError> {
        if chi0.len() != self.nz() {
            return Err(FrameworkError::Dimension(format!(
                "chi0 has {} entries, expected {}",
                chi0.len(),
                self.nz()
            )));
        }
        let mut s = Vec::with_capacity(self.dim());
        s.extend_from_slice(chi0.as_slice());
        if let (Some(f), EstimatorPath::Filtered { regression, init, .. }) = (&self.filter, &self.path) {
            s.extend_from_slice(f.initial_state(*init, &regression.regressand(y0)).as_slice());
        }
        s.extend_from_slice(self.estimator.theta_hat().as_slice());
        Ok(DVector::from_vec(s))
    }

    pub fn chi(&self, state: &DVector<f64>) -> DVector<f64> {
        state.rows(0, self.nz()).into_owned()
    }

    pub fn params(&self, state: &DVector<f64>) -> DVector<f64> {
        state
            .rows(self.nz() + self.filter_dim(), self.param_dim())
            .into_owned()
    }

    pub fn theta_hat(&self, state: &DVector<f64>) -> DVector<f64> {
        let p = self.params(state);
        match &self.path {
            EstimatorPath::Filtered { .. } => p,
            EstimatorPath::Static { regression } => regression.theta_of(&p),
        }
    }

    /// `x̂ = φᴸ(χ + θ̂, y)`.
    pub fn estimate(&self, state: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>, FrameworkError> {
        recover_state(self.cascade.as_ref(), &self.chi(state), &self.theta_hat(state), y)
    }

    /// `(target, regressor)` seen by the estimator at this state: `(ϑ, Φ̄1)` or `(Y, Sᵀ)`.
    pub fn regression_sample(&self, state: &DVector<f64>, y: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        match (&self.path, &self.filter) {
            (EstimatorPath::Filtered { regression, .. }, Some(f)) => {
                let fs = state.rows(self.nz(), f.state_dim()).into_owned();
                f.readout(&fs, &regression.regressand(y))
            }
            (EstimatorPath::Static { regression }, _) => regression.eval(&self.chi(state), y),
            _ => unreachable!("filtered path always carries a filter"),
        }
    }

    fn split_input(&self, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let ny = self.cascade.dims().ny;
        (
            u.rows(0, ny).into_owned(),
            u.rows(ny, u.len() - ny).into_owned(),
        )
    }
}

impl VectorField for PeboObserver {
    fn dim(&self) -> usize {
        self.nz() + self.filter_dim() + self.param_dim()
    }

    fn input_dim(&self) -> usize {
        let d = self.cascade.dims();
        d.ny + d.m
    }

    fn eval(&self, _t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let (y, input) = self.split_input(u);
        let chi = self.chi(x);
        let mut d = DVector::zeros(self.dim());
        d.rows_mut(0, self.nz()).copy_from(&self.cascade.h(&y, &input));
        if let (Some(f), EstimatorPath::Filtered { regression, .. }) = (&self.filter, &self.path) {
            let fs = x.rows(self.nz(), f.state_dim()).into_owned();
            let fd = f.derivative(
                &fs,
                &regression.regressand(&y),
                &regression.phi0(&chi, &y, &input),
                &regression.phi1(&chi, &y, &input),
            );
            d.rows_mut(self.nz(), f.state_dim()).copy_from(&fd);
        }
        d
    }

    fn labels(&self) -> Vec<String> {
        let mut l: Vec<String> = (0..self.nz()).map(|i| format!("chi{i}")).collect();
        l.extend((0..self.filter_dim()).map(|i| format!("filt{i}")));
        let name = match self.path {
            EstimatorPath::Filtered { .. } => "theta_hat",
            EstimatorPath::Static { .. } => "eta_hat",
        };
        l.extend((0..self.param_dim()).map(|i| format!("{name}{i}")));
        l
    }

    fn output_dim(&self) -> usize {
        self.nz()
    }

    fn output(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        self.chi(x) + self.theta_hat(x)
    }

    fn output_labels(&self) -> Vec<String> {
        (0..self.nz()).map(|i| format!("z_hat{i}")).collect()
    }

    fn post_step(&self, ctx: &StepContext<'_>, next: &mut DVector<f64>) {
        let (y0, _) = self.split_input(ctx.prev_input);
        let (y1, _) = self.split_input(ctx.next_input);
        let (t0, r0) = self.regression_sample(ctx.prev_state, &y0);
        let (t1, r1) = self.regression_sample(next, &y1);
        let target = (t0 + t1) * 0.5;
        let regressor = (r0 + r1) * 0.5;
        let offset = self.nz() + self.filter_dim();
        let theta = self.params(ctx.prev_state);
        let updated = self
            .estimator
            .advance(&theta, &target, &regressor, ctx.dt)
            .unwrap_or_else(|_| DVector::from_element(self.param_dim(), f64::NAN));
        next.rows_mut(offset, self.param_dim()).copy_from(&updated);
    }
}
