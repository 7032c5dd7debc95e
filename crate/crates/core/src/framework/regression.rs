use nalgebra::{DMatrix, DVector};

/// `ẏᵣ = Φ0(χ, y, u) + Φ1(χ, y, u) θ` where `yᵣ` is a measured signal.
///
/// `yᵣ` defaults to the whole measurement; plants whose regression only
/// covers part of it (the motor currents, not the speed) override
/// [`LinearRegression::regressand`].
pub trait LinearRegression: Send + Sync {
    fn rows(&self) -> usize;

    fn nz(&self) -> usize;

    fn regressand(&self, y: &DVector<f64>) -> DVector<f64> {
        y.clone()
    }

    fn phi0(&self, chi: &DVector<f64>, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    fn phi1(&self, chi: &DVector<f64>, y: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64>;
}

/// Algebraic regression `Y = Sᵀ η` built from `χ` and `y` only.
pub trait StaticRegression: Send + Sync {
    fn rows(&self) -> usize;

    fn param_dim(&self) -> usize;

    /// `(Y, Sᵀ)`; `Sᵀ` has `rows()` rows and `param_dim()` columns.
    fn eval(&self, chi: &DVector<f64>, y: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>);

    /// Extracts `θ` from the extended parameter `η`.
    fn theta_of(&self, eta: &DVector<f64>) -> DVector<f64>;
}
