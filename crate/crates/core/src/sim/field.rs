use nalgebra::DVector;

/// Information handed to [`VectorField::post_step`] after every RK4 step.
pub struct StepContext<'a> {
    pub t0: f64,
    pub dt: f64,
    pub prev_state: &'a DVector<f64>,
    pub prev_input: &'a DVector<f64>,
    pub next_input: &'a DVector<f64>,
}

/// A time-varying ODE right-hand side `ẋ = f(t, x, u)`.
///
/// Implementations must be pure: the same arguments always produce the same
/// derivative. A field may expose a Moore-type output (a function of its own
/// state only) for other blocks to consume, and may apply a discrete update
/// to part of its state after each integration step.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn input_dim(&self) -> usize;

    fn eval(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    fn labels(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("x{i}")).collect()
    }

    fn output_dim(&self) -> usize {
        self.dim()
    }

    fn output(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        x.clone()
    }

    fn output_labels(&self) -> Vec<String> {
        (0..self.output_dim()).map(|i| format!("y{i}")).collect()
    }

    /// Discrete correction applied to the freshly integrated state.
    fn post_step(&self, _ctx: &StepContext<'_>, _next: &mut DVector<f64>) {}
}

/// Closure-backed field, handy for tests and one-off models.
pub struct FnField<F> {
    pub dim: usize,
    pub input_dim: usize,
    pub f: F,
}

impl<F> VectorField for FnField<F>
where
    F: Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn eval(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        (self.f)(t, x, u)
    }
}
