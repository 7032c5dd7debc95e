use nalgebra::{DMatrix, DVector};

use super::MechSystem;

/// Simple pendulum `M = m l²`, `𝒱 = −m g l cos y`, `G = 1`, `𝒯 = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pendulum {
    pub mass: f64,
    pub length: f64,
    pub gravity: f64,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self {
            mass: 1.0,
            length: 1.0,
            gravity: 9.81,
        }
    }
}

impl MechSystem for Pendulum {
    fn name(&self) -> &str {
        "pendulum"
    }

    fn dof(&self) -> usize {
        1
    }

    fn inputs(&self) -> usize {
        1
    }

    fn inertia(&self, _y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.mass * self.length * self.length)
    }

    fn potential(&self, y: &DVector<f64>) -> f64 {
        -self.mass * self.gravity * self.length * y[0].cos()
    }

    fn input_matrix(&self, _y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    fn factor(&self, _y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    fn potential_grad(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, self.mass * self.gravity * self.length * y[0].sin())
    }

    fn inertia_jacobian(&self, _y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(1, 1)]
    }

    fn factor_jacobian(&self, _y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(1, 1)]
    }
}

/// Choice of `𝒯` for [`VaryingInertia`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VaryingInertiaFactor {
    /// `𝒯 = M^{−1/2}`, which satisfies the skew-symmetry condition.
    InverseSqrt,
    /// `𝒯 = 1`, which does not wherever `M′ ≠ 0`.
    Unit,
}

/// One degree of freedom with `M(y) = J1 + J2 sin² y`, `𝒱 = −cos y`, `G = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct VaryingInertia {
    pub j1: f64,
    pub j2: f64,
    pub factor: VaryingInertiaFactor,
}

impl Default for VaryingInertia {
    fn default() -> Self {
        Self {
            j1: 1.0,
            j2: 0.5,
            factor: VaryingInertiaFactor::InverseSqrt,
        }
    }
}

impl VaryingInertia {
    pub fn with_factor(factor: VaryingInertiaFactor) -> Self {
        Self {
            factor,
            ..Self::default()
        }
    }

    fn m(&self, q: f64) -> f64 {
        self.j1 + self.j2 * q.sin().powi(2)
    }

    fn dm(&self, q: f64) -> f64 {
        2.0 * self.j2 * q.sin() * q.cos()
    }
}

impl MechSystem for VaryingInertia {
    fn name(&self) -> &str {
        "varying-inertia"
    }

    fn dof(&self) -> usize {
        1
    }

    fn inputs(&self) -> usize {
        1
    }

    fn inertia(&self, y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.m(y[0]))
    }

    fn potential(&self, y: &DVector<f64>) -> f64 {
        -y[0].cos()
    }

    fn input_matrix(&self, _y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    fn factor(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let t = match self.factor {
            VaryingInertiaFactor::InverseSqrt => self.m(y[0]).powf(-0.5),
            VaryingInertiaFactor::Unit => 1.0,
        };
        DMatrix::from_element(1, 1, t)
    }

    fn potential_grad(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, y[0].sin())
    }

    fn inertia_jacobian(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::from_element(1, 1, self.dm(y[0]))]
    }

    fn factor_jacobian(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let d = match self.factor {
            VaryingInertiaFactor::InverseSqrt => -0.5 * self.m(y[0]).powf(-1.5) * self.dm(y[0]),
            VaryingInertiaFactor::Unit => 0.0,
        };
        vec![DMatrix::from_element(1, 1, d)]
    }
}

/// Linear mechanical network `M ÿ + K y = G u` with constant `M` and `𝒯 = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantInertia {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub input: DMatrix<f64>,
}

impl ConstantInertia {
    /// Two masses coupled by springs, force applied to the first.
    pub fn two_mass() -> Self {
        Self {
            mass: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
            stiffness: DMatrix::from_row_slice(2, 2, &[3.0, -1.0, -1.0, 1.0]),
            input: DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
        }
    }
}

impl MechSystem for ConstantInertia {
    fn name(&self) -> &str {
        "constant-inertia"
    }

    fn dof(&self) -> usize {
        self.mass.nrows()
    }

    fn inputs(&self) -> usize {
        self.input.ncols()
    }

    fn inertia(&self, _y: &DVector<f64>) -> DMatrix<f64> {
        self.mass.clone()
    }

    fn potential(&self, y: &DVector<f64>) -> f64 {
        0.5 * y.dot(&(&self.stiffness * y))
    }

    fn input_matrix(&self, _y: &DVector<f64>) -> DMatrix<f64> {
        self.input.clone()
    }

    fn factor(&self, _y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.dof(), self.dof())
    }

    fn potential_grad(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.stiffness * y
    }

    fn inertia_jacobian(&self, _y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(self.dof(), self.dof()); self.dof()]
    }

    fn factor_jacobian(&self, _y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(self.dof(), self.dof()); self.dof()]
    }
}

/// `c · yᵃ · sinᵇ y · cosᶜ y`, a term of a one-dimensional expression.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigTerm {
    pub coeff: f64,
    pub pow: u32,
    pub sin_pow: u32,
    pub cos_pow: u32,
}

impl TrigTerm {
    pub fn eval(&self, y: f64) -> f64 {
        self.coeff * y.powi(self.pow as i32) * y.sin().powi(self.sin_pow as i32) * y.cos().powi(self.cos_pow as i32)
    }

    pub fn derivative(&self, y: f64) -> f64 {
        let (s, c) = (y.sin(), y.cos());
        let (a, b, d) = (self.pow as i32, self.sin_pow as i32, self.cos_pow as i32);
        let mut out = 0.0;
        if a > 0 {
            out += f64::from(a) * y.powi(a - 1) * s.powi(b) * c.powi(d);
        }
        if b > 0 {
            out += f64::from(b) * y.powi(a) * s.powi(b - 1) * c.powi(d + 1);
        }
        if d > 0 {
            out -= f64::from(d) * y.powi(a) * s.powi(b + 1) * c.powi(d - 1);
        }
        self.coeff * out
    }
}

fn sum(terms: &[TrigTerm], y: f64) -> f64 {
    terms.iter().map(|t| t.eval(y)).sum()
}

fn sum_derivative(terms: &[TrigTerm], y: f64) -> f64 {
    terms.iter().map(|t| t.derivative(y)).sum()
}

/// A user-described one-degree-of-freedom system: `M` and `𝒱` are sums of
/// [`TrigTerm`]s, `G` is a constant and `𝒯` is chosen as for [`VaryingInertia`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExpressionSystem {
    pub inertia: Vec<TrigTerm>,
    pub potential: Vec<TrigTerm>,
    pub input_gain: f64,
    pub factor: VaryingInertiaFactor,
}

impl ExpressionSystem {
    fn m(&self, y: f64) -> f64 {
        sum(&self.inertia, y)
    }
}

impl MechSystem for ExpressionSystem {
    fn name(&self) -> &str {
        "expression"
    }

    fn dof(&self) -> usize {
        1
    }

    fn inputs(&self) -> usize {
        1
    }

    fn inertia(&self, y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.m(y[0]))
    }

    fn potential(&self, y: &DVector<f64>) -> f64 {
        sum(&self.potential, y[0])
    }

    fn input_matrix(&self, _y: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.input_gain)
    }

    fn factor(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let t = match self.factor {
            VaryingInertiaFactor::InverseSqrt => self.m(y[0]).powf(-0.5),
            VaryingInertiaFactor::Unit => 1.0,
        };
        DMatrix::from_element(1, 1, t)
    }

    fn potential_grad(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, sum_derivative(&self.potential, y[0]))
    }

    fn inertia_jacobian(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::from_element(1, 1, sum_derivative(&self.inertia, y[0]))]
    }

    fn factor_jacobian(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let d = match self.factor {
            VaryingInertiaFactor::InverseSqrt => {
                -0.5 * self.m(y[0]).powf(-1.5) * sum_derivative(&self.inertia, y[0])
            }
            VaryingInertiaFactor::Unit => 0.0,
        };
        vec![DMatrix::from_element(1, 1, d)]
    }
}
