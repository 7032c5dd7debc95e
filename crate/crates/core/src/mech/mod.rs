//! Mechanical systems in port-Hamiltonian form whose momenta can be made
//! to enter linearly through a position-dependent change of coordinates
//! `z = 𝒯ᵀ(y) x`. Position `y` is measured, momenta `x` are estimated.

mod examples;
mod scenario;

pub use examples::{ConstantInertia, ExpressionSystem, Pendulum, TrigTerm, VaryingInertia, VaryingInertiaFactor};
pub use scenario::{run_mech_scenario, MechRun, MechScenario};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::framework::{Cascade, Dims, FrameworkError, LinearRegression};
use crate::sim::VectorField;

/// Step of the central-difference fallback: `1e−6·(1 + |y_j|)`.
pub fn fd_step(yj: f64) -> f64 {
    1e-6 * (1.0 + yj.abs())
}

/// Central-difference partials of a matrix-valued map, one per coordinate.
pub fn fd_jacobian(y: &DVector<f64>, f: impl Fn(&DVector<f64>) -> DMatrix<f64>) -> Vec<DMatrix<f64>> {
    (0..y.len())
        .map(|j| {
            let h = fd_step(y[j]);
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += h;
            ym[j] -= h;
            (f(&yp) - f(&ym)) / (2.0 * h)
        })
        .collect()
}

/// A mechanical system `H(y, x) = ½ xᵀ M⁻¹(y) x + 𝒱(y)` with input matrix
/// `G(y)` and a candidate factor `𝒯(y)`.
///
/// Derivative maps default to central differences; implementations with
/// closed forms should override them.
pub trait MechSystem: Send + Sync {
    fn name(&self) -> &str;

    /// Degrees of freedom `s`.
    fn dof(&self) -> usize;

    /// Input dimension `m`.
    fn inputs(&self) -> usize;

    fn inertia(&self, y: &DVector<f64>) -> DMatrix<f64>;

    fn potential(&self, y: &DVector<f64>) -> f64;

    fn input_matrix(&self, y: &DVector<f64>) -> DMatrix<f64>;

    fn factor(&self, y: &DVector<f64>) -> DMatrix<f64>;

    fn potential_grad(&self, y: &DVector<f64>) -> DVector<f64> {
        let g = fd_jacobian(y, |p| DMatrix::from_element(1, 1, self.potential(p)));
        DVector::from_iterator(y.len(), g.iter().map(|m| m[(0, 0)]))
    }

    /// `∂M/∂y_j` for `j = 1..s`.
    fn inertia_jacobian(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        fd_jacobian(y, |p| self.inertia(p))
    }

    /// `∂𝒯/∂y_j` for `j = 1..s`.
    fn factor_jacobian(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        fd_jacobian(y, |p| self.factor(p))
    }

    fn hamiltonian(&self, y: &DVector<f64>, x: &DVector<f64>) -> f64 {
        let v = self
            .inertia(y)
            .cholesky()
            .map(|c| c.solve(x))
            .unwrap_or_else(|| DVector::from_element(x.len(), f64::NAN));
        0.5 * x.dot(&v) + self.potential(y)
    }
}

/// `∂/∂y_j A⁻¹ = −A⁻¹ (∂A/∂y_j) A⁻¹`.
fn inverse_derivative(inv: &DMatrix<f64>, da: &DMatrix<f64>) -> DMatrix<f64> {
    -(inv * da * inv)
}

/// Hamiltonian flow over `(y, x)`; input `u ∈ ℝᵐ`.
///
/// Where `M(y)` is not positive definite the derivative is NaN, which the
/// integrator reports as divergence.
pub struct MechField {
    pub system: Arc<dyn MechSystem>,
}

pub fn mech_field(system: Arc<dyn MechSystem>) -> Arc<dyn VectorField> {
    Arc::new(MechField { system })
}

impl VectorField for MechField {
    fn dim(&self) -> usize {
        2 * self.system.dof()
    }

    fn input_dim(&self) -> usize {
        self.system.inputs()
    }

    fn eval(&self, _t: f64, s: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let n = self.system.dof();
        let y = s.rows(0, n).into_owned();
        let x = s.rows(n, n).into_owned();
        let m = self.system.inertia(&y);
        let Some(chol) = m.cholesky() else {
            return DVector::from_element(2 * n, f64::NAN);
        };
        let minv = chol.inverse();
        let v = &minv * &x;
        let dv = self.system.potential_grad(&y);
        let dm = self.system.inertia_jacobian(&y);
        let force = self.system.input_matrix(&y) * u;
        let mut d = DVector::zeros(2 * n);
        d.rows_mut(0, n).copy_from(&v);
        for j in 0..n {
            let dh = 0.5 * x.dot(&(inverse_derivative(&minv, &dm[j]) * &x)) + dv[j];
            d[n + j] = -dh + force[j];
        }
        d
    }

    fn labels(&self) -> Vec<String> {
        let n = self.system.dof();
        (0..n)
            .map(|i| format!("y{i}"))
            .chain((0..n).map(|i| format!("x{i}")))
            .collect()
    }
}

/// Skew-symmetry check of one `ℬ(i)` at one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Assumption3Point {
    pub y: DVector<f64>,
    /// `‖ℬ(i) + ℬ(i)ᵀ‖_F` per index `i`; empty when undefined.
    pub residuals: Vec<f64>,
    pub pass: Vec<bool>,
    /// `M𝒯𝒯ᵀ` or `𝒯ᵀM𝒯` singular at this sample.
    pub undefined: bool,
}

impl Assumption3Point {
    pub fn passed(&self) -> bool {
        !self.undefined && self.pass.iter().all(|&p| p)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assumption3Report {
    pub tol: f64,
    pub points: Vec<Assumption3Point>,
}

impl Assumption3Report {
    pub fn passed(&self) -> bool {
        self.points.iter().all(Assumption3Point::passed)
    }

    pub fn max_residual(&self) -> f64 {
        self.points.iter().map(Assumption3Point::max_residual).fold(0.0, f64::max)
    }
}

/// `ℬ(i)(y)` for `i = 1..s`, or `None` when a required inverse does not exist.
///
/// `ℬ(i) = Σ_j [𝒯_i, 𝒯_j] 𝒯_jᵀ (M𝒯𝒯ᵀ)⁻¹ + ½ 𝒯_{ji} 𝒯 ∂_j(𝒯ᵀM𝒯)⁻¹ 𝒯ᵀ`
/// with `[a, b] = (∂b/∂y) a − (∂a/∂y) b` and `j` ranging over positions.
pub fn b_matrices(sys: &dyn MechSystem, y: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
    let s = sys.dof();
    let m = sys.inertia(y);
    let t = sys.factor(y);
    let dm = sys.inertia_jacobian(y);
    let dt = sys.factor_jacobian(y);
    let mtt_inv = (&m * &t * t.transpose()).try_inverse()?;
    let k = t.transpose() * &m * &t;
    let k_inv = k.clone().try_inverse()?;
    // ∂𝒯_i/∂y as an s×s matrix whose column j is ∂𝒯_i/∂y_j
    let col_jac = |i: usize| {
        let mut jac = DMatrix::zeros(s, s);
        for (j, d) in dt.iter().enumerate() {
            jac.set_column(j, &d.column(i));
        }
        jac
    };
    let jacs: Vec<DMatrix<f64>> = (0..s).map(col_jac).collect();
    let dk_inv: Vec<DMatrix<f64>> = (0..s)
        .map(|j| {
            let dk = dt[j].transpose() * &m * &t + t.transpose() * &dm[j] * &t + t.transpose() * &m * &dt[j];
            inverse_derivative(&k_inv, &dk)
        })
        .collect();
    let out = (0..s)
        .map(|i| {
            let ti = t.column(i).into_owned();
            let mut b = DMatrix::zeros(s, s);
            for j in 0..s {
                let tj = t.column(j).into_owned();
                let bracket = &jacs[j] * &ti - &jacs[i] * &tj;
                b += bracket * tj.transpose() * &mtt_inv;
                b += (&t * &dk_inv[j] * t.transpose()) * (0.5 * t[(j, i)]);
            }
            b
        })
        .collect();
    Some(out)
}

/// Evaluates `‖ℬ(i) + ℬ(i)ᵀ‖_F ≤ tol` at every sample and every index.
pub fn check_assumption3(sys: &dyn MechSystem, points: &[DVector<f64>], tol: f64) -> Assumption3Report {
    let points = points
        .iter()
        .map(|y| match b_matrices(sys, y) {
            Some(bs) => {
                let residuals: Vec<f64> = bs.iter().map(|b| (b + b.transpose()).norm()).collect();
                let pass = residuals.iter().map(|&r| r <= tol).collect();
                Assumption3Point {
                    y: y.clone(),
                    residuals,
                    pass,
                    undefined: false,
                }
            }
            None => Assumption3Point {
                y: y.clone(),
                residuals: Vec::new(),
                pass: Vec::new(),
                undefined: true,
            },
        })
        .collect();
    Assumption3Report { tol, points }
}

/// Cascade `z = 𝒯ᵀ(y) x`, `ż = −𝒯ᵀ(y)[∂𝒱/∂y − G(y) u]` with regression
/// `ẏ = [𝒯ᵀ(y) M(y)]⁻¹ (χ + θ)`.
#[derive(Clone)]
pub struct MechCascade {
    pub system: Arc<dyn MechSystem>,
}

pub fn mech_cascade(system: Arc<dyn MechSystem>) -> Arc<MechCascade> {
    Arc::new(MechCascade { system })
}

impl MechCascade {
    /// `[𝒯ᵀ M]⁻¹`, NaN-filled if singular.
    pub fn regressor(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let s = self.system.dof();
        (self.system.factor(y).transpose() * self.system.inertia(y))
            .try_inverse()
            .unwrap_or_else(|| DMatrix::from_element(s, s, f64::NAN))
    }

    /// Velocity `M⁻¹(y) x`.
    pub fn velocity(&self, y: &DVector<f64>, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.system.inertia(y).cholesky().map(|c| c.solve(x))
    }

    pub fn plant_state(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let s = self.system.dof();
        let mut st = DVector::zeros(2 * s);
        st.rows_mut(0, s).copy_from(y);
        st.rows_mut(s, s).copy_from(x);
        st
    }
}

impl Cascade for MechCascade {
    fn dims(&self) -> Dims {
        let s = self.system.dof();
        Dims {
            nx: s,
            ny: s,
            nz: s,
            m: self.system.inputs(),
        }
    }

    fn plant(&self) -> Arc<dyn VectorField> {
        mech_field(self.system.clone())
    }

    fn split(&self, st: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let s = self.system.dof();
        (st.rows(s, s).into_owned(), st.rows(0, s).into_owned())
    }

    fn phi(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.system.factor(y).transpose() * x
    }

    fn phi_left(&self, z: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>, FrameworkError> {
        self.system
            .factor(y)
            .transpose()
            .lu()
            .solve(z)
            .ok_or_else(|| FrameworkError::EstimateUndefined(format!("factor singular at y = {y:?}")))
    }

    fn h(&self, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let rhs = self.system.potential_grad(y) - self.system.input_matrix(y) * u;
        -(self.system.factor(y).transpose() * rhs)
    }

    fn x_labels(&self) -> Vec<String> {
        (0..self.system.dof()).map(|i| format!("x{i}")).collect()
    }

    fn y_labels(&self) -> Vec<String> {
        (0..self.system.dof()).map(|i| format!("y{i}")).collect()
    }
}

impl LinearRegression for MechCascade {
    fn rows(&self) -> usize {
        self.system.dof()
    }

    fn nz(&self) -> usize {
        self.system.dof()
    }

    fn phi0(&self, chi: &DVector<f64>, y: &DVector<f64>, _u: &DVector<f64>) -> DVector<f64> {
        self.regressor(y) * chi
    }

    fn phi1(&self, _chi: &DVector<f64>, y: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        self.regressor(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::checks::{left_inverse_error, regression_residual, transformability_residual};
    use crate::sim::{integrate, InputSchedule};

    fn samples(n: usize) -> Vec<DVector<f64>> {
        (0..n).map(|k| DVector::from_element(1, -3.0 + 6.0 * k as f64 / (n - 1) as f64)).collect()
    }

    fn oracle(sys: Arc<dyn MechSystem>, s0: DVector<f64>, horizon: f64, dt: f64) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let m = sys.inputs();
        let drive = InputSchedule::function(m, horizon, move |t| DVector::from_element(m, 0.5 * (2.0 * t).sin()));
        let tr = integrate(mech_field(sys), &s0, &drive, dt, horizon).unwrap();
        let states = (0..tr.len()).map(|k| DVector::from_row_slice(tr.row(k))).collect();
        let inputs = (0..tr.len()).map(|k| drive.at(k as f64 * dt)).collect();
        (states, inputs)
    }

    #[test]
    fn pendulum_rests_at_the_bottom() {
        let f = mech_field(Arc::new(Pendulum::default()));
        assert_eq!(f.eval(0.0, &DVector::zeros(2), &DVector::zeros(1)), DVector::zeros(2));
    }

    #[test]
    fn hamiltonian_is_conserved_without_input() {
        let systems: Vec<(Arc<dyn MechSystem>, DVector<f64>)> = vec![
            (Arc::new(Pendulum::default()), DVector::from_vec(vec![1.0, 0.5])),
            (Arc::new(VaryingInertia::default()), DVector::from_vec(vec![0.3, 1.2])),
            (Arc::new(ConstantInertia::two_mass()), DVector::from_vec(vec![0.1, -0.2, 0.4, 0.0])),
        ];
        for (sys, s0) in systems {
            let n = sys.dof();
            let tr = integrate(mech_field(sys.clone()), &s0, &InputSchedule::constant(DVector::zeros(sys.inputs()), 10.0), 1e-3, 10.0).unwrap();
            let h = |k: usize| {
                let r = DVector::from_row_slice(tr.row(k));
                sys.hamiltonian(&r.rows(0, n).into_owned(), &r.rows(n, n).into_owned())
            };
            let h0 = h(0);
            let drift = (0..tr.len()).map(|k| (h(k) - h0).abs()).fold(0.0, f64::max);
            assert!(drift <= 1e-6, "{}: {drift}", sys.name());
        }
    }

    #[test]
    fn varying_inertia_matches_lagrangian_form() {
        let sys = VaryingInertia::default();
        let (dt, horizon) = (1e-3, 5.0);
        let (states, _) = oracle(Arc::new(sys.clone()), DVector::from_vec(vec![0.3, 0.0]), horizon, dt);
        // M(q) q̈ + ½ M′(q) q̇² + 𝒱′(q) = u, integrated in (q, q̇)
        let lag = crate::sim::FnField {
            dim: 2,
            input_dim: 1,
            f: move |_t: f64, s: &DVector<f64>, u: &DVector<f64>| {
                let (q, v) = (s[0], s[1]);
                let m = sys.j1 + sys.j2 * q.sin().powi(2);
                let dm = 2.0 * sys.j2 * q.sin() * q.cos();
                DVector::from_vec(vec![v, (u[0] - 0.5 * dm * v * v - q.sin()) / m])
            },
        };
        let drive = InputSchedule::function(1, horizon, |t| DVector::from_element(1, 0.5 * (2.0 * t).sin()));
        let tr = integrate(Arc::new(lag), &DVector::from_vec(vec![0.3, 0.0]), &drive, dt, horizon).unwrap();
        for (k, s) in states.iter().enumerate() {
            let r = tr.row(k);
            let m = sys.j1 + sys.j2 * r[0].sin().powi(2);
            assert!((s[0] - r[0]).abs() <= 1e-8, "position at {k}");
            assert!((s[1] - m * r[1]).abs() <= 1e-8, "momentum at {k}");
        }
    }

    #[test]
    fn constant_factor_has_zero_residual() {
        let sys = ConstantInertia::two_mass();
        let pts: Vec<_> = (0..20).map(|k| DVector::from_vec(vec![k as f64 * 0.3, -(k as f64) * 0.1])).collect();
        let rep = check_assumption3(&sys, &pts, 0.0);
        assert!(rep.passed());
        assert_eq!(rep.max_residual(), 0.0);
        let rep = check_assumption3(&Pendulum::default(), &samples(10), 0.0);
        assert_eq!(rep.max_residual(), 0.0);
    }

    #[test]
    fn inverse_square_root_factor_passes() {
        let rep = check_assumption3(&VaryingInertia::default(), &samples(100), 1e-8);
        assert!(rep.passed(), "{}", rep.max_residual());
    }

    #[test]
    fn unit_factor_fails_where_inertia_varies() {
        let sys = VaryingInertia::with_factor(VaryingInertiaFactor::Unit);
        let rep = check_assumption3(&sys, &samples(101), 1e-8);
        for p in &rep.points {
            let dm = 2.0 * sys.j2 * p.y[0].sin() * p.y[0].cos();
            assert_eq!(p.passed(), dm.abs() < 1e-9, "y = {}", p.y[0]);
        }
    }

    #[test]
    fn finite_difference_fallback_agrees_with_closed_forms() {
        struct Fd(VaryingInertia);
        impl MechSystem for Fd {
            fn name(&self) -> &str {
                "fd"
            }
            fn dof(&self) -> usize {
                1
            }
            fn inputs(&self) -> usize {
                1
            }
            fn inertia(&self, y: &DVector<f64>) -> DMatrix<f64> {
                self.0.inertia(y)
            }
            fn potential(&self, y: &DVector<f64>) -> f64 {
                self.0.potential(y)
            }
            fn input_matrix(&self, y: &DVector<f64>) -> DMatrix<f64> {
                self.0.input_matrix(y)
            }
            fn factor(&self, y: &DVector<f64>) -> DMatrix<f64> {
                self.0.factor(y)
            }
        }
        let a = VaryingInertia::default();
        let b = Fd(a.clone());
        for y in samples(25) {
            assert!((a.inertia_jacobian(&y)[0].clone() - b.inertia_jacobian(&y)[0].clone()).amax() < 1e-8);
            assert!((a.factor_jacobian(&y)[0].clone() - b.factor_jacobian(&y)[0].clone()).amax() < 1e-8);
            assert!((a.potential_grad(&y) - b.potential_grad(&y)).amax() < 1e-8);
        }
        assert!(check_assumption3(&b, &samples(100), 1e-6).passed());
    }

    #[test]
    fn cascade_identities_hold() {
        let systems: Vec<(Arc<dyn MechSystem>, DVector<f64>)> = vec![
            (Arc::new(Pendulum::default()), DVector::from_vec(vec![1.0, 0.5])),
            (Arc::new(VaryingInertia::default()), DVector::from_vec(vec![0.3, 1.2])),
            (Arc::new(ConstantInertia::two_mass()), DVector::from_vec(vec![0.1, -0.2, 0.4, 0.0])),
        ];
        for (sys, s0) in systems {
            let c = mech_cascade(sys.clone());
            let dt = 1e-3;
            let (states, inputs) = oracle(sys.clone(), s0, 2.0, dt);
            for s in &states {
                let (x, y) = c.split(s);
                assert!(left_inverse_error(c.as_ref(), &x, &y).unwrap() <= 1e-12);
            }
            let r = transformability_residual(c.as_ref(), &states, &inputs, dt);
            assert!(r < 1e-4, "{}: {r}", sys.name());
            let theta = c.z_of(&states[0]);
            let chis: Vec<_> = states.iter().map(|s| c.z_of(s) - &theta).collect();
            let ys: Vec<_> = states.iter().map(|s| c.split(s).1).collect();
            let res = regression_residual(c.as_ref(), &theta, &ys, &chis, &inputs, dt);
            assert!(res.within(10.0, dt), "{}: {res:?}", sys.name());
        }
    }

    #[test]
    fn regressor_is_excited_without_input() {
        let sys: Arc<dyn MechSystem> = Arc::new(VaryingInertia::default());
        let c = mech_cascade(sys.clone());
        let tr = integrate(mech_field(sys), &DVector::from_vec(vec![0.3, 0.0]), &InputSchedule::constant(DVector::zeros(1), 2.0), 1e-3, 2.0).unwrap();
        let samples: Vec<_> = (0..tr.len())
            .map(|k| c.regressor(&DVector::from_element(1, tr.row(k)[0])))
            .collect();
        let rep = crate::framework::pe_monitor(&samples, 1e-3, 0.5).unwrap();
        // [𝒯ᵀM]⁻¹ = M^{−1/2} ≥ (J1 + J2)^{−1/2}
        let c_low = 1.0 / 1.5;
        assert!(rep.delta_min >= c_low * 0.5 * (1.0 - 1e-9), "{}", rep.delta_min);
    }
}
