//! Surface-mounted permanent magnet synchronous motor: the flux-linkage
//! cascade, the current regression (needs the rotor speed) and the
//! speed-free static regression built on `|λ − L i| = λm`.

mod scenario;

pub use scenario::{run_pmsm_scenario, PmsmDrive, PmsmPath, PmsmRun, PmsmScenario};

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::framework::{Cascade, Dims, FrameworkError, LinearRegression, StaticRegression};
use crate::sim::VectorField;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PmsmParams {
    /// Stator inductance, H.
    pub l: f64,
    /// Stator resistance, Ω.
    pub r: f64,
    /// Magnet flux amplitude, Wb.
    pub lambda_m: f64,
    pub n_p: u32,
    /// Rotor inertia, kg·m².
    pub j: f64,
    /// Viscous friction.
    pub f: f64,
    /// Load torque, N·m.
    pub tau: f64,
}

impl Default for PmsmParams {
    fn default() -> Self {
        Self {
            l: 5e-3,
            r: 0.5,
            lambda_m: 0.1,
            n_p: 3,
            j: 1e-3,
            f: 1e-3,
            tau: 0.0,
        }
    }
}

impl PmsmParams {
    pub fn validate(&self) -> Result<(), FrameworkError> {
        let ok = self.l > 0.0
            && self.lambda_m > 0.0
            && self.j > 0.0
            && self.r >= 0.0
            && self.f >= 0.0
            && self.n_p > 0
            && self.tau.is_finite();
        if ok {
            Ok(())
        } else {
            Err(FrameworkError::InvalidArgument(format!(
                "machine parameters out of range: {self:?}"
            )))
        }
    }

    fn np(&self) -> f64 {
        f64::from(self.n_p)
    }

    /// Electrical period of the rotor angle, `2π/n_p`.
    pub fn period(&self) -> f64 {
        TAU / self.np()
    }

    /// `μ(q) = λm (cos n_p q, sin n_p q)`.
    pub fn mu(&self, q: f64) -> DVector<f64> {
        let a = self.np() * q;
        DVector::from_vec(vec![self.lambda_m * a.cos(), self.lambda_m * a.sin()])
    }

    /// `μ′(q) = λm n_p (−sin n_p q, cos n_p q)`.
    pub fn mu_prime(&self, q: f64) -> DVector<f64> {
        let a = self.np() * q;
        let k = self.lambda_m * self.np();
        DVector::from_vec(vec![-k * a.sin(), k * a.cos()])
    }

    /// Flux linkage `λ = L i + μ(q)` on a plant state `(i1, i2, q, q̇)`.
    pub fn flux(&self, s: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![self.l * s[0], self.l * s[1]]) + self.mu(s[2])
    }

    /// Stored energy `½ L |i|² + ½ j q̇²`.
    pub fn energy(&self, s: &DVector<f64>) -> f64 {
        0.5 * self.l * (s[0] * s[0] + s[1] * s[1]) + 0.5 * self.j * s[3] * s[3]
    }

    /// Power balance `iᵀu − R|i|² − f q̇² − τ q̇`.
    pub fn power(&self, s: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let i2 = s[0] * s[0] + s[1] * s[1];
        s[0] * u[0] + s[1] * u[1] - self.r * i2 - self.f * s[3] * s[3] - self.tau * s[3]
    }
}

/// Wraps an angle into `[0, period)`.
pub fn wrap(q: f64, period: f64) -> f64 {
    let w = q.rem_euclid(period);
    if w >= period {
        0.0
    } else {
        w
    }
}

/// Shortest signed arc from `b` to `a` on a circle of the given period.
pub fn arc_error(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    if d > 0.5 * period {
        d - period
    } else {
        d
    }
}

/// Electromechanical dynamics over `(i1, i2, q, q̇)` with voltage input `u ∈ ℝ²`.
#[derive(Clone, Copy, Debug)]
pub struct PmsmPlant {
    pub params: PmsmParams,
}

pub fn pmsm_field(p: PmsmParams) -> Arc<dyn VectorField> {
    Arc::new(PmsmPlant { params: p })
}

impl VectorField for PmsmPlant {
    fn dim(&self) -> usize {
        4
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn eval(&self, _t: f64, s: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let p = &self.params;
        let (q, w) = (s[2], s[3]);
        let mp = p.mu_prime(q);
        DVector::from_vec(vec![
            (-p.r * s[0] - mp[0] * w + u[0]) / p.l,
            (-p.r * s[1] - mp[1] * w + u[1]) / p.l,
            w,
            (s[0] * mp[0] + s[1] * mp[1] - p.f * w - p.tau) / p.j,
        ])
    }

    fn labels(&self) -> Vec<String> {
        ["i1", "i2", "q", "qdot"].map(String::from).to_vec()
    }
}

/// Which signals count as measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PmsmMeasurement {
    /// `y = (i1, i2, q̇)`; enables the current regression.
    CurrentsAndSpeed,
    /// `y = (i1, i2)`; enables only the static regression.
    Currents,
}

/// Flux cascade `z = λ = L i + μ(q)`, `ż = −R i + u`, `x = q`.
#[derive(Clone, Copy, Debug)]
pub struct FluxCascade {
    pub params: PmsmParams,
    pub measured: PmsmMeasurement,
}

pub fn flux_cascade(p: PmsmParams, measured: PmsmMeasurement) -> Arc<FluxCascade> {
    Arc::new(FluxCascade { params: p, measured })
}

impl FluxCascade {
    fn current(y: &DVector<f64>) -> DVector<f64> {
        y.rows(0, 2).into_owned()
    }

    /// Plant state from `q` and a measurement; the speed defaults to `speed`
    /// when it is not part of `y`.
    pub fn plant_state(&self, q: f64, y: &DVector<f64>, speed: f64) -> DVector<f64> {
        let w = match self.measured {
            PmsmMeasurement::CurrentsAndSpeed => y[2],
            PmsmMeasurement::Currents => speed,
        };
        DVector::from_vec(vec![y[0], y[1], q, w])
    }
}

impl Cascade for FluxCascade {
    fn dims(&self) -> Dims {
        let ny = match self.measured {
            PmsmMeasurement::CurrentsAndSpeed => 3,
            PmsmMeasurement::Currents => 2,
        };
        Dims { nx: 1, ny, nz: 2, m: 2 }
    }

    fn plant(&self) -> Arc<dyn VectorField> {
        pmsm_field(self.params)
    }

    fn split(&self, s: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let y = match self.measured {
            PmsmMeasurement::CurrentsAndSpeed => DVector::from_vec(vec![s[0], s[1], s[3]]),
            PmsmMeasurement::Currents => DVector::from_vec(vec![s[0], s[1]]),
        };
        (DVector::from_element(1, s[2]), y)
    }

    fn phi(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        Self::current(y) * self.params.l + self.params.mu(x[0])
    }

    fn phi_left(&self, z: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>, FrameworkError> {
        let p = &self.params;
        let m = z - Self::current(y) * p.l;
        if !(m.norm() > 1e-12 * p.lambda_m) {
            return Err(FrameworkError::EstimateUndefined(format!(
                "λ − L i = ({:e}, {:e}) carries no angle",
                m[0], m[1]
            )));
        }
        let q = m[1].atan2(m[0]) / p.np();
        Ok(DVector::from_element(1, wrap(q, p.period())))
    }

    fn h(&self, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        u - Self::current(y) * self.params.r
    }

    fn x_labels(&self) -> Vec<String> {
        vec!["q".into()]
    }

    fn y_labels(&self) -> Vec<String> {
        match self.measured {
            PmsmMeasurement::CurrentsAndSpeed => vec!["i1".into(), "i2".into(), "qdot".into()],
            PmsmMeasurement::Currents => vec!["i1".into(), "i2".into()],
        }
    }

    fn x_error(&self, x_hat: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, arc_error(x_hat[0], x[0], self.params.period()))
    }
}

/// `di/dt = Φ0 + Φ1 θ` with `Φ1 = (n_p q̇ / L)·[[0, 1], [−1, 0]]`.
///
/// Requires [`PmsmMeasurement::CurrentsAndSpeed`].
#[derive(Clone, Copy, Debug)]
pub struct CurrentRegression {
    pub params: PmsmParams,
}

impl CurrentRegression {
    fn gain(&self, y: &DVector<f64>) -> f64 {
        self.params.np() * y[2] / self.params.l
    }
}

impl LinearRegression for CurrentRegression {
    fn rows(&self) -> usize {
        2
    }

    fn nz(&self) -> usize {
        2
    }

    fn regressand(&self, y: &DVector<f64>) -> DVector<f64> {
        y.rows(0, 2).into_owned()
    }

    fn phi0(&self, chi: &DVector<f64>, y: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let p = &self.params;
        let k = self.gain(y);
        DVector::from_vec(vec![
            (-p.r * y[0] + u[0]) / p.l + k * (chi[1] - p.l * y[1]),
            (-p.r * y[1] + u[1]) / p.l + k * (-chi[0] + p.l * y[0]),
        ])
    }

    fn phi1(&self, _chi: &DVector<f64>, y: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        let k = self.gain(y);
        DMatrix::from_row_slice(2, 2, &[0.0, k, -k, 0.0])
    }
}

/// `Y = |χ − L i|²`, `S = (−2(χ − L i), 1)`, `η = (θ, λm² − |θ|²)`.
#[derive(Clone, Copy, Debug)]
pub struct FluxMagnitudeRegression {
    pub params: PmsmParams,
}

impl FluxMagnitudeRegression {
    /// `η` for a given offset `θ`.
    pub fn eta_of(&self, theta: &DVector<f64>) -> DVector<f64> {
        let lm = self.params.lambda_m;
        DVector::from_vec(vec![theta[0], theta[1], lm * lm - theta.norm_squared()])
    }
}

impl StaticRegression for FluxMagnitudeRegression {
    fn rows(&self) -> usize {
        1
    }

    fn param_dim(&self) -> usize {
        3
    }

    fn eval(&self, chi: &DVector<f64>, y: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let l = self.params.l;
        let d0 = chi[0] - l * y[0];
        let d1 = chi[1] - l * y[1];
        (
            DVector::from_element(1, d0 * d0 + d1 * d1),
            DMatrix::from_row_slice(1, 3, &[-2.0 * d0, -2.0 * d1, 1.0]),
        )
    }

    fn theta_of(&self, eta: &DVector<f64>) -> DVector<f64> {
        eta.rows(0, 2).into_owned()
    }
}
