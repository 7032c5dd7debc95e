use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{mech_cascade, MechCascade, MechSystem};
use crate::cuk::ScenarioError;
use crate::framework::{
    assemble, pe_monitor, Cascade, EstimatorConfig, EstimatorPath, FilterInit, LinearRegression, PeReport,
    PlantBlock,
};
use crate::sim::{coupled_integrate, Block, Coupled, Feed, InputSchedule, Trajectory};

/// Momenta observer run under the torque `u(t) = a·sin(ω t)` on every input.
#[derive(Clone)]
pub struct MechScenario {
    pub system: Arc<dyn MechSystem>,
    pub alpha: f64,
    pub gamma: DMatrix<f64>,
    pub filter_init: FilterInit,
    pub torque_amplitude: f64,
    pub torque_frequency: f64,
    pub dt: f64,
    pub horizon: f64,
    pub y0: DVector<f64>,
    pub x0: DVector<f64>,
    pub chi0: DVector<f64>,
    /// Initial `θ̂`; zero when absent.
    pub theta0: Option<DVector<f64>>,
    pub pe_window: f64,
}

impl MechScenario {
    /// Defaults: `α = 5`, `Γ = 50 I`, `u = 0.5 sin 2t`, `dt = 1e−3`, 5 s.
    pub fn new(system: Arc<dyn MechSystem>) -> Self {
        let s = system.dof();
        Self {
            system,
            alpha: 5.0,
            gamma: DMatrix::identity(s, s) * 50.0,
            filter_init: FilterInit::Zero,
            torque_amplitude: 0.5,
            torque_frequency: 2.0,
            dt: crate::sim::DT_MECHANICAL,
            horizon: 5.0,
            y0: DVector::from_element(s, 0.3),
            x0: DVector::from_element(s, 0.5),
            chi0: DVector::zeros(s),
            theta0: None,
            pe_window: 0.5,
        }
    }

    pub fn cascade(&self) -> Arc<MechCascade> {
        mech_cascade(self.system.clone())
    }

    pub fn schedule(&self) -> InputSchedule {
        let (a, w, m) = (self.torque_amplitude, self.torque_frequency, self.system.inputs());
        InputSchedule::function(m, self.horizon, move |t| DVector::from_element(m, a * (w * t).sin()))
    }
}

pub struct MechRun {
    pub trajectory: Trajectory,
    pub plant_states: Vec<DVector<f64>>,
    pub chi: Vec<DVector<f64>>,
    pub theta: DVector<f64>,
    pub theta_hat: Vec<DVector<f64>>,
    pub x_hat: Vec<DVector<f64>>,
    /// `|x̂ − x|`.
    pub momentum_error: Vec<f64>,
    /// `|M⁻¹(y)(x̂ − x)|`.
    pub velocity_error: Vec<f64>,
    pub pe: PeReport,
}

pub fn run_mech_scenario(sc: &MechScenario) -> Result<MechRun, ScenarioError> {
    let cascade = sc.cascade();
    let path = EstimatorPath::Filtered {
        regression: cascade.clone(),
        alpha: sc.alpha,
        init: sc.filter_init,
    };
    let cfg = EstimatorConfig {
        gamma: sc.gamma.clone(),
        initial: sc.theta0.clone(),
    };
    let obs = Arc::new(assemble(cascade.clone(), path, &cfg)?);
    let s0 = cascade.plant_state(&sc.x0, &sc.y0);
    let obs0 = obs.initial_state(&sc.chi0, &sc.y0)?;
    let mut sys = Coupled::new();
    let plant = sys.add(Block::new("plant", Arc::new(PlantBlock::new(cascade.clone())), s0).feed(Feed::External));
    sys.add(
        Block::new("observer", obs.clone(), obs0)
            .feed(Feed::Output(plant))
            .feed(Feed::External),
    );
    sys.record_external = true;
    let trajectory = coupled_integrate(&sys, &sc.schedule(), sc.dt, sc.horizon)?;

    let n = trajectory.len();
    let row = |g: &str, k: usize| DVector::from_row_slice(trajectory.group(g, k).expect("group"));
    let theta = cascade.z_of(&cascade.plant_state(&sc.x0, &sc.y0)) - &sc.chi0;
    let mut plant_states = Vec::with_capacity(n);
    let mut chi = Vec::with_capacity(n);
    let mut theta_hat = Vec::with_capacity(n);
    let mut x_hat = Vec::with_capacity(n);
    let mut momentum_error = Vec::with_capacity(n);
    let mut velocity_error = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let s = row("plant", k);
        let o = row("observer", k);
        let (x, y) = cascade.split(&s);
        let xh = obs.estimate(&o, &y)?;
        let dx = &xh - &x;
        momentum_error.push(dx.norm());
        velocity_error.push(cascade.velocity(&y, &dx).map_or(f64::NAN, |v| v.norm()));
        samples.push(cascade.phi1(&obs.chi(&o), &y, &row("ext", k)));
        chi.push(obs.chi(&o));
        theta_hat.push(obs.theta_hat(&o));
        x_hat.push(xh);
        plant_states.push(s);
    }
    let pe = pe_monitor(&samples, sc.dt, sc.pe_window)?;
    Ok(MechRun {
        trajectory,
        plant_states,
        chi,
        theta,
        theta_hat,
        x_hat,
        momentum_error,
        velocity_error,
        pe,
    })
}

