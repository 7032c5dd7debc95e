use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{flux_cascade, CurrentRegression, FluxCascade, FluxMagnitudeRegression, PmsmMeasurement, PmsmParams};
use crate::cuk::ScenarioError;
use crate::framework::{
    assemble, pe_monitor, Cascade, EstimatorConfig, EstimatorPath, FilterInit, LinearRegression,
    PeReport, PlantBlock, StaticRegression,
};
use crate::sim::{coupled_integrate, Block, Coupled, Feed, InputSchedule, Trajectory};

/// Estimation path and its gains.
#[derive(Clone, Debug, PartialEq)]
pub enum PmsmPath {
    /// Filtered current regression; treats `q̇` as measured.
    Dynamic {
        alpha: f64,
        gamma: DMatrix<f64>,
        filter_init: FilterInit,
    },
    /// Static flux-magnitude regression; currents only.
    Static { gamma: DMatrix<f64> },
}

impl PmsmPath {
    fn measured(&self) -> PmsmMeasurement {
        match self {
            PmsmPath::Dynamic { .. } => PmsmMeasurement::CurrentsAndSpeed,
            PmsmPath::Static { .. } => PmsmMeasurement::Currents,
        }
    }
}

/// Rotating stator voltage `V·(cos ψ, sin ψ)` whose electrical speed `ψ̇`
/// ramps linearly from zero to `speed` over `ramp` seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PmsmDrive {
    pub amplitude: f64,
    /// Final electrical speed, rad/s.
    pub speed: f64,
    pub ramp: f64,
}

impl PmsmDrive {
    pub const REST: PmsmDrive = PmsmDrive {
        amplitude: 0.0,
        speed: 0.0,
        ramp: 0.0,
    };

    pub fn angle(&self, t: f64) -> f64 {
        if self.ramp <= 0.0 {
            self.speed * t
        } else if t < self.ramp {
            0.5 * self.speed * t * t / self.ramp
        } else {
            self.speed * (t - 0.5 * self.ramp)
        }
    }

    pub fn voltage(&self, t: f64) -> DVector<f64> {
        let a = self.angle(t);
        DVector::from_vec(vec![self.amplitude * a.cos(), self.amplitude * a.sin()])
    }

    pub fn schedule(&self, horizon: f64) -> InputSchedule {
        let d = *self;
        InputSchedule::function(2, horizon, move |t| d.voltage(t))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PmsmScenario {
    pub params: PmsmParams,
    pub path: PmsmPath,
    pub drive: PmsmDrive,
    pub dt: f64,
    pub horizon: f64,
    /// Initial plant state `(i1, i2, q, q̇)`.
    pub state0: DVector<f64>,
    pub chi0: DVector<f64>,
    /// Initial `θ̂` (dynamic) or `η̂` (static); zero when absent.
    pub initial: Option<DVector<f64>>,
    pub pe_window: f64,
}

impl PmsmScenario {
    /// A 5 s run at `dt = 1e−4` from rest with a 6 V drive ramped to 100 rad/s.
    pub fn driven(path: PmsmPath) -> Self {
        Self {
            params: PmsmParams::default(),
            path,
            drive: PmsmDrive {
                amplitude: 6.0,
                speed: 100.0,
                ramp: 1.0,
            },
            dt: 1e-4,
            horizon: 5.0,
            state0: DVector::from_vec(vec![0.0, 0.0, 0.4, 0.0]),
            chi0: DVector::from_vec(vec![0.02, -0.05]),
            initial: None,
            pe_window: 0.5,
        }
    }

    pub fn cascade(&self) -> Arc<FluxCascade> {
        flux_cascade(self.params, self.path.measured())
    }

    /// True `θ = λ(0) − χ(0)`.
    pub fn theta(&self) -> DVector<f64> {
        self.params.flux(&self.state0) - &self.chi0
    }

    /// True parameter vector of the chosen path: `θ` or `η`.
    pub fn true_params(&self) -> DVector<f64> {
        match self.path {
            PmsmPath::Dynamic { .. } => self.theta(),
            PmsmPath::Static { .. } => FluxMagnitudeRegression { params: self.params }.eta_of(&self.theta()),
        }
    }
}

pub struct PmsmRun {
    pub scenario: PmsmScenario,
    pub trajectory: Trajectory,
    pub plant_states: Vec<DVector<f64>>,
    pub chi: Vec<DVector<f64>>,
    /// `θ̂` or `η̂` samples.
    pub params_hat: Vec<DVector<f64>>,
    pub theta: DVector<f64>,
    /// `None` where `χ + θ̂ − L i` vanishes.
    pub q_hat: Vec<Option<f64>>,
    /// Shortest-arc `q̂ − q`.
    pub q_error: Vec<Option<f64>>,
    /// `max_t ||λ − L i| − λm| / λm`.
    pub flux_deviation: f64,
    /// Excitation of `Φ1` (dynamic) or `Sᵀ` (static).
    pub pe: PeReport,
}

pub fn run_pmsm_scenario(sc: &PmsmScenario) -> Result<PmsmRun, ScenarioError> {
    let p = sc.params;
    p.validate()?;
    let cascade = sc.cascade();
    let drive = sc.drive.schedule(sc.horizon);
    let (path, dim) = match &sc.path {
        PmsmPath::Dynamic {
            alpha,
            filter_init,
            gamma,
        } => (
            EstimatorPath::Filtered {
                regression: Arc::new(CurrentRegression { params: p }),
                alpha: *alpha,
                init: *filter_init,
            },
            gamma,
        ),
        PmsmPath::Static { gamma } => (
            EstimatorPath::Static {
                regression: Arc::new(FluxMagnitudeRegression { params: p }),
            },
            gamma,
        ),
    };
    let cfg = EstimatorConfig {
        gamma: dim.clone(),
        initial: sc.initial.clone(),
    };
    let obs = Arc::new(assemble(cascade.clone(), path, &cfg)?);
    let (_, y0) = cascade.split(&sc.state0);
    let obs0 = obs.initial_state(&sc.chi0, &y0)?;

    let mut sys = Coupled::new();
    let plant = sys.add(
        Block::new("plant", Arc::new(PlantBlock::new(cascade.clone())), sc.state0.clone()).feed(Feed::External),
    );
    sys.add(
        Block::new("observer", obs.clone(), obs0)
            .feed(Feed::Output(plant))
            .feed(Feed::External),
    );
    sys.record_external = true;
    let trajectory = coupled_integrate(&sys, &drive, sc.dt, sc.horizon)?;

    let n = trajectory.len();
    let row = |g: &str, k: usize| DVector::from_row_slice(trajectory.group(g, k).expect("group"));
    let mut plant_states = Vec::with_capacity(n);
    let mut chi = Vec::with_capacity(n);
    let mut params_hat = Vec::with_capacity(n);
    let mut q_hat = Vec::with_capacity(n);
    let mut q_error = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(n);
    let mut flux_deviation: f64 = 0.0;
    let current = CurrentRegression { params: p };
    let magnitude = FluxMagnitudeRegression { params: p };
    for k in 0..n {
        let s = row("plant", k);
        let o = row("observer", k);
        let (x, y) = cascade.split(&s);
        let c = obs.chi(&o);
        let u = row("ext", k);
        let qh = obs.estimate(&o, &y).ok();
        q_error.push(qh.as_ref().map(|v| cascade.x_error(v, &x)[0]));
        q_hat.push(qh.map(|v| v[0]));
        let mag = (p.flux(&s) - DVector::from_vec(vec![p.l * s[0], p.l * s[1]])).norm();
        flux_deviation = flux_deviation.max((mag - p.lambda_m).abs() / p.lambda_m);
        samples.push(match sc.path {
            PmsmPath::Dynamic { .. } => current.phi1(&c, &y, &u),
            PmsmPath::Static { .. } => magnitude.eval(&c, &y).1,
        });
        params_hat.push(obs.params(&o));
        chi.push(c);
        plant_states.push(s);
    }
    let pe = pe_monitor(&samples, sc.dt, sc.pe_window)?;
    Ok(PmsmRun {
        scenario: sc.clone(),
        trajectory,
        plant_states,
        chi,
        params_hat,
        theta: sc.theta(),
        q_hat,
        q_error,
        flux_deviation,
        pe,
    })
}
