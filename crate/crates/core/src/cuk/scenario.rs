use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{CukCascade, CukCase, CukController, CukParams, EstimateSource, IandIObserver};
use crate::framework::{
    assemble, pe_monitor, Cascade, EstimatorConfig, EstimatorPath, FilterInit, FrameworkError,
    LinearRegression, PeReport, PeboObserver, PlantBlock,
};
use crate::sim::{coupled_integrate, Block, Coupled, Feed, InputSchedule, SimError, Trajectory};

/// Set points `(start, |Vd|)` of the reference tracking run.
pub fn reference_schedule() -> Vec<(f64, f64)> {
    vec![(0.0, 25.0), (0.2, 30.0), (0.4, 15.0), (0.6, 5.0), (0.8, 20.0)]
}

#[derive(Clone, Debug, PartialEq)]
pub enum CukObserverKind {
    Pebo {
        alpha: f64,
        gamma: DMatrix<f64>,
        filter_init: FilterInit,
        /// Initial `θ̂`; zero when absent.
        theta0: Option<DVector<f64>>,
    },
    IandI {
        gamma1: f64,
        gamma2: f64,
        /// Initial `ζ`; zero when absent.
        zeta0: Option<DVector<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CukScenario {
    pub params: CukParams,
    pub case: CukCase,
    pub observer: CukObserverKind,
    pub lambda0: f64,
    /// `(start, |Vd|)` pairs.
    pub setpoints: Vec<(f64, f64)>,
    pub dt: f64,
    pub horizon: f64,
    /// Initial unmeasured state in this case's coordinates.
    pub x0: DVector<f64>,
    /// Initial measurement in this case's coordinates.
    pub y0: DVector<f64>,
    /// Initial extension state; `None` picks `φ(0, y(0))` so the observer
    /// starts from `x̂(0) = 0` when `θ̂(0) = 0`.
    pub chi0: Option<DVector<f64>>,
    pub pe_window: f64,
    /// Length of the averaging window that closes each set-point segment.
    pub steady_window: f64,
}

impl CukScenario {
    /// The reference run: `x(0) = (0.5, −1)`, `y(0) = (10, −12)`, 1 s horizon,
    /// five set points, `dt = 1e−5`.
    pub fn reference(case: CukCase, observer: CukObserverKind) -> Self {
        Self {
            params: CukParams::default(),
            case,
            observer,
            lambda0: 1.0,
            setpoints: reference_schedule(),
            dt: crate::sim::DT_CONVERTER,
            horizon: 1.0,
            x0: DVector::from_vec(vec![0.5, -1.0]),
            y0: DVector::from_vec(vec![10.0, -12.0]),
            chi0: None,
            pe_window: 0.1,
            steady_window: 0.02,
        }
    }

    pub fn pebo(case: CukCase, alpha: f64, gamma: DMatrix<f64>) -> Self {
        Self::reference(
            case,
            CukObserverKind::Pebo {
                alpha,
                gamma,
                filter_init: FilterInit::Zero,
                theta0: None,
            },
        )
    }

    pub fn iandi(gamma1: f64, gamma2: f64) -> Self {
        Self::reference(
            CukCase::II,
            CukObserverKind::IandI {
                gamma1,
                gamma2,
                zeta0: None,
            },
        )
    }

    pub fn cascade(&self) -> Arc<CukCascade> {
        self.case.cascade(self.params)
    }

    pub fn initial_chi(&self) -> DVector<f64> {
        self.chi0
            .clone()
            .unwrap_or_else(|| self.cascade().phi(&DVector::zeros(2), &self.y0))
    }
}

/// Mean estimation error over the closing window of one set-point segment.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentMetric {
    pub start: f64,
    pub end: f64,
    pub setpoint: f64,
    /// Mean `|x̂ − x|` over the window.
    pub mean_error: f64,
    /// Mean `|x|` over the same window.
    pub mean_state_norm: f64,
}

impl SegmentMetric {
    pub fn relative_error(&self) -> f64 {
        self.mean_error / self.mean_state_norm
    }
}

/// Everything recorded from one closed-loop run.
pub struct CukRun {
    pub scenario: CukScenario,
    pub trajectory: Trajectory,
    pub plant_states: Vec<DVector<f64>>,
    pub x: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub x_hat: Vec<DVector<f64>>,
    pub error_norm: Vec<f64>,
    pub u: Vec<f64>,
    /// `χ` samples (PEBO only).
    pub chi: Vec<DVector<f64>>,
    /// True `θ = z(0) − χ(0)` (PEBO only).
    pub theta: Option<DVector<f64>>,
    /// `θ̂` samples (PEBO only).
    pub theta_hat: Vec<DVector<f64>>,
    pub segments: Vec<SegmentMetric>,
    /// Excitation of the raw regressor `Φ1(u)` along the run (PEBO only).
    pub pe: Option<PeReport>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Framework(#[from] FrameworkError),
}

enum Built {
    Pebo(Arc<PeboObserver>),
    IandI(IandIObserver),
}

/// Runs the plant, the chosen observer and the certainty-equivalent
/// controller in closed loop over the scenario's set-point schedule.
pub fn run_cuk_scenario(sc: &CukScenario) -> Result<CukRun, ScenarioError> {
    sc.params.validate()?;
    let cascade = sc.cascade();
    let schedule = InputSchedule::steps(&sc.setpoints, sc.horizon)?;
    let plant0 = cascade.plant_state(&sc.x0, &sc.y0);

    let mut sys = Coupled::new();
    let plant = sys.add(
        Block::new("plant", Arc::new(PlantBlock::new(cascade.clone())), plant0.clone()).feed(Feed::Held),
    );
    let (built, source) = match &sc.observer {
        CukObserverKind::Pebo {
            alpha,
            gamma,
            filter_init,
            theta0,
        } => {
            let path = EstimatorPath::Filtered {
                regression: cascade.clone(),
                alpha: *alpha,
                init: *filter_init,
            };
            let cfg = EstimatorConfig {
                gamma: gamma.clone(),
                initial: theta0.clone(),
            };
            let obs = Arc::new(assemble(cascade.clone(), path, &cfg)?);
            let x0 = obs.initial_state(&sc.initial_chi(), &sc.y0)?;
            sys.add(
                Block::new("observer", obs.clone(), x0)
                    .feed(Feed::Output(plant))
                    .feed(Feed::Held),
            );
            (Built::Pebo(obs), EstimateSource::Pebo(cascade.clone()))
        }
        CukObserverKind::IandI {
            gamma1,
            gamma2,
            zeta0,
        } => {
            if sc.case != CukCase::II {
                return Err(FrameworkError::InvalidArgument(
                    "the I&I observer needs Case II measurements (v2, i3)".into(),
                )
                .into());
            }
            let obs = IandIObserver::new(sc.params, *gamma1, *gamma2)?;
            let z0 = zeta0.clone().unwrap_or_else(|| DVector::zeros(2));
            sys.add(
                Block::new("observer", Arc::new(obs), z0)
                    .feed(Feed::Output(plant))
                    .feed(Feed::Held),
            );
            (Built::IandI(obs), EstimateSource::IandI(obs))
        }
    };
    let sys = sys.with_held(Arc::new(CukController {
        params: sc.params,
        lambda0: sc.lambda0,
        case: sc.case,
        source,
        plant,
        observer: 1,
    }));

    let trajectory = coupled_integrate(&sys, &schedule, sc.dt, sc.horizon)?;
    let n = trajectory.len();
    let row_vec = |group: &str, k: usize| DVector::from_row_slice(trajectory.group(group, k).expect("group"));

    let mut plant_states = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut x_hat = Vec::with_capacity(n);
    let mut error_norm = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut chi = Vec::new();
    let mut theta_hat = Vec::new();
    for k in 0..n {
        let s = row_vec("plant", k);
        let o = row_vec("observer", k);
        let (xk, yk) = cascade.split(&s);
        let xh = match &built {
            Built::Pebo(obs) => {
                chi.push(obs.chi(&o));
                theta_hat.push(obs.theta_hat(&o));
                obs.estimate(&o, &yk)?
            }
            Built::IandI(obs) => obs.estimate(&o, &yk),
        };
        error_norm.push((&xh - &xk).norm());
        u.push(trajectory.group("held", k).expect("held")[0]);
        plant_states.push(s);
        x.push(xk);
        y.push(yk);
        x_hat.push(xh);
    }

    let theta = match &built {
        Built::Pebo(_) => Some(cascade.z_of(&plant_states[0]) - sc.initial_chi()),
        Built::IandI(_) => None,
    };
    let pe = match &built {
        Built::Pebo(_) => {
            let samples: Vec<DMatrix<f64>> = (0..n)
                .map(|k| cascade.phi1(&chi[k], &y[k], &DVector::from_element(1, u[k])))
                .collect();
            Some(pe_monitor(&samples, sc.dt, sc.pe_window)?)
        }
        Built::IandI(_) => None,
    };
    let segments = segment_metrics(sc, &x, &error_norm);

    Ok(CukRun {
        scenario: sc.clone(),
        trajectory,
        plant_states,
        x,
        y,
        x_hat,
        error_norm,
        u,
        chi,
        theta,
        theta_hat,
        segments,
        pe,
    })
}

fn segment_metrics(sc: &CukScenario, x: &[DVector<f64>], err: &[f64]) -> Vec<SegmentMetric> {
    let n = err.len();
    let last_t = (n - 1) as f64 * sc.dt;
    let mut out = Vec::new();
    for (i, &(start, vd)) in sc.setpoints.iter().enumerate() {
        let end = sc.setpoints.get(i + 1).map_or(last_t, |p| p.0);
        let is_last = i + 1 == sc.setpoints.len();
        let from = ((end - sc.steady_window).max(start) / sc.dt).round() as usize;
        let to = if is_last {
            n
        } else {
            ((end / sc.dt).round() as usize).min(n)
        };
        if to <= from {
            continue;
        }
        let len = (to - from) as f64;
        let mean_error = err[from..to].iter().sum::<f64>() / len;
        let mean_state_norm = x[from..to].iter().map(|v| v.norm()).sum::<f64>() / len;
        out.push(SegmentMetric {
            start,
            end,
            setpoint: vd,
            mean_error,
            mean_state_norm,
        });
    }
    out
}
