//! Scenario configuration: TOML text with one table per concern.
//!
//! ```toml
//! kind = "cuk-case1"
//! dt = 1e-5
//! horizon = 1.0
//!
//! [observer]
//! alpha = 0.5
//! gamma = 0.001          # scalar, diagonal list, or row-major matrix
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use pebo::cuk::{CukCase, CukObserverKind, CukParams, CukScenario};
use pebo::framework::FilterInit;
use pebo::lti::LtiSystem;
use pebo::mech::{
    ConstantInertia, ExpressionSystem, MechScenario, MechSystem, Pendulum, TrigTerm, VaryingInertia,
    VaryingInertiaFactor,
};
use pebo::pmsm::{PmsmDrive, PmsmParams, PmsmPath, PmsmScenario};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    CukCase1,
    CukCase2,
    CukIandi,
    Pmsm,
    Mech,
    LtiAnalyze,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::CukCase1 => "cuk-case1",
            Kind::CukCase2 => "cuk-case2",
            Kind::CukIandi => "cuk-iandi",
            Kind::Pmsm => "pmsm",
            Kind::Mech => "mech",
            Kind::LtiAnalyze => "lti-analyze",
        }
    }
}

/// A gain given as a scalar, a diagonal or a full row-major matrix.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterInitSpec {
    Zero,
    TransientFree,
}

impl From<FilterInitSpec> for FilterInit {
    fn from(f: FilterInitSpec) -> Self {
        match f {
            FilterInitSpec::Zero => FilterInit::Zero,
            FilterInitSpec::TransientFree => FilterInit::TransientFree,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSection {
    pub alpha: Option<f64>,
    pub gamma: Option<GainSpec>,
    pub filter_init: Option<FilterInitSpec>,
    pub theta0: Option<Vec<f64>>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub zeta0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CukSection {
    pub l1: Option<f64>,
    pub c2: Option<f64>,
    pub l3: Option<f64>,
    pub c4: Option<f64>,
    pub e: Option<f64>,
    pub g: Option<f64>,
    pub lambda0: Option<f64>,
    /// `[[start, |Vd|], ...]`.
    pub setpoints: Option<Vec<[f64; 2]>>,
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub chi0: Option<Vec<f64>>,
    pub pe_window: Option<f64>,
    pub steady_window: Option<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PmsmPathSpec {
    Dynamic,
    Static,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmsmSection {
    pub l: Option<f64>,
    pub r: Option<f64>,
    pub lambda_m: Option<f64>,
    pub n_p: Option<u32>,
    pub j: Option<f64>,
    pub f: Option<f64>,
    pub tau: Option<f64>,
    pub path: Option<PmsmPathSpec>,
    pub drive_amplitude: Option<f64>,
    pub drive_speed: Option<f64>,
    pub drive_ramp: Option<f64>,
    /// `(i1, i2, q, q̇)`.
    pub state0: Option<Vec<f64>>,
    pub chi0: Option<Vec<f64>>,
    pub pe_window: Option<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechExample {
    Pendulum,
    VaryingInertia,
    TwoMass,
    Expression,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorSpec {
    InverseSqrt,
    Unit,
}

impl From<FactorSpec> for VaryingInertiaFactor {
    fn from(f: FactorSpec) -> Self {
        match f {
            FactorSpec::InverseSqrt => VaryingInertiaFactor::InverseSqrt,
            FactorSpec::Unit => VaryingInertiaFactor::Unit,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechSection {
    pub example: Option<MechExample>,
    pub mass: Option<f64>,
    pub length: Option<f64>,
    pub gravity: Option<f64>,
    pub j1: Option<f64>,
    pub j2: Option<f64>,
    pub factor: Option<FactorSpec>,
    /// Rows `[coeff, y power, sin power, cos power]`.
    pub inertia_terms: Option<Vec<[f64; 4]>>,
    pub potential_terms: Option<Vec<[f64; 4]>>,
    pub input_gain: Option<f64>,
    pub torque_amplitude: Option<f64>,
    pub torque_frequency: Option<f64>,
    pub y0: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    pub chi0: Option<Vec<f64>>,
    pub pe_window: Option<f64>,
    /// Position range `[lo, hi]` sampled by the skew-symmetry check.
    pub check_range: Option<[f64; 2]>,
    pub check_samples: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LtiSection {
    pub a11: Option<Vec<Vec<f64>>>,
    pub a12: Option<Vec<Vec<f64>>>,
    pub a21: Option<Vec<Vec<f64>>>,
    pub a22: Option<Vec<Vec<f64>>>,
    pub b1: Option<Vec<Vec<f64>>>,
    pub b2: Option<Vec<Vec<f64>>>,
    pub nz: Option<usize>,
    /// Number of random systems for the identifiability sweep.
    pub sweep: Option<usize>,
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Kind,
    dt: Option<f64>,
    horizon: Option<f64>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    /// Keep every n-th sample in the CSV artifacts.
    csv_stride: Option<usize>,
    #[serde(default)]
    observer: ObserverSection,
    #[serde(default)]
    cuk: CukSection,
    #[serde(default)]
    pmsm: PmsmSection,
    #[serde(default)]
    mech: MechSection,
    #[serde(default)]
    lti: LtiSection,
}

pub struct MechConfig {
    pub scenario: MechScenario,
    pub check_range: [f64; 2],
    pub check_samples: usize,
}

pub struct LtiConfig {
    pub system: LtiSystem,
    pub nz: usize,
    pub sweep: usize,
    pub dt: f64,
    pub horizon: f64,
    pub alpha: f64,
    pub gamma: Option<GainSpec>,
    pub x0: DVector<f64>,
    pub y0: DVector<f64>,
}

pub enum Plan {
    Cuk(CukScenario),
    Pmsm(PmsmScenario),
    Mech(MechConfig),
    Lti(LtiConfig),
}

pub struct Config {
    pub kind: Kind,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub csv_stride: usize,
    pub plan: Plan,
}

impl Config {
    pub fn dt(&self) -> f64 {
        match &self.plan {
            Plan::Cuk(s) => s.dt,
            Plan::Pmsm(s) => s.dt,
            Plan::Mech(m) => m.scenario.dt,
            Plan::Lti(l) => l.dt,
        }
    }

    pub fn horizon(&self) -> f64 {
        match &self.plan {
            Plan::Cuk(s) => s.horizon,
            Plan::Pmsm(s) => s.horizon,
            Plan::Mech(m) => m.scenario.horizon,
            Plan::Lti(l) => l.horizon,
        }
    }
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be non-negative and finite, got {v}")))
    }
}

fn finite(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(key, "must be finite"))
    }
}

fn vector(key: &str, v: Option<&Vec<f64>>, len: usize, default: DVector<f64>) -> Result<DVector<f64>, CliError> {
    match v {
        None => Ok(default),
        Some(v) if v.len() != len => Err(invalid(key, format!("expected {len} entries, got {}", v.len()))),
        Some(v) => {
            for (i, x) in v.iter().enumerate() {
                finite(&format!("{key}[{i}]"), *x)?;
            }
            Ok(DVector::from_column_slice(v))
        }
    }
}

fn matrix(key: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(invalid(key, "rows have different lengths"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|x| !x.is_finite()) {
        return Err(invalid(key, "entries must be finite"));
    }
    Ok(DMatrix::from_row_slice(r, c, &flat))
}

/// Gain matrix of the given dimension; must be symmetric positive definite.
pub fn gain(key: &str, spec: &GainSpec, dim: usize) -> Result<DMatrix<f64>, CliError> {
    let m = match spec {
        GainSpec::Scalar(g) => DMatrix::identity(dim, dim) * *g,
        GainSpec::Diagonal(d) => {
            if d.len() != dim {
                return Err(invalid(key, format!("expected {dim} diagonal entries, got {}", d.len())));
            }
            DMatrix::from_diagonal(&DVector::from_column_slice(d))
        }
        GainSpec::Matrix(rows) => {
            let m = matrix(key, rows)?;
            if m.shape() != (dim, dim) {
                return Err(invalid(key, format!("expected a {dim}x{dim} matrix")));
            }
            m
        }
    };
    if m.iter().any(|x| !x.is_finite()) {
        return Err(invalid(key, "entries must be finite"));
    }
    if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) || m.clone().cholesky().is_none() {
        return Err(invalid(key, "must be symmetric positive definite"));
    }
    Ok(m)
}

fn grid(raw: &RawConfig, dt: f64, horizon: f64) -> Result<(f64, f64), CliError> {
    let dt = positive("dt", raw.dt.unwrap_or(dt))?;
    let horizon = positive("horizon", raw.horizon.unwrap_or(horizon))?;
    if dt > horizon {
        return Err(invalid("dt", format!("step {dt} exceeds the horizon {horizon}")));
    }
    if horizon / dt > 5e7 {
        return Err(invalid("horizon", "more than 5e7 steps"));
    }
    Ok((dt, horizon))
}

fn filter_init(o: &ObserverSection) -> FilterInit {
    o.filter_init.map(FilterInit::from).unwrap_or_default()
}

fn cuk_plan(raw: &RawConfig) -> Result<CukScenario, CliError> {
    let c = &raw.cuk;
    let o = &raw.observer;
    let d = CukParams::default();
    let params = CukParams {
        l1: positive("cuk.l1", c.l1.unwrap_or(d.l1))?,
        c2: positive("cuk.c2", c.c2.unwrap_or(d.c2))?,
        l3: positive("cuk.l3", c.l3.unwrap_or(d.l3))?,
        c4: positive("cuk.c4", c.c4.unwrap_or(d.c4))?,
        e: positive("cuk.e", c.e.unwrap_or(d.e))?,
        g: positive("cuk.g", c.g.unwrap_or(d.g))?,
    };
    let (case, observer) = match raw.kind {
        Kind::CukCase1 | Kind::CukCase2 => {
            let (case, alpha, gamma) = if raw.kind == Kind::CukCase1 {
                (CukCase::I, 0.5, GainSpec::Scalar(1e-3))
            } else {
                (CukCase::II, 1.0, GainSpec::Diagonal(vec![1.0, 10.0]))
            };
            let alpha = positive("observer.alpha", o.alpha.unwrap_or(alpha))?;
            let gamma = gain("observer.gamma", o.gamma.as_ref().unwrap_or(&gamma), 2)?;
            let theta0 = o
                .theta0
                .as_ref()
                .map(|v| vector("observer.theta0", Some(v), 2, DVector::zeros(2)))
                .transpose()?;
            (
                case,
                CukObserverKind::Pebo {
                    alpha,
                    gamma,
                    filter_init: filter_init(o),
                    theta0,
                },
            )
        }
        Kind::CukIandi => (
            CukCase::II,
            CukObserverKind::IandI {
                gamma1: positive("observer.gamma1", o.gamma1.unwrap_or(25.0))?,
                gamma2: positive("observer.gamma2", o.gamma2.unwrap_or(1.0))?,
                zeta0: o
                    .zeta0
                    .as_ref()
                    .map(|v| vector("observer.zeta0", Some(v), 2, DVector::zeros(2)))
                    .transpose()?,
            },
        ),
        _ => unreachable!("not a converter kind"),
    };
    let mut sc = CukScenario::reference(case, observer);
    sc.params = params;
    let (dt, horizon) = grid(raw, sc.dt, sc.horizon)?;
    sc.dt = dt;
    sc.horizon = horizon;
    sc.lambda0 = non_negative("cuk.lambda0", c.lambda0.unwrap_or(sc.lambda0))?;
    if let Some(sp) = &c.setpoints {
        if sp.is_empty() {
            return Err(invalid("cuk.setpoints", "at least one set point is required"));
        }
        if sp[0][0] != 0.0 {
            return Err(invalid("cuk.setpoints[0]", "the schedule must start at t = 0"));
        }
        for (i, w) in sp.windows(2).enumerate() {
            if w[1][0] <= w[0][0] {
                return Err(invalid(&format!("cuk.setpoints[{}]", i + 1), "start times must increase"));
            }
        }
        for (i, p) in sp.iter().enumerate() {
            positive(&format!("cuk.setpoints[{i}][1]"), p[1])?;
            if p[0] >= horizon {
                return Err(invalid(&format!("cuk.setpoints[{i}][0]"), "starts after the horizon"));
            }
        }
        sc.setpoints = sp.iter().map(|p| (p[0], p[1])).collect();
    }
    sc.x0 = vector("cuk.x0", c.x0.as_ref(), 2, sc.x0.clone())?;
    sc.y0 = vector("cuk.y0", c.y0.as_ref(), 2, sc.y0.clone())?;
    sc.chi0 = c
        .chi0
        .as_ref()
        .map(|v| vector("cuk.chi0", Some(v), 2, DVector::zeros(2)))
        .transpose()?;
    sc.pe_window = positive("cuk.pe_window", c.pe_window.unwrap_or(sc.pe_window))?;
    sc.steady_window = positive("cuk.steady_window", c.steady_window.unwrap_or(sc.steady_window))?;
    if sc.pe_window > horizon {
        return Err(invalid("cuk.pe_window", "longer than the horizon"));
    }
    Ok(sc)
}

fn pmsm_plan(raw: &RawConfig) -> Result<PmsmScenario, CliError> {
    let c = &raw.pmsm;
    let o = &raw.observer;
    let d = PmsmParams::default();
    let params = PmsmParams {
        l: positive("pmsm.l", c.l.unwrap_or(d.l))?,
        r: non_negative("pmsm.r", c.r.unwrap_or(d.r))?,
        lambda_m: positive("pmsm.lambda_m", c.lambda_m.unwrap_or(d.lambda_m))?,
        n_p: match c.n_p.unwrap_or(d.n_p) {
            0 => return Err(invalid("pmsm.n_p", "must be a positive integer")),
            n => n,
        },
        j: positive("pmsm.j", c.j.unwrap_or(d.j))?,
        f: non_negative("pmsm.f", c.f.unwrap_or(d.f))?,
        tau: finite("pmsm.tau", c.tau.unwrap_or(d.tau))?,
    };
    let path = match c.path.unwrap_or(PmsmPathSpec::Static) {
        PmsmPathSpec::Dynamic => PmsmPath::Dynamic {
            alpha: positive("observer.alpha", o.alpha.unwrap_or(50.0))?,
            gamma: gain("observer.gamma", o.gamma.as_ref().unwrap_or(&GainSpec::Scalar(1e-7)), 2)?,
            filter_init: filter_init(o),
        },
        PmsmPathSpec::Static => PmsmPath::Static {
            gamma: gain(
                "observer.gamma",
                o.gamma.as_ref().unwrap_or(&GainSpec::Diagonal(vec![3e3, 3e3, 30.0])),
                3,
            )?,
        },
    };
    let param_dim = match path {
        PmsmPath::Dynamic { .. } => 2,
        PmsmPath::Static { .. } => 3,
    };
    let mut sc = PmsmScenario::driven(path);
    sc.params = params;
    let (dt, horizon) = grid(raw, sc.dt, sc.horizon)?;
    sc.dt = dt;
    sc.horizon = horizon;
    sc.drive = PmsmDrive {
        amplitude: non_negative("pmsm.drive_amplitude", c.drive_amplitude.unwrap_or(sc.drive.amplitude))?,
        speed: finite("pmsm.drive_speed", c.drive_speed.unwrap_or(sc.drive.speed))?,
        ramp: non_negative("pmsm.drive_ramp", c.drive_ramp.unwrap_or(sc.drive.ramp))?,
    };
    sc.state0 = vector("pmsm.state0", c.state0.as_ref(), 4, sc.state0.clone())?;
    sc.chi0 = vector("pmsm.chi0", c.chi0.as_ref(), 2, sc.chi0.clone())?;
    sc.initial = o
        .theta0
        .as_ref()
        .map(|v| vector("observer.theta0", Some(v), param_dim, DVector::zeros(param_dim)))
        .transpose()?;
    sc.pe_window = positive("pmsm.pe_window", c.pe_window.unwrap_or(sc.pe_window))?;
    if sc.pe_window > horizon {
        return Err(invalid("pmsm.pe_window", "longer than the horizon"));
    }
    Ok(sc)
}

fn terms(key: &str, rows: &[[f64; 4]]) -> Result<Vec<TrigTerm>, CliError> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let k = format!("{key}[{i}]");
            let pow = |v: f64, what: &str| {
                if v >= 0.0 && v.fract() == 0.0 && v <= 16.0 {
                    Ok(v as u32)
                } else {
                    Err(invalid(&k, format!("{what} must be an integer in 0..=16")))
                }
            };
            Ok(TrigTerm {
                coeff: finite(&k, r[0])?,
                pow: pow(r[1], "y power")?,
                sin_pow: pow(r[2], "sin power")?,
                cos_pow: pow(r[3], "cos power")?,
            })
        })
        .collect()
}

fn mech_plan(raw: &RawConfig) -> Result<MechConfig, CliError> {
    let c = &raw.mech;
    let o = &raw.observer;
    let factor = c.factor.map(VaryingInertiaFactor::from).unwrap_or(VaryingInertiaFactor::InverseSqrt);
    let system: Arc<dyn MechSystem> = match c.example.unwrap_or(MechExample::VaryingInertia) {
        MechExample::Pendulum => {
            let d = Pendulum::default();
            Arc::new(Pendulum {
                mass: positive("mech.mass", c.mass.unwrap_or(d.mass))?,
                length: positive("mech.length", c.length.unwrap_or(d.length))?,
                gravity: finite("mech.gravity", c.gravity.unwrap_or(d.gravity))?,
            })
        }
        MechExample::VaryingInertia => {
            let d = VaryingInertia::default();
            Arc::new(VaryingInertia {
                j1: positive("mech.j1", c.j1.unwrap_or(d.j1))?,
                j2: non_negative("mech.j2", c.j2.unwrap_or(d.j2))?,
                factor,
            })
        }
        MechExample::TwoMass => Arc::new(ConstantInertia::two_mass()),
        MechExample::Expression => {
            let inertia = terms(
                "mech.inertia_terms",
                c.inertia_terms
                    .as_ref()
                    .ok_or_else(|| invalid("mech.inertia_terms", "required for the expression example"))?,
            )?;
            let potential = terms("mech.potential_terms", c.potential_terms.as_deref().unwrap_or(&[]))?;
            Arc::new(ExpressionSystem {
                inertia,
                potential,
                input_gain: finite("mech.input_gain", c.input_gain.unwrap_or(1.0))?,
                factor,
            })
        }
    };
    let s = system.dof();
    let mut sc = MechScenario::new(system);
    let (dt, horizon) = grid(raw, sc.dt, sc.horizon)?;
    sc.dt = dt;
    sc.horizon = horizon;
    sc.alpha = positive("observer.alpha", o.alpha.unwrap_or(sc.alpha))?;
    if let Some(g) = &o.gamma {
        sc.gamma = gain("observer.gamma", g, s)?;
    }
    sc.filter_init = filter_init(o);
    sc.theta0 = o
        .theta0
        .as_ref()
        .map(|v| vector("observer.theta0", Some(v), s, DVector::zeros(s)))
        .transpose()?;
    sc.torque_amplitude = finite("mech.torque_amplitude", c.torque_amplitude.unwrap_or(sc.torque_amplitude))?;
    sc.torque_frequency = finite("mech.torque_frequency", c.torque_frequency.unwrap_or(sc.torque_frequency))?;
    sc.y0 = vector("mech.y0", c.y0.as_ref(), s, sc.y0.clone())?;
    sc.x0 = vector("mech.x0", c.x0.as_ref(), s, sc.x0.clone())?;
    sc.chi0 = vector("mech.chi0", c.chi0.as_ref(), s, sc.chi0.clone())?;
    sc.pe_window = positive("mech.pe_window", c.pe_window.unwrap_or(sc.pe_window))?;
    if sc.pe_window > horizon {
        return Err(invalid("mech.pe_window", "longer than the horizon"));
    }
    let check_range = c.check_range.unwrap_or([-3.0, 3.0]);
    if !(check_range[0].is_finite() && check_range[1].is_finite() && check_range[0] < check_range[1]) {
        return Err(invalid("mech.check_range", "must be an increasing finite pair"));
    }
    let check_samples = c.check_samples.unwrap_or(100);
    if check_samples < 2 {
        return Err(invalid("mech.check_samples", "at least 2 samples"));
    }
    if s > 1 && c.check_range.is_some() {
        return Err(invalid("mech.check_range", "only supported for one degree of freedom"));
    }
    Ok(MechConfig {
        scenario: sc,
        check_range,
        check_samples,
    })
}

fn lti_plan(raw: &RawConfig) -> Result<LtiConfig, CliError> {
    let c = &raw.lti;
    let a11 = matrix("lti.a11", c.a11.as_ref().ok_or_else(|| invalid("lti.a11", "required"))?)?;
    let a21 = matrix("lti.a21", c.a21.as_ref().ok_or_else(|| invalid("lti.a21", "required"))?)?;
    let (nx, ny) = (a11.nrows(), a21.nrows());
    if nx == 0 || ny == 0 {
        return Err(invalid("lti.a11", "n_x and n_y must be positive"));
    }
    let opt = |key: &str, v: &Option<Vec<Vec<f64>>>, r: usize, cdef: usize| match v {
        Some(rows) => matrix(key, rows),
        None => Ok(DMatrix::zeros(r, cdef)),
    };
    let b1 = opt("lti.b1", &c.b1, nx, 0)?;
    let m = b1.ncols();
    let b2 = match &c.b2 {
        Some(rows) => matrix("lti.b2", rows)?,
        None => DMatrix::zeros(ny, m),
    };
    let system = LtiSystem::new(
        a11,
        opt("lti.a12", &c.a12, nx, ny)?,
        a21,
        opt("lti.a22", &c.a22, ny, ny)?,
        b1,
        b2,
    )
    .map_err(|e| invalid("lti", e))?;
    let nz = c.nz.unwrap_or(nx);
    if nz < nx {
        return Err(invalid("lti.nz", format!("must be at least n_x = {nx}")));
    }
    let (dt, horizon) = grid(raw, 1e-3, 5.0)?;
    Ok(LtiConfig {
        system,
        nz,
        sweep: c.sweep.unwrap_or(0),
        dt,
        horizon,
        alpha: positive("observer.alpha", raw.observer.alpha.unwrap_or(1.0))?,
        gamma: raw.observer.gamma.clone(),
        x0: vector("lti.x0", c.x0.as_ref(), nx, DVector::from_element(nx, 1.0))?,
        y0: vector("lti.y0", c.y0.as_ref(), ny, DVector::zeros(ny))?,
    })
}

pub fn parse(text: &str) -> Result<Config, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let plan = match raw.kind {
        Kind::CukCase1 | Kind::CukCase2 | Kind::CukIandi => Plan::Cuk(cuk_plan(&raw)?),
        Kind::Pmsm => Plan::Pmsm(pmsm_plan(&raw)?),
        Kind::Mech => Plan::Mech(mech_plan(&raw)?),
        Kind::LtiAnalyze => Plan::Lti(lti_plan(&raw)?),
    };
    let csv_stride = match raw.csv_stride {
        Some(0) => return Err(invalid("csv_stride", "must be at least 1")),
        Some(n) => n,
        None => match raw.kind {
            Kind::CukCase1 | Kind::CukCase2 | Kind::CukIandi | Kind::Pmsm => 10,
            Kind::Mech | Kind::LtiAnalyze => 1,
        },
    };
    Ok(Config {
        kind: raw.kind,
        seed: raw.seed.unwrap_or(0),
        output: raw.output,
        csv_stride,
        plan,
    })
}

pub fn load(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}
