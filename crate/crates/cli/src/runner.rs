//! Executes a parsed configuration and collects summary lines, invariant
//! checks, comparison metrics and CSV artifacts.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use pebo::cuk::{run_cuk_scenario, CukCase, CukObserverKind, CukScenario};
use pebo::framework::checks::{offset_drift, static_regression_residual};
use pebo::framework::{
    assemble, pe_monitor, Cascade, EstimatorConfig, EstimatorPath, FilterInit, LinearRegression, PeReport,
    PlantBlock,
};
use pebo::lti::{
    identifiability_sweep, identifiable, lti_regression, pbh_observable, solve_cascade, CascadeSolution,
    LtiSystem,
};
use pebo::mech::{check_assumption3, mech_field, run_mech_scenario, MechSystem};
use pebo::pmsm::{
    flux_cascade, run_pmsm_scenario, CurrentRegression, FluxMagnitudeRegression, PmsmMeasurement, PmsmPath,
    PmsmScenario,
};
use pebo::sim::{coupled_integrate, integrate, Block, Coupled, Feed, InputSchedule, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checks::{left_inverse, offset_random, regression_nullity, uniform_vec, Check};
use crate::config::{gain, Config, Kind, LtiConfig, MechConfig, Plan};
use crate::CliError;

/// Error metric over one comparison window.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentRow {
    pub start: f64,
    pub end: f64,
    /// Converter set point `|Vd|`, when the run has a schedule.
    pub setpoint: Option<f64>,
    pub mean_error: f64,
    pub mean_state_norm: f64,
}

impl SegmentRow {
    pub fn relative(&self) -> f64 {
        self.mean_error / self.mean_state_norm
    }
}

pub struct Artifact {
    pub name: &'static str,
    pub bytes: Vec<u8>,
}

pub struct Outcome {
    pub kind: Kind,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// One-line verdict printed before the summary, if any.
    pub headline: Option<String>,
    pub info: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub segments: Vec<SegmentRow>,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    fn new(cfg: &Config, seed: u64) -> Self {
        Self {
            kind: cfg.kind,
            dt: cfg.dt(),
            horizon: cfg.horizon(),
            seed,
            headline: None,
            info: Vec::new(),
            checks: Vec::new(),
            segments: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    fn info(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.info.push((key.into(), value.into()));
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_mat(m: &DMatrix<f64>) -> String {
    let rows: Vec<String> = m.row_iter().map(|r| fmt_vec(&r.transpose())).collect();
    format!("[{}]", rows.join(", "))
}

fn io_err(name: &str, e: std::io::Error) -> CliError {
    CliError::Io {
        path: name.into(),
        source: e,
    }
}

fn trajectory_csv(tr: &Trajectory, stride: usize) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    tr.write_csv_strided(&mut buf, stride)
        .map_err(|e| io_err("trajectory.csv", e))?;
    Ok(buf)
}

fn table_csv(header: &[String], rows: &[Vec<f64>], dt: f64, stride: usize) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    let mut write = || -> std::io::Result<()> {
        write!(buf, "t")?;
        for h in header {
            write!(buf, ",{h}")?;
        }
        writeln!(buf)?;
        for (k, row) in rows.iter().enumerate().step_by(stride.max(1)) {
            write!(buf, "{:.16e}", k as f64 * dt)?;
            for v in row {
                write!(buf, ",{v:.16e}")?;
            }
            writeln!(buf)?;
        }
        Ok(())
    };
    write().map_err(|e| io_err("estimator.csv", e))?;
    Ok(buf)
}

fn pe_csv(rep: &PeReport) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).map_err(|e| io_err("pe_report.csv", e))?;
    Ok(buf)
}

fn labelled(prefix: &str, labels: &[String]) -> Vec<String> {
    labels.iter().map(|l| format!("{prefix}{l}")).collect()
}

/// Runs the configuration. With `artifacts` false only the summary and the
/// checks are produced.
pub fn execute(cfg: &Config, seed: u64, artifacts: bool) -> Result<Outcome, CliError> {
    let mut out = Outcome::new(cfg, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.info("kind", cfg.kind.as_str());
    out.info("dt", format!("{:e}", out.dt));
    out.info("horizon", format!("{}", out.horizon));
    out.info("seed", seed.to_string());
    match &cfg.plan {
        Plan::Cuk(sc) => run_cuk(sc, cfg.csv_stride, artifacts, &mut rng, &mut out)?,
        Plan::Pmsm(sc) => run_pmsm(sc, cfg.csv_stride, artifacts, &mut rng, &mut out)?,
        Plan::Mech(mc) => run_mech(mc, cfg.csv_stride, artifacts, &mut rng, &mut out)?,
        Plan::Lti(lc) => run_lti(lc, cfg.csv_stride, artifacts, &mut rng, &mut out)?,
    }
    Ok(out)
}

fn run_cuk(
    sc: &CukScenario,
    stride: usize,
    artifacts: bool,
    rng: &mut ChaCha8Rng,
    out: &mut Outcome,
) -> Result<(), CliError> {
    let run = run_cuk_scenario(sc)?;
    let cascade: Arc<dyn Cascade> = sc.cascade();
    let pebo = matches!(sc.observer, CukObserverKind::Pebo { .. });
    out.info("case", format!("{:?}", sc.case));
    out.info("observer", if pebo { "pebo" } else { "iandi" });
    out.info("lambda0", sc.lambda0.to_string());
    if let Some(theta) = &run.theta {
        out.info("theta", fmt_vec(theta));
        out.info("theta_hat_final", fmt_vec(run.theta_hat.last().expect("non-empty")));
    }
    out.info("x_error_final", format!("{:.6e}", run.error_norm.last().copied().unwrap_or(f64::NAN)));

    let finite = run.x_hat.iter().all(|v| v.iter().all(|x| x.is_finite()));
    out.checks.push(Check::new("estimates_finite", finite, format!("{} samples", run.x_hat.len())));

    for (i, s) in run.segments.iter().enumerate() {
        let key = format!("segment[{i}]");
        out.info(
            key,
            format!(
                "t=[{:.3}, {:.3}) |Vd|={} mean|x~|={:.6e} mean|x|={:.6e} ratio={:.6e}",
                s.start,
                s.end,
                s.setpoint,
                s.mean_error,
                s.mean_state_norm,
                s.relative_error()
            ),
        );
        if pebo {
            out.checks.push(Check::new(
                format!("segment_{i}_steady_error"),
                s.relative_error() < 0.05,
                format!("mean|x~|/mean|x| = {:.4e} < 5e-2", s.relative_error()),
            ));
        }
        out.segments.push(SegmentRow {
            start: s.start,
            end: s.end,
            setpoint: Some(s.setpoint),
            mean_error: s.mean_error,
            mean_state_norm: s.mean_state_norm,
        });
    }

    if pebo {
        let rep = offset_drift(cascade.as_ref(), &run.plant_states, &run.chi);
        out.checks.push(Check::new(
            "offset_invariance",
            rep.within(1e-6),
            format!("max drift {:.3e} <= 1e-6*(1+|z0|)", rep.max_drift),
        ));
        let pe = run.pe.as_ref().expect("pebo runs carry a PE report");
        out.info("delta_min", format!("{:.6e}", pe.delta_min));
        out.info("pe_window", pe.window.to_string());
        out.checks.push(Check::new(
            "pe_excited",
            pe.delta_min > 0.0,
            format!("delta_min {:.3e} > 0", pe.delta_min),
        ));
        out.checks.push(left_inverse(
            cascade.as_ref(),
            rng,
            1000,
            &[(-5.0, 5.0), (-40.0, 40.0)],
            &[(-40.0, 40.0), (-40.0, 40.0)],
        ));
        let duty = sc.setpoints[0].1 / (sc.setpoints[0].1 + sc.params.e);
        let oracle = InputSchedule::constant(DVector::from_element(1, duty), 0.02_f64.min(sc.horizon));
        out.checks.push(offset_random(
            cascade.clone(),
            rng,
            10,
            &[(-2.0, 2.0), (0.0, 40.0), (-3.0, 3.0), (-40.0, 0.0)],
            10.0,
            &oracle,
            sc.dt,
            oracle.horizon(),
        )?);
        let reg = sc.cascade();
        out.checks.push(regression_nullity(
            cascade.as_ref(),
            reg.as_ref(),
            &reg.plant_state(&sc.x0, &sc.y0),
            &oracle,
            sc.dt,
            oracle.horizon(),
        )?);
    }

    if artifacts {
        out.artifacts.push(Artifact {
            name: "trajectory.csv",
            bytes: trajectory_csv(&run.trajectory, stride)?,
        });
        let xl = cascade.x_labels();
        let mut header = xl.clone();
        header.extend(labelled("x_hat_", &xl));
        header.extend(labelled("x_err_", &xl));
        header.push("u".into());
        if pebo {
            header.extend((0..2).map(|i| format!("theta_hat{i}")));
        }
        let rows: Vec<Vec<f64>> = (0..run.x.len())
            .map(|k| {
                let mut r: Vec<f64> = run.x[k].iter().copied().collect();
                r.extend(run.x_hat[k].iter());
                r.extend((&run.x_hat[k] - &run.x[k]).iter());
                r.push(run.u[k]);
                if pebo {
                    r.extend(run.theta_hat[k].iter());
                }
                r
            })
            .collect();
        out.artifacts.push(Artifact {
            name: "estimator.csv",
            bytes: table_csv(&header, &rows, sc.dt, stride)?,
        });
        if let Some(pe) = &run.pe {
            out.artifacts.push(Artifact {
                name: "pe_report.csv",
                bytes: pe_csv(pe)?,
            });
        }
    }
    Ok(())
}

fn closing_window(errors: &[f64], norms: &[f64], dt: f64, fraction: f64) -> SegmentRow {
    let n = errors.len();
    let from = ((1.0 - fraction) * (n - 1) as f64).round() as usize;
    let len = (n - from) as f64;
    SegmentRow {
        start: from as f64 * dt,
        end: (n - 1) as f64 * dt,
        setpoint: None,
        mean_error: errors[from..].iter().sum::<f64>() / len,
        mean_state_norm: norms[from..].iter().sum::<f64>() / len,
    }
}

fn run_pmsm(
    sc: &PmsmScenario,
    stride: usize,
    artifacts: bool,
    rng: &mut ChaCha8Rng,
    out: &mut Outcome,
) -> Result<(), CliError> {
    let run = run_pmsm_scenario(sc)?;
    let p = sc.params;
    let cascade: Arc<dyn Cascade> = sc.cascade();
    let dynamic = matches!(sc.path, PmsmPath::Dynamic { .. });
    let truth = sc.true_params();
    let last = run.params_hat.last().expect("non-empty");
    let rel = (last - &truth).norm() / truth.norm();
    out.info("path", if dynamic { "dynamic" } else { "static" });
    out.info("theta", fmt_vec(&run.theta));
    out.info(if dynamic { "theta_hat_final" } else { "eta_hat_final" }, fmt_vec(last));
    if !dynamic {
        out.info("eta", fmt_vec(&truth));
    }
    out.info("param_error_relative_final", format!("{rel:.6e}"));
    out.info("delta_min", format!("{:.6e}", run.pe.delta_min));
    out.info("pe_window", run.pe.window.to_string());
    let q_final = run.q_error.last().copied().flatten();
    out.info("q_error_final", q_final.map_or("undefined".into(), |e| format!("{e:.6e}")));

    out.checks.push(Check::new(
        "flux_invariant",
        run.flux_deviation <= 1e-6,
        format!("max ||lambda - L i| - lambda_m|/lambda_m {:.3e} <= 1e-6", run.flux_deviation),
    ));
    let undefined = run.q_error.iter().filter(|e| e.is_none()).count();
    out.checks.push(Check::new(
        "estimates_defined",
        undefined == 0,
        format!("{undefined} samples with undefined angle"),
    ));
    let rep = offset_drift(cascade.as_ref(), &run.plant_states, &run.chi);
    out.checks.push(Check::new(
        "offset_invariance",
        rep.within(1e-6),
        format!("max drift {:.3e} <= 1e-6*(1+|z0|)", rep.max_drift),
    ));
    if run.pe.delta_min > 0.0 {
        out.checks.push(Check::new(
            "params_within_1pct",
            rel <= 0.01,
            format!("|p_hat - p|/|p| = {rel:.3e} <= 1e-2"),
        ));
    } else {
        out.info("params_within_1pct", "not evaluated: regressor not excited");
    }

    let y_bounds: Vec<(f64, f64)> = if dynamic {
        vec![(-20.0, 20.0), (-20.0, 20.0), (-100.0, 100.0)]
    } else {
        vec![(-20.0, 20.0), (-20.0, 20.0)]
    };
    out.checks.push(left_inverse(cascade.as_ref(), rng, 1000, &[(-10.0, 10.0)], &y_bounds));
    let oracle_h = 0.2_f64.min(sc.horizon);
    let drive = pebo::pmsm::PmsmDrive {
        amplitude: 6.0,
        speed: 100.0,
        ramp: 0.0,
    }
    .schedule(oracle_h);
    out.checks.push(offset_random(
        cascade.clone(),
        rng,
        10,
        &[(-5.0, 5.0), (-5.0, 5.0), (0.0, 2.0 * PI), (-50.0, 50.0)],
        0.2,
        &drive,
        sc.dt,
        oracle_h,
    )?);
    if dynamic {
        let flux = flux_cascade(p, PmsmMeasurement::CurrentsAndSpeed);
        out.checks.push(regression_nullity(
            flux.as_ref(),
            &CurrentRegression { params: p },
            &sc.state0,
            &drive,
            sc.dt,
            oracle_h,
        )?);
    } else {
        let reg = FluxMagnitudeRegression { params: p };
        let eta = reg.eta_of(&run.theta);
        let chis: Vec<_> = run.plant_states.iter().map(|s| p.flux(s) - &run.theta).collect();
        let ys: Vec<_> = run.plant_states.iter().map(|s| cascade.split(s).1).collect();
        let res = static_regression_residual(&reg, &eta, &ys, &chis);
        out.checks.push(Check::new(
            "static_identity",
            res <= 1e-9,
            format!("max |Y - S^T eta| {res:.3e} <= 1e-9"),
        ));
    }

    let errors: Vec<f64> = run.q_error.iter().map(|e| e.map_or(f64::NAN, f64::abs)).collect();
    let norms: Vec<f64> = run.plant_states.iter().map(|s| s[2].rem_euclid(p.period())).collect();
    out.segments.push(closing_window(&errors, &norms, sc.dt, 0.1));

    if artifacts {
        out.artifacts.push(Artifact {
            name: "trajectory.csv",
            bytes: trajectory_csv(&run.trajectory, stride)?,
        });
        let pname = if dynamic { "theta_hat" } else { "eta_hat" };
        let mut header: Vec<String> = ["q", "q_hat", "q_err", "lambda1", "lambda2", "chi1", "chi2"]
            .map(String::from)
            .to_vec();
        header.extend((0..last.len()).map(|i| format!("{pname}{i}")));
        let rows: Vec<Vec<f64>> = (0..run.plant_states.len())
            .map(|k| {
                let s = &run.plant_states[k];
                let lam = p.flux(s);
                let mut r = vec![
                    s[2],
                    run.q_hat[k].unwrap_or(f64::NAN),
                    run.q_error[k].unwrap_or(f64::NAN),
                    lam[0],
                    lam[1],
                    run.chi[k][0],
                    run.chi[k][1],
                ];
                r.extend(run.params_hat[k].iter());
                r
            })
            .collect();
        out.artifacts.push(Artifact {
            name: "estimator.csv",
            bytes: table_csv(&header, &rows, sc.dt, stride)?,
        });
        out.artifacts.push(Artifact {
            name: "pe_report.csv",
            bytes: pe_csv(&run.pe)?,
        });
    }
    Ok(())
}

fn run_mech(
    mc: &MechConfig,
    stride: usize,
    artifacts: bool,
    rng: &mut ChaCha8Rng,
    out: &mut Outcome,
) -> Result<(), CliError> {
    let sc = &mc.scenario;
    let sys = sc.system.clone();
    let s = sys.dof();
    let run = run_mech_scenario(sc)?;
    let cascade: Arc<dyn Cascade> = sc.cascade();
    out.info("system", sys.name());
    out.info("dof", s.to_string());
    out.info("theta", fmt_vec(&run.theta));
    out.info("theta_hat_final", fmt_vec(run.theta_hat.last().expect("non-empty")));
    let v_final = run.velocity_error.last().copied().unwrap_or(f64::NAN);
    out.info("velocity_error_final", format!("{v_final:.6e}"));
    out.info("delta_min", format!("{:.6e}", run.pe.delta_min));
    out.info("pe_window", run.pe.window.to_string());

    let points: Vec<DVector<f64>> = if s == 1 {
        let [lo, hi] = mc.check_range;
        let n = mc.check_samples;
        (0..n)
            .map(|k| DVector::from_element(1, lo + (hi - lo) * k as f64 / (n - 1) as f64))
            .collect()
    } else {
        (0..mc.check_samples)
            .map(|_| uniform_vec(rng, &vec![(-3.0, 3.0); s]))
            .collect()
    };
    let a3 = check_assumption3(sys.as_ref(), &points, 1e-8);
    let failing = a3.points.iter().filter(|p| !p.passed()).count();
    out.checks.push(Check::new(
        "assumption3",
        a3.passed(),
        format!(
            "{} samples, max |B+B^T| {:.3e} <= 1e-8, {failing} failing",
            points.len(),
            a3.max_residual()
        ),
    ));

    let free = InputSchedule::constant(DVector::zeros(sys.inputs()), 10.0);
    let s0 = cascade_state(sys.as_ref(), &sc.y0, &sc.x0);
    let tr = integrate(mech_field(sys.clone()), &s0, &free, pebo::sim::DT_MECHANICAL, 10.0)?;
    let energy = |k: usize| {
        let r = DVector::from_row_slice(tr.row(k));
        sys.hamiltonian(&r.rows(0, s).into_owned(), &r.rows(s, s).into_owned())
    };
    let h0 = energy(0);
    let drift = (0..tr.len()).map(|k| (energy(k) - h0).abs()).fold(0.0, f64::max);
    out.checks.push(Check::new(
        "energy_conservation",
        drift <= 1e-6,
        format!("u = 0, 10 s at dt = 1e-3: max |H - H0| {drift:.3e} <= 1e-6"),
    ));

    let rep = offset_drift(cascade.as_ref(), &run.plant_states, &run.chi);
    out.checks.push(Check::new(
        "offset_invariance",
        rep.within(1e-6),
        format!("max drift {:.3e} <= 1e-6*(1+|z0|)", rep.max_drift),
    ));
    out.checks.push(left_inverse(
        cascade.as_ref(),
        rng,
        1000,
        &vec![(-3.0, 3.0); s],
        &vec![(-3.0, 3.0); s],
    ));
    let oracle_h = 2.0_f64.min(sc.horizon);
    let mut bounds = vec![(-1.0, 1.0); s];
    bounds.extend(vec![(-1.0, 1.0); s]);
    let oracle = sc.schedule();
    out.checks.push(offset_random(cascade.clone(), rng, 10, &bounds, 1.0, &oracle, sc.dt, oracle_h)?);
    let reg = sc.cascade();
    out.checks.push(regression_nullity(cascade.as_ref(), reg.as_ref(), &s0, &oracle, sc.dt, oracle_h)?);
    out.checks.push(Check::new(
        "pe_excited",
        run.pe.delta_min > 0.0,
        format!("delta_min {:.3e} > 0", run.pe.delta_min),
    ));
    out.checks.push(Check::new(
        "velocity_error_terminal",
        v_final <= 1e-3,
        format!("|M^-1 (x_hat - x)| at t = {} s: {v_final:.3e} <= 1e-3", sc.horizon),
    ));

    let norms: Vec<f64> = run.plant_states.iter().map(|st| st.rows(s, s).norm()).collect();
    out.segments.push(closing_window(&run.momentum_error, &norms, sc.dt, 0.1));

    if artifacts {
        out.artifacts.push(Artifact {
            name: "trajectory.csv",
            bytes: trajectory_csv(&run.trajectory, stride)?,
        });
        let xl = cascade.x_labels();
        let mut header = xl.clone();
        header.extend(labelled("x_hat_", &xl));
        header.push("momentum_err".into());
        header.push("velocity_err".into());
        header.extend((0..s).map(|i| format!("theta_hat{i}")));
        let rows: Vec<Vec<f64>> = (0..run.plant_states.len())
            .map(|k| {
                let mut r: Vec<f64> = run.plant_states[k].rows(s, s).iter().copied().collect();
                r.extend(run.x_hat[k].iter());
                r.push(run.momentum_error[k]);
                r.push(run.velocity_error[k]);
                r.extend(run.theta_hat[k].iter());
                r
            })
            .collect();
        out.artifacts.push(Artifact {
            name: "estimator.csv",
            bytes: table_csv(&header, &rows, sc.dt, stride)?,
        });
        out.artifacts.push(Artifact {
            name: "pe_report.csv",
            bytes: pe_csv(&run.pe)?,
        });
    }
    Ok(())
}

fn cascade_state(sys: &dyn MechSystem, y: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    let s = sys.dof();
    let mut st = DVector::zeros(2 * s);
    st.rows_mut(0, s).copy_from(y);
    st.rows_mut(s, s).copy_from(x);
    st
}

/// Random linear plant with entries drawn from `{0, ±1}` or `[−2, 2]` and
/// occasionally rank-deficient output coupling.
pub fn random_lti(rng: &mut ChaCha8Rng) -> LtiSystem {
    let nx = rng.gen_range(2..=3);
    let ny = rng.gen_range(1..=3);
    let entry = |rng: &mut ChaCha8Rng| match rng.gen_range(0..4) {
        0 => 0.0,
        1 => 1.0,
        2 => -1.0,
        _ => rng.gen_range(-2.0..2.0),
    };
    let a11 = DMatrix::from_fn(nx, nx, |_, _| entry(rng));
    let mut a21 = DMatrix::from_fn(ny, nx, |_, _| entry(rng));
    if rng.gen_bool(0.3) {
        // repeat the first row to lower the rank
        let first = a21.row(0).into_owned();
        for r in 1..ny {
            a21.set_row(r, &first);
        }
    }
    LtiSystem::autonomous(a11, a21).expect("consistent shapes")
}

fn run_lti(
    lc: &LtiConfig,
    stride: usize,
    artifacts: bool,
    rng: &mut ChaCha8Rng,
    out: &mut Outcome,
) -> Result<(), CliError> {
    let sys = &lc.system;
    let pbh = pbh_observable(sys);
    let sol = solve_cascade(sys, lc.nz)?;
    out.headline = Some(format!(
        "observable: {}, cascade: {}",
        pbh.observable,
        if sol.is_feasible() { "feasible" } else { "infeasible" }
    ));
    out.info("nx", sys.nx().to_string());
    out.info("ny", sys.ny().to_string());
    out.info("nz", lc.nz.to_string());
    out.info("observable", pbh.observable.to_string());
    for (i, w) in pbh.witnesses.iter().enumerate() {
        out.info(
            format!("pbh[{i}]"),
            format!("s = {:.6e}{:+.6e}i, rank {}", w.eigenvalue.re, w.eigenvalue.im, w.rank),
        );
    }

    let plant_only = |out: &mut Outcome| -> Result<(), CliError> {
        if artifacts {
            let input = lti_input(sys.m(), lc.horizon);
            let mut s0 = DVector::zeros(sys.nx() + sys.ny());
            s0.rows_mut(0, sys.nx()).copy_from(&lc.x0);
            s0.rows_mut(sys.nx(), sys.ny()).copy_from(&lc.y0);
            let plant = pebo::lti::LtiPlant { sys: sys.clone() };
            let tr = integrate(Arc::new(plant), &s0, &input, lc.dt, lc.horizon)?;
            out.artifacts.push(Artifact {
                name: "trajectory.csv",
                bytes: trajectory_csv(&tr, stride)?,
            });
        }
        Ok(())
    };

    match &sol {
        CascadeSolution::Infeasible { max_rank } => {
            out.info("cascade", "infeasible");
            out.info("max_rank_t1", max_rank.to_string());
            plant_only(out)?;
        }
        CascadeSolution::Feasible(c) => {
            out.info("cascade", "feasible");
            out.info("t1", fmt_mat(&c.t1));
            out.info("t2", fmt_mat(&c.t2));
            let ident = identifiable(sys, c);
            out.info("identifiable", ident.to_string());
            out.checks.push(Check::new(
                "cascade_valid",
                c.validate(sys).is_ok(),
                format!("max |T1 A11 + T2 A21| {:.3e}", c.residual(sys)),
            ));
            out.checks.push(Check::new(
                "identifiable_implies_observable",
                !ident || pbh.observable,
                format!("identifiable {ident}, observable {}", pbh.observable),
            ));
            let form = lti_regression(sys, c)?;
            let cascade: Arc<dyn Cascade> = form.clone();
            out.info("phi1", fmt_mat(&form.regressor()));
            let input = lti_input(sys.m(), lc.horizon);
            let s0 = form.plant_state(&lc.x0, &lc.y0);
            out.checks.push(regression_nullity(cascade.as_ref(), form.as_ref(), &s0, &input, lc.dt, lc.horizon)?);
            let mut bounds = vec![(-1.0, 1.0); sys.nx() + sys.ny()];
            bounds.truncate(sys.nx() + sys.ny());
            out.checks.push(offset_random(cascade.clone(), rng, 10, &bounds, 1.0, &input, lc.dt, lc.horizon)?);
            out.checks.push(left_inverse(
                cascade.as_ref(),
                rng,
                1000,
                &vec![(-1.0, 1.0); sys.nx()],
                &vec![(-1.0, 1.0); sys.ny()],
            ));
            run_lti_observer(lc, &form, &input, &s0, stride, artifacts, out)?;
        }
    }

    if lc.sweep > 0 {
        let systems: Vec<LtiSystem> = (0..lc.sweep).map(|_| random_lti(rng)).collect();
        let rep = identifiability_sweep(&systems)?;
        out.info(
            "sweep",
            format!(
                "{} systems: {} feasible, {} identifiable, {} observable",
                rep.systems, rep.feasible, rep.identifiable, rep.observable
            ),
        );
        out.checks.push(Check::new(
            "sweep_identifiable_implies_observable",
            rep.counterexamples.is_empty(),
            format!("{} counterexamples", rep.counterexamples.len()),
        ));
    }
    Ok(())
}

fn lti_input(m: usize, horizon: f64) -> InputSchedule {
    if m == 0 {
        InputSchedule::none(horizon)
    } else {
        InputSchedule::function(m, horizon, move |t| {
            DVector::from_iterator(m, (0..m).map(|i| (t * (1.0 + 0.5 * i as f64)).sin()))
        })
    }
}

fn run_lti_observer(
    lc: &LtiConfig,
    form: &Arc<pebo::lti::LtiCascadeForm>,
    input: &InputSchedule,
    s0: &DVector<f64>,
    stride: usize,
    artifacts: bool,
    out: &mut Outcome,
) -> Result<(), CliError> {
    let nz = form.cascade.t1.nrows();
    let gamma = match &lc.gamma {
        Some(g) => gain("observer.gamma", g, nz)?,
        None => DMatrix::identity(nz, nz),
    };
    let obs = Arc::new(assemble(
        form.clone(),
        EstimatorPath::Filtered {
            regression: form.clone(),
            alpha: lc.alpha,
            init: FilterInit::Zero,
        },
        &EstimatorConfig { gamma, initial: None },
    )?);
    let cascade: Arc<dyn Cascade> = form.clone();
    let (_, y0) = cascade.split(s0);
    let chi0 = DVector::zeros(nz);
    let mut sys = Coupled::new();
    let plant = sys.add(Block::new("plant", Arc::new(PlantBlock::new(cascade.clone())), s0.clone()).feed(Feed::External));
    sys.add(
        Block::new("observer", obs.clone(), obs.initial_state(&chi0, &y0)?)
            .feed(Feed::Output(plant))
            .feed(Feed::External),
    );
    let tr = coupled_integrate(&sys, input, lc.dt, lc.horizon)?;
    let n = tr.len();
    let mut errors = Vec::with_capacity(n);
    let mut norms = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let s = DVector::from_row_slice(tr.group("plant", k).expect("plant"));
        let o = DVector::from_row_slice(tr.group("observer", k).expect("observer"));
        let (x, y) = cascade.split(&s);
        let xh = obs.estimate(&o, &y)?;
        errors.push((&xh - &x).norm());
        norms.push(x.norm());
        let mut r: Vec<f64> = x.iter().copied().collect();
        r.extend(xh.iter());
        r.extend(obs.theta_hat(&o).iter());
        rows.push(r);
        samples.push(form.phi1(&obs.chi(&o), &y, &input.at(tr.time(k))));
    }
    let theta = cascade.z_of(s0);
    out.info("theta", fmt_vec(&theta));
    out.info("theta_hat_final", fmt_vec(&obs.theta_hat(&DVector::from_row_slice(tr.group("observer", n - 1).expect("observer")))));
    out.info("x_error_final", format!("{:.6e}", errors[n - 1]));
    let window = (lc.horizon / 5.0).max(lc.dt);
    let pe = pe_monitor(&samples, lc.dt, window)?;
    out.info("delta_min", format!("{:.6e}", pe.delta_min));
    out.info("pe_window", window.to_string());
    out.segments.push(closing_window(&errors, &norms, lc.dt, 0.1));
    if artifacts {
        out.artifacts.push(Artifact {
            name: "trajectory.csv",
            bytes: trajectory_csv(&tr, stride)?,
        });
        let xl = cascade.x_labels();
        let mut header = xl.clone();
        header.extend(labelled("x_hat_", &xl));
        header.extend((0..nz).map(|i| format!("theta_hat{i}")));
        out.artifacts.push(Artifact {
            name: "estimator.csv",
            bytes: table_csv(&header, &rows, lc.dt, stride)?,
        });
        out.artifacts.push(Artifact {
            name: "pe_report.csv",
            bytes: pe_csv(&pe)?,
        });
    }
    Ok(())
}

/// Whether the case of a converter scenario measures the currents directly.
pub fn case_label(case: CukCase) -> &'static str {
    match case {
        CukCase::I => "I",
        CukCase::II => "II",
    }
}
