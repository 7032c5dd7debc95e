use std::sync::Arc;

use nalgebra::DVector;

use super::{sample_count, InputSchedule, SimError, StepContext, Trajectory, VectorField};

/// Source of one slice of a block's input vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feed {
    /// The external input schedule, evaluated at every RK4 stage.
    External,
    /// Output of another block, evaluated from that block's stage state.
    Output(usize),
    /// Signal of the held law, sampled at the start of the step.
    Held,
}

/// A static law (typically a controller) sampled once per step and held.
pub trait HeldLaw: Send + Sync {
    fn dim(&self) -> usize;

    fn labels(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("u{i}")).collect()
    }

    /// `outputs[i]` is the output of block `i` at the step start.
    fn eval(&self, t: f64, outputs: &[DVector<f64>], external: &DVector<f64>) -> DVector<f64>;
}

/// One vector field in a coupled simulation.
#[derive(Clone)]
pub struct Block {
    pub name: String,
    pub field: Arc<dyn VectorField>,
    pub x0: DVector<f64>,
    /// Concatenated in order to form the field's input vector.
    pub feeds: Vec<Feed>,
    pub record_output: bool,
}

impl Block {
    pub fn new(name: impl Into<String>, field: Arc<dyn VectorField>, x0: DVector<f64>) -> Self {
        Self {
            name: name.into(),
            field,
            x0,
            feeds: Vec::new(),
            record_output: false,
        }
    }

    pub fn feed(mut self, feed: Feed) -> Self {
        self.feeds.push(feed);
        self
    }

    pub fn recording_output(mut self) -> Self {
        self.record_output = true;
        self
    }
}

/// A set of blocks with their wiring.
#[derive(Clone, Default)]
pub struct Coupled {
    pub blocks: Vec<Block>,
    pub held: Option<Arc<dyn HeldLaw>>,
    pub record_external: bool,
}

impl Coupled {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a block and returns its index for use in [`Feed::Output`].
    pub fn add(&mut self, block: Block) -> usize {
        self.blocks.push(block);
        self.blocks.len() - 1
    }

    pub fn with_held(mut self, law: Arc<dyn HeldLaw>) -> Self {
        self.held = Some(law);
        self
    }

    fn validate(&self, external_dim: usize) -> Result<(), SimError> {
        for b in &self.blocks {
            if b.x0.len() != b.field.dim() {
                return Err(SimError::Wiring(format!(
                    "block `{}`: initial state has dimension {}, field expects {}",
                    b.name,
                    b.x0.len(),
                    b.field.dim()
                )));
            }
            let mut width = 0;
            for feed in &b.feeds {
                width += match *feed {
                    Feed::External => external_dim,
                    Feed::Output(i) => self
                        .blocks
                        .get(i)
                        .ok_or_else(|| {
                            SimError::Wiring(format!("block `{}` reads missing block {i}", b.name))
                        })?
                        .field
                        .output_dim(),
                    Feed::Held => self
                        .held
                        .as_ref()
                        .ok_or_else(|| {
                            SimError::Wiring(format!(
                                "block `{}` reads a held signal but no held law is set",
                                b.name
                            ))
                        })?
                        .dim(),
                };
            }
            if width != b.field.input_dim() {
                return Err(SimError::Wiring(format!(
                    "block `{}`: feeds provide {width} inputs, field expects {}",
                    b.name,
                    b.field.input_dim()
                )));
            }
        }
        Ok(())
    }

    fn outputs(&self, t: f64, states: &[DVector<f64>]) -> Vec<DVector<f64>> {
        self.blocks
            .iter()
            .zip(states)
            .map(|(b, x)| b.field.output(t, x))
            .collect()
    }

    fn inputs(
        &self,
        outputs: &[DVector<f64>],
        held: &DVector<f64>,
        external: &DVector<f64>,
    ) -> Vec<DVector<f64>> {
        self.blocks
            .iter()
            .map(|b| {
                let mut u = Vec::with_capacity(b.field.input_dim());
                for feed in &b.feeds {
                    match *feed {
                        Feed::External => u.extend_from_slice(external.as_slice()),
                        Feed::Output(i) => u.extend_from_slice(outputs[i].as_slice()),
                        Feed::Held => u.extend_from_slice(held.as_slice()),
                    }
                }
                DVector::from_vec(u)
            })
            .collect()
    }

    fn held_at(
        &self,
        t: f64,
        outputs: &[DVector<f64>],
        external: &DVector<f64>,
    ) -> DVector<f64> {
        match &self.held {
            Some(law) => law.eval(t, outputs, external),
            None => DVector::zeros(0),
        }
    }

    fn derivatives(
        &self,
        t: f64,
        states: &[DVector<f64>],
        held: &DVector<f64>,
        schedule: &InputSchedule,
    ) -> Vec<DVector<f64>> {
        let ext = schedule.at(t);
        let outs = self.outputs(t, states);
        let ins = self.inputs(&outs, held, &ext);
        self.blocks
            .iter()
            .zip(states)
            .zip(&ins)
            .map(|((b, x), u)| b.field.eval(t, x, u))
            .collect()
    }

    fn trajectory_layout(&self, schedule: &InputSchedule, dt: f64) -> Trajectory {
        let prefix = |block: &str, label: &str| {
            if block.is_empty() {
                label.to_string()
            } else {
                format!("{block}.{label}")
            }
        };
        let mut groups = Vec::new();
        for b in &self.blocks {
            let labels = b.field.labels();
            groups.push((
                b.name.clone(),
                labels.iter().map(|l| prefix(&b.name, l)).collect(),
            ));
            if b.record_output {
                let name = prefix(&b.name, "out");
                let labels = b.field.output_labels();
                groups.push((
                    name.clone(),
                    labels.iter().map(|l| format!("{name}.{l}")).collect(),
                ));
            }
        }
        if let Some(law) = &self.held {
            groups.push(("held".into(), law.labels()));
        }
        if self.record_external {
            groups.push((
                "ext".into(),
                (0..schedule.dim()).map(|i| format!("ext{i}")).collect(),
            ));
        }
        Trajectory::new(dt, groups)
    }
}

fn axpy_all(base: &[DVector<f64>], k: &[DVector<f64>], h: f64) -> Vec<DVector<f64>> {
    base.iter().zip(k).map(|(x, d)| x + d * h).collect()
}

/// Integrates a wired set of blocks with fixed-step RK4.
///
/// Live feeds ([`Feed::External`], [`Feed::Output`]) are re-evaluated at every
/// stage. The held law is evaluated once at `t_k` from the block outputs at
/// `t_k` and kept constant over `[t_k, t_k + dt)`.
pub fn coupled_integrate(
    system: &Coupled,
    schedule: &InputSchedule,
    dt: f64,
    horizon: f64,
) -> Result<Trajectory, SimError> {
    let n = sample_count(dt, horizon)?;
    system.validate(schedule.dim())?;
    let mut traj = system.trajectory_layout(schedule, dt);
    let mut states: Vec<DVector<f64>> = system.blocks.iter().map(|b| b.x0.clone()).collect();
    let mut row = Vec::with_capacity(traj.width());

    for k in 0..n {
        let t = k as f64 * dt;
        let ext = schedule.at(t);
        let outs = system.outputs(t, &states);
        let held = system.held_at(t, &outs, &ext);

        row.clear();
        for ((b, x), y) in system.blocks.iter().zip(&states).zip(&outs) {
            row.extend_from_slice(x.as_slice());
            if b.record_output {
                row.extend_from_slice(y.as_slice());
            }
        }
        row.extend_from_slice(held.as_slice());
        if system.record_external {
            row.extend_from_slice(ext.as_slice());
        }
        traj.push_row(&row);

        if k + 1 == n {
            break;
        }

        let k1 = system.derivatives(t, &states, &held, schedule);
        let k2 = system.derivatives(t + 0.5 * dt, &axpy_all(&states, &k1, 0.5 * dt), &held, schedule);
        let k3 = system.derivatives(t + 0.5 * dt, &axpy_all(&states, &k2, 0.5 * dt), &held, schedule);
        let k4 = system.derivatives(t + dt, &axpy_all(&states, &k3, dt), &held, schedule);
        let mut next: Vec<DVector<f64>> = states
            .iter()
            .enumerate()
            .map(|(i, x)| x + (&k1[i] + &k2[i] * 2.0 + &k3[i] * 2.0 + &k4[i]) * (dt / 6.0))
            .collect();

        let t1 = t + dt;
        let ext1 = schedule.at(t1);
        let ins0 = system.inputs(&outs, &held, &ext);
        let outs1 = system.outputs(t1, &next);
        let ins1 = system.inputs(&outs1, &held, &ext1);
        for (i, b) in system.blocks.iter().enumerate() {
            let ctx = StepContext {
                t0: t,
                dt,
                prev_state: &states[i],
                prev_input: &ins0[i],
                next_input: &ins1[i],
            };
            b.field.post_step(&ctx, &mut next[i]);
        }

        for (b, x) in system.blocks.iter().zip(&next) {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(SimError::Diverged {
                    step: k + 1,
                    time: t1,
                    signal: b.name.clone(),
                });
            }
        }
        states = next;
    }
    Ok(traj)
}

/// Integrates a single field driven by `inputs`. Columns are the field's state labels.
pub fn integrate(
    field: Arc<dyn VectorField>,
    x0: &DVector<f64>,
    inputs: &InputSchedule,
    dt: f64,
    horizon: f64,
) -> Result<Trajectory, SimError> {
    let mut sys = Coupled::new();
    sys.add(Block::new("", field, x0.clone()).feed(Feed::External));
    coupled_integrate(&sys, inputs, dt, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::FnField;

    fn decay() -> Arc<dyn VectorField> {
        Arc::new(FnField {
            dim: 1,
            input_dim: 0,
            f: |_t: f64, x: &DVector<f64>, _u: &DVector<f64>| -x,
        })
    }

    fn terminal_error(dt: f64) -> f64 {
        let tr = integrate(decay(), &DVector::from_element(1, 1.0), &InputSchedule::none(1.0), dt, 1.0)
            .unwrap();
        (tr.last_row()[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn zero_field_is_constant() {
        let f: Arc<dyn VectorField> = Arc::new(FnField {
            dim: 2,
            input_dim: 1,
            f: |_t: f64, _x: &DVector<f64>, _u: &DVector<f64>| DVector::zeros(2),
        });
        let sched = InputSchedule::function(1, 1.0, |t| DVector::from_element(1, t.sin()));
        let tr = integrate(f, &DVector::from_vec(vec![1.0, 2.0]), &sched, 0.01, 1.0).unwrap();
        assert_eq!(tr.len(), 101);
        for k in 0..tr.len() {
            assert_eq!(tr.row(k), &[1.0, 2.0]);
        }
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let tr = integrate(decay(), &DVector::from_element(1, 1.0), &InputSchedule::none(1.0), 1e-3, 1.0)
            .unwrap();
        assert_eq!(tr.len(), 1001);
        assert!((tr.last_row()[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn fourth_order_convergence() {
        let e1 = terminal_error(0.1);
        let e2 = terminal_error(0.05);
        let ratio = e1 / e2;
        assert!((14.0..=18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn deterministic_bitwise() {
        let a = integrate(decay(), &DVector::from_element(1, 0.3), &InputSchedule::none(0.5), 1e-3, 0.5).unwrap();
        let b = integrate(decay(), &DVector::from_element(1, 0.3), &InputSchedule::none(0.5), 1e-3, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_reports_step() {
        let f: Arc<dyn VectorField> = Arc::new(FnField {
            dim: 1,
            input_dim: 0,
            f: |_t: f64, x: &DVector<f64>, _u: &DVector<f64>| x.map(|v| v * v),
        });
        let err = integrate(f, &DVector::from_element(1, 10.0), &InputSchedule::none(1.0), 0.01, 1.0)
            .unwrap_err();
        match err {
            SimError::Diverged { step, .. } => assert!(step > 0 && step < 100),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn grid_validation() {
        assert!(integrate(decay(), &DVector::from_element(1, 1.0), &InputSchedule::none(1.0), 0.0, 1.0).is_err());
        assert!(integrate(decay(), &DVector::from_element(1, 1.0), &InputSchedule::none(1.0), 0.1, 0.0).is_err());
    }

    #[test]
    fn wiring_mismatch_is_rejected() {
        let mut sys = Coupled::new();
        let p = sys.add(Block::new("a", decay(), DVector::from_element(1, 1.0)));
        // consumer expects one input but is fed nothing
        let consumer: Arc<dyn VectorField> = Arc::new(FnField {
            dim: 1,
            input_dim: 2,
            f: |_t: f64, _x: &DVector<f64>, u: &DVector<f64>| DVector::from_element(1, u[0]),
        });
        sys.add(Block::new("b", consumer, DVector::zeros(1)).feed(Feed::Output(p)));
        let err = coupled_integrate(&sys, &InputSchedule::none(1.0), 0.1, 1.0).unwrap_err();
        assert!(matches!(err, SimError::Wiring(_)));
    }

    #[test]
    fn single_block_coupled_equals_integrate() {
        let mut sys = Coupled::new();
        sys.add(Block::new("", decay(), DVector::from_element(1, 1.0)).feed(Feed::External));
        let a = coupled_integrate(&sys, &InputSchedule::none(1.0), 0.01, 1.0).unwrap();
        let b = integrate(decay(), &DVector::from_element(1, 1.0), &InputSchedule::none(1.0), 0.01, 1.0).unwrap();
        assert_eq!(a, b);
    }

    struct Gain;
    impl HeldLaw for Gain {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, _t: f64, outputs: &[DVector<f64>], _e: &DVector<f64>) -> DVector<f64> {
            -&outputs[0] * 2.0
        }
    }

    #[test]
    fn held_law_is_sampled_once_per_step() {
        // ẋ = u, u = -2x held: x_{k+1} = x_k (1 - 2 dt) exactly
        let plant: Arc<dyn VectorField> = Arc::new(FnField {
            dim: 1,
            input_dim: 1,
            f: |_t: f64, _x: &DVector<f64>, u: &DVector<f64>| u.clone(),
        });
        let mut sys = Coupled::new();
        sys.add(Block::new("p", plant, DVector::from_element(1, 1.0)).feed(Feed::Held));
        let sys = sys.with_held(Arc::new(Gain));
        let tr = coupled_integrate(&sys, &InputSchedule::none(0.1), 0.01, 0.1).unwrap();
        let x = tr.column("p.x0").unwrap();
        for k in 1..x.len() {
            assert!((x[k] - x[k - 1] * 0.98).abs() < 1e-15);
        }
        assert_eq!(tr.column("u0").unwrap()[0], -2.0);
    }
}
