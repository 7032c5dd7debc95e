use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use pebo::framework::{assemble, Cascade, EstimatorConfig, EstimatorPath, FilterInit, PlantBlock};
use pebo::lti::{identifiable, lti_regression, pbh_observable, solve_cascade, CascadeSolution, LtiSystem};
use pebo::sim::{coupled_integrate, Block, Coupled, Feed, InputSchedule};
use proptest::prelude::*;

#[test]
fn observable_but_not_cascade_solvable() {
    for (a1, a2, a, b) in [(1.0, 2.0, 1.0, 3.0), (-1.0, 0.5, 2.0, -1.0)] {
        let sys = LtiSystem::c1(a1, a2, a, b);
        assert!(pbh_observable(&sys).observable);
        assert!(!solve_cascade(&sys, 2).unwrap().is_feasible());
    }
}

#[test]
fn cascade_solvable_but_not_observable() {
    let sys = LtiSystem::c2();
    assert!(!pbh_observable(&sys).observable);
    let CascadeSolution::Feasible(c) = solve_cascade(&sys, 1).unwrap() else {
        panic!("expected a cascade")
    };
    assert_eq!(c.t1, DMatrix::identity(1, 1));
    assert_eq!(c.t2, DMatrix::zeros(1, 1));
    assert!(!identifiable(&sys, &c));
}

/// Full-state measurement of a stable second-order plant with one input.
fn measured_oscillator() -> LtiSystem {
    LtiSystem::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]),
        DMatrix::zeros(2, 2),
        DMatrix::identity(2, 2),
        DMatrix::zeros(2, 2),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::zeros(2, 1),
    )
    .unwrap()
}

#[test]
fn observer_reconstructs_the_unmeasured_state() {
    let sys = measured_oscillator();
    let CascadeSolution::Feasible(c) = solve_cascade(&sys, 2).unwrap() else {
        panic!("expected a cascade")
    };
    assert!(identifiable(&sys, &c));
    let form = lti_regression(&sys, &c).unwrap();
    let cascade: Arc<dyn Cascade> = form.clone();
    let obs = Arc::new(
        assemble(
            cascade.clone(),
            EstimatorPath::Filtered {
                regression: form.clone(),
                alpha: 1.0,
                init: FilterInit::Zero,
            },
            &EstimatorConfig::scalar(5.0, 2),
        )
        .unwrap(),
    );
    let y0 = DVector::zeros(2);
    let s0 = form.plant_state(&DVector::from_vec(vec![1.0, -0.5]), &y0);
    let mut sys_b = Coupled::new();
    let plant = sys_b.add(Block::new("plant", Arc::new(PlantBlock::new(cascade.clone())), s0).feed(Feed::External));
    sys_b.add(
        Block::new("observer", obs.clone(), obs.initial_state(&DVector::zeros(2), &y0).unwrap())
            .feed(Feed::Output(plant))
            .feed(Feed::External),
    );
    let u = InputSchedule::function(1, 20.0, |t| DVector::from_element(1, t.sin()));
    let tr = coupled_integrate(&sys_b, &u, 1e-3, 20.0).unwrap();
    let error_at = |k: usize| {
        let s = DVector::from_row_slice(tr.group("plant", k).unwrap());
        let o = DVector::from_row_slice(tr.group("observer", k).unwrap());
        let (x, y) = cascade.split(&s);
        (obs.estimate(&o, &y).unwrap() - x).norm()
    };
    let (first, last) = (error_at(0), error_at(tr.len() - 1));
    assert!(last < 1e-3 * first, "{first:e} -> {last:e}");
}

fn small_entry() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), Just(-1.0), -2.0f64..2.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identifiable_implies_observable(
        a11 in proptest::collection::vec(small_entry(), 4),
        a21 in proptest::collection::vec(small_entry(), 4),
    ) {
        let sys = LtiSystem::autonomous(
            DMatrix::from_row_slice(2, 2, &a11),
            DMatrix::from_row_slice(2, 2, &a21),
        ).unwrap();
        if let CascadeSolution::Feasible(c) = solve_cascade(&sys, 2).unwrap() {
            prop_assert!(c.residual(&sys) <= 1e-9);
            if identifiable(&sys, &c) {
                prop_assert!(pbh_observable(&sys).observable);
            }
        }
    }
}
