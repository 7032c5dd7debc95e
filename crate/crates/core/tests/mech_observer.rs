use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use pebo::mech::{
    check_assumption3, mech_field, run_mech_scenario, ConstantInertia, ExpressionSystem, MechScenario, MechSystem,
    Pendulum, TrigTerm, VaryingInertia, VaryingInertiaFactor,
};
use pebo::sim::{integrate, InputSchedule};
use proptest::prelude::*;

fn term(coeff: f64, pow: u32, sin_pow: u32, cos_pow: u32) -> TrigTerm {
    TrigTerm {
        coeff,
        pow,
        sin_pow,
        cos_pow,
    }
}

#[test]
fn velocity_estimate_converges_for_every_example() {
    let systems: Vec<Arc<dyn MechSystem>> = vec![
        Arc::new(Pendulum::default()),
        Arc::new(VaryingInertia::default()),
        Arc::new(ConstantInertia::two_mass()),
    ];
    for sys in systems {
        let name = sys.name().to_string();
        let run = run_mech_scenario(&MechScenario::new(sys)).unwrap();
        let v = *run.velocity_error.last().unwrap();
        assert!(v <= 1e-3, "{name}: terminal velocity error {v:e}");
        assert!(run.velocity_error[0] > 1e-2, "{name}: the run should start with a visible error");
        assert!(run.pe.delta_min > 0.0, "{name}");
    }
}

#[test]
fn larger_gain_converges_faster() {
    let error_at_one_second = |g: f64| {
        let mut sc = MechScenario::new(Arc::new(Pendulum::default()));
        sc.gamma = DMatrix::identity(1, 1) * g;
        sc.horizon = 1.0;
        *run_mech_scenario(&sc).unwrap().velocity_error.last().unwrap()
    };
    let (slow, fast) = (error_at_one_second(5.0), error_at_one_second(50.0));
    assert!(fast < slow, "{fast:e} vs {slow:e}");
}

#[test]
fn expression_system_reproduces_the_pendulum() {
    // M = 1, 𝒱 = −9.81 cos y
    let expr: Arc<dyn MechSystem> = Arc::new(ExpressionSystem {
        inertia: vec![term(1.0, 0, 0, 0)],
        potential: vec![term(-9.81, 0, 0, 1)],
        input_gain: 1.0,
        factor: VaryingInertiaFactor::Unit,
    });
    let pend: Arc<dyn MechSystem> = Arc::new(Pendulum::default());
    let s0 = DVector::from_vec(vec![0.3, 0.5]);
    let u = InputSchedule::function(1, 2.0, |t| DVector::from_element(1, 0.5 * (2.0 * t).sin()));
    let a = integrate(mech_field(expr), &s0, &u, 1e-3, 2.0).unwrap();
    let b = integrate(mech_field(pend), &s0, &u, 1e-3, 2.0).unwrap();
    for k in 0..a.len() {
        for (x, y) in a.row(k).iter().zip(b.row(k)) {
            assert!((x - y).abs() <= 1e-12, "step {k}");
        }
    }
}

#[test]
fn non_positive_inertia_is_reported_as_divergence() {
    // M(y) = cos y turns negative past π/2
    let sys: Arc<dyn MechSystem> = Arc::new(ExpressionSystem {
        inertia: vec![term(1.0, 0, 0, 1)],
        potential: vec![],
        input_gain: 1.0,
        factor: VaryingInertiaFactor::Unit,
    });
    let s0 = DVector::from_vec(vec![1.5, 1.0]);
    let err = integrate(mech_field(sys), &s0, &InputSchedule::constant(DVector::zeros(1), 1.0), 1e-3, 1.0);
    assert!(err.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn inverse_sqrt_factor_satisfies_skew_symmetry(j1 in 0.1f64..5.0, j2 in 0.0f64..5.0, y in -6.0f64..6.0) {
        let sys = VaryingInertia { j1, j2, factor: VaryingInertiaFactor::InverseSqrt };
        let rep = check_assumption3(&sys, &[DVector::from_element(1, y)], 1e-8);
        prop_assert!(rep.passed(), "residual {}", rep.max_residual());
    }

    #[test]
    fn constant_inertia_residual_is_exactly_zero(a in 0.5f64..3.0, b in 0.5f64..3.0, y0 in -3.0f64..3.0, y1 in -3.0f64..3.0) {
        let sys = ConstantInertia {
            mass: DMatrix::from_diagonal(&DVector::from_vec(vec![a, b])),
            ..ConstantInertia::two_mass()
        };
        let rep = check_assumption3(&sys, &[DVector::from_vec(vec![y0, y1])], 0.0);
        prop_assert_eq!(rep.max_residual(), 0.0);
    }
}
