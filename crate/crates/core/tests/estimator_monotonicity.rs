//! With transient-free filters the regression error vanishes, so the
//! gradient law can only shrink the parameter error.

use nalgebra::{DMatrix, DVector};
use pebo::cuk::{run_cuk_scenario, CukCase, CukObserverKind, CukScenario};
use pebo::framework::FilterInit;
use pebo::mech::{run_mech_scenario, ConstantInertia, MechScenario, Pendulum, VaryingInertia};
use pebo::pmsm::{run_pmsm_scenario, PmsmPath, PmsmScenario};
use std::sync::Arc;

const SLACK: f64 = 1e-12;

/// Largest sample-to-sample increase of `|θ̂ − θ|`, relative to `1 + |θ|`.
fn worst_increase(theta: &DVector<f64>, estimates: &[DVector<f64>]) -> f64 {
    worst_weighted_increase(theta, estimates, &DMatrix::identity(theta.len(), theta.len()))
}

/// Same in the norm `sqrt(eᵀ W e)`.
fn worst_weighted_increase(theta: &DVector<f64>, estimates: &[DVector<f64>], w: &DMatrix<f64>) -> f64 {
    let errs: Vec<f64> = estimates
        .iter()
        .map(|e| {
            let d = e - theta;
            d.dot(&(w * &d)).sqrt()
        })
        .collect();
    errs.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max) / (1.0 + theta.norm())
}

fn cuk(case: CukCase, alpha: f64, gamma: DMatrix<f64>) -> f64 {
    let mut sc = CukScenario::pebo(case, alpha, gamma);
    if let CukObserverKind::Pebo { filter_init, .. } = &mut sc.observer {
        *filter_init = FilterInit::TransientFree;
    }
    let run = run_cuk_scenario(&sc).unwrap();
    worst_increase(run.theta.as_ref().unwrap(), &run.theta_hat)
}

#[test]
fn cuk_case1_error_never_grows() {
    let w = cuk(CukCase::I, 0.5, DMatrix::identity(2, 2) * 1e-3);
    assert!(w <= SLACK, "largest increase {w:e}");
}

#[test]
fn cuk_case2_low_gain_error_never_grows() {
    let w = cuk(CukCase::II, 1.0, DMatrix::from_diagonal(&DVector::from_vec(vec![0.01, 0.1])));
    assert!(w <= SLACK, "largest increase {w:e}");
}

#[test]
fn cuk_case2_high_gain_error_never_grows() {
    let w = cuk(CukCase::II, 1.0, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 10.0])));
    assert!(w <= SLACK, "largest increase {w:e}");
}

#[test]
fn pmsm_error_never_grows() {
    let dynamic = PmsmScenario::driven(PmsmPath::Dynamic {
        alpha: 50.0,
        gamma: DMatrix::identity(2, 2) * 1e-7,
        filter_init: FilterInit::TransientFree,
    });
    let run = run_pmsm_scenario(&dynamic).unwrap();
    let w = worst_increase(&dynamic.true_params(), &run.params_hat);
    assert!(w <= SLACK, "dynamic path: largest increase {w:e}");

    // A non-scalar gain only guarantees decrease in the Γ⁻¹-weighted norm.
    let gamma = DMatrix::from_diagonal(&DVector::from_vec(vec![3e3, 3e3, 30.0]));
    let stat = PmsmScenario::driven(PmsmPath::Static { gamma: gamma.clone() });
    let run = run_pmsm_scenario(&stat).unwrap();
    let weight = gamma.try_inverse().unwrap();
    let w = worst_weighted_increase(&stat.true_params(), &run.params_hat, &weight);
    println!("static path, diagonal gain: euclidean increase {:e}", worst_increase(&stat.true_params(), &run.params_hat));
    assert!(w <= SLACK, "static path: largest weighted increase {w:e}");

    let scalar = PmsmScenario::driven(PmsmPath::Static {
        gamma: DMatrix::identity(3, 3) * 1e3,
    });
    let run = run_pmsm_scenario(&scalar).unwrap();
    let w = worst_increase(&scalar.true_params(), &run.params_hat);
    assert!(w <= SLACK, "static path, scalar gain: largest increase {w:e}");
}

#[test]
fn mech_error_never_grows() {
    let systems: Vec<Arc<dyn pebo::mech::MechSystem>> = vec![
        Arc::new(Pendulum::default()),
        Arc::new(VaryingInertia::default()),
        Arc::new(ConstantInertia::two_mass()),
    ];
    for sys in systems {
        let name = sys.name().to_string();
        let mut sc = MechScenario::new(sys);
        sc.filter_init = FilterInit::TransientFree;
        let run = run_mech_scenario(&sc).unwrap();
        let w = worst_increase(&run.theta, &run.theta_hat);
        assert!(w <= SLACK, "{name}: largest increase {w:e}");
    }
}
