use hjblab::candidates::{solve_hjb_from_steady_state, CandidateValueFn, SolveOptions};
use hjblab::dp_oracle::{dp_solve, DPConfig, DP_ERROR_BOUND};
use hjblab::hamiltonian::hamiltonian;
use hjblab::model::{ModelSpec, ProductionSpec};
use hjblab::rollout::{
    certify, comparison_check, integrate_with_control, pure_accumulation, Drift, IntegratorConfig, Tolerances,
    Trajectory,
};
use proptest::prelude::*;

fn max_error(traj: &Trajectory, exact: impl Fn(f64) -> f64) -> f64 {
    traj.t.iter().zip(&traj.k).map(|(&t, &k)| (k - exact(t)).abs()).fold(0.0, f64::max)
}

#[test]
fn rk4_error_drops_eightfold_when_dt_halves() {
    let linear = ModelSpec::prop2();
    let sqrt = ModelSpec::theorem2();
    for (dt, ratio_floor) in [(0.2, 8.0), (0.1, 8.0)] {
        let run = |dt: f64| {
            let cfg = IntegratorConfig::rk4(dt, 2.0);
            let a = integrate_with_control(&linear, |_| Ok(0.25), 1.0, &cfg).unwrap();
            let b = pure_accumulation(&sqrt, 0.5, &cfg).unwrap();
            (max_error(&a, |t| 0.25 + 0.75 * t.exp()), max_error(&b, |t| (0.5f64.sqrt() + t / 2.0).powi(2)))
        };
        let (coarse, fine) = (run(dt), run(dt / 2.0));
        assert!(coarse.0 / fine.0 >= ratio_floor, "exponential path: {coarse:?} vs {fine:?}");
        assert!(coarse.1 / fine.1 >= ratio_floor, "accumulation path: {coarse:?} vs {fine:?}");
    }
    // constant paths carry no truncation error at all
    let cfg = IntegratorConfig::rk4(0.1, 5.0);
    let still = integrate_with_control(&linear, Ok, 1.3, &cfg).unwrap();
    assert_eq!(max_error(&still, |_| 1.3), 0.0);
}

#[test]
fn accepted_candidates_agree_with_the_dp_oracle() {
    let desk = DPConfig::desk();
    let tols = Tolerances::default();
    let t2 = ModelSpec::theorem2();
    let ode = solve_hjb_from_steady_state(&t2, 0.1, 2.0, &SolveOptions::default()).unwrap().candidate();
    let cases = [
        (ModelSpec::prop2(), CandidateValueFn::Prop2Singular, vec![0.5, 1.0, 2.0]),
        (t2, ode, vec![0.2, 0.5, 1.0, 1.5]),
    ];
    for (model, cand, starts) in cases {
        let table = dp_solve(&model, &desk).unwrap();
        let cfg = IntegratorConfig::for_model(&model);
        for k0 in starts {
            let r = certify(&model, &cand, k0, &cfg, &tols).unwrap();
            assert!(r.accepted(), "{k0}: {:?}", r.reason);
            let gap = (cand.eval(k0).unwrap() - table.value_at(k0).unwrap()).abs();
            assert!(gap <= r.tol_g + DP_ERROR_BOUND, "k0={k0}: |V − V_dp| = {gap}");
        }
    }
}

fn catalog(i: usize) -> ModelSpec {
    [ModelSpec::prop1(1.0), ModelSpec::prop2(), ModelSpec::theorem2()][i].clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_is_nondecreasing_in_k(which in 0usize..3, k in 0.01f64..10.0, dk in 0.0f64..5.0, p in 0.0f64..5.0) {
        let m = catalog(which);
        let (lo, hi) = (hamiltonian(&m, k, p).unwrap(), hamiltonian(&m, k + dk, p).unwrap());
        let ok = match (lo.finite(), hi.finite()) {
            (Some(a), Some(b)) => b >= a - 1e-12 * a.abs().max(1.0),
            _ => hi >= lo,
        };
        prop_assert!(ok, "{lo:?} > {hi:?}");
    }

    #[test]
    fn partial_payoff_is_nondecreasing(which in 0usize..3, share in 0.0f64..1.5, k0 in 0.1f64..3.0) {
        let m = catalog(which);
        let traj = integrate_with_control(&m, |k| Ok(share * m.production.eval(k)?), k0, &IntegratorConfig::rk4(1e-2, 10.0)).unwrap();
        prop_assert!(traj.payoff_partial.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn comparison_ordering(f_idx in 0usize..3, c_hi in 0.0f64..0.5, extra in 0.0f64..0.5, k0_hi in 0.5f64..3.0, shrink in 0.5f64..1.0) {
        let f = [ProductionSpec::Sqrt {}, ProductionSpec::Linear {}, ProductionSpec::kinked_example()][f_idx].clone();
        let lo = Drift { production: f.clone(), consumption: c_hi + extra };
        let hi = Drift { production: f, consumption: c_hi };
        let r = comparison_check(&lo, &hi, k0_hi * shrink, k0_hi, &IntegratorConfig::rk4(1e-3, 3.0)).unwrap();
        prop_assert!(r.dynamics_ordered && r.ordered, "{r:?}");
    }
}
