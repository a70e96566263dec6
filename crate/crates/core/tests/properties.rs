use std::sync::Arc;

use driftlab_core::fields::{lp_norm_of, truncation, weak_lp_quasinorm_of};
use driftlab_core::{
    build_grid, solve_primal, Domain, DriftSpec, ProblemSpec, ScalarField, SolverConfig, Source, SpaceGrid, TimeGrid,
};
use proptest::prelude::*;

fn interval(n: usize) -> Arc<SpaceGrid> {
    Arc::new(build_grid(&Domain::interval(0.0, 1.0).unwrap(), n).unwrap())
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, n)
}

fn inner(grid: &SpaceGrid, a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).zip(grid.weights()).map(|((x, y), w)| x * y * w).sum()
}

fn problem(grid: Arc<SpaceGrid>, scale: f64, u0: Vec<f64>, f: Option<Vec<f64>>) -> ProblemSpec {
    let source = f.map_or(Source::Zero, Source::Steady);
    let drift = DriftSpec::Linear { scale, perturbation: 0.0 };
    ProblemSpec::new(grid, TimeGrid::new(0.5, 20).unwrap(), 0.7, drift, u0, source).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn holder_inequality(a in values(24), b in values(24)) {
        let g = interval(24);
        let lhs = inner(&g, &a, &b).abs();
        let rhs = lp_norm_of(&g, &a, 3.0).unwrap() * lp_norm_of(&g, &b, 1.5).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn weak_quasinorm_is_dominated_by_the_norm(a in values(24), p in 1.0f64..4.0) {
        let g = interval(24);
        let weak = weak_lp_quasinorm_of(&g, &a, p).unwrap();
        prop_assert!(weak <= lp_norm_of(&g, &a, p).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn positive_minus_negative_part(a in values(30)) {
        let f = ScalarField::new(interval(30), a.clone()).unwrap();
        let (pos, neg) = (f.pos_part(), f.neg_part());
        for ((p, n), v) in pos.values().iter().zip(neg.values()).zip(&a) {
            prop_assert_eq!(p - n, *v);
            prop_assert!(p * n == 0.0);
        }
    }

    #[test]
    fn truncation_splits_the_positive_part(s in -10.0f64..10.0, delta in 0.01f64..5.0) {
        let t = truncation(s, delta);
        prop_assert!((0.0..=delta).contains(&t));
        prop_assert!((t + truncation(s - delta, f64::INFINITY) - s.max(0.0)).abs() < 1e-12);
    }

    #[test]
    fn solution_map_is_linear(a in values(20), b in values(20), c in -3.0f64..3.0) {
        let g = interval(20);
        let cfg = SolverConfig::default();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + c * y).collect();
        let ua = solve_primal(&problem(g.clone(), -1.0, a, None), &cfg).unwrap().trajectory;
        let ub = solve_primal(&problem(g.clone(), -1.0, b, None), &cfg).unwrap().trajectory;
        let um = solve_primal(&problem(g, -1.0, mix, None), &cfg).unwrap().trajectory;
        for ((x, y), m) in ua.last().iter().zip(ub.last()).zip(um.last()) {
            prop_assert!((x + c * y - m).abs() <= 1e-10 * (1.0 + m.abs()));
        }
    }

    #[test]
    fn maximum_principle_and_l1_contraction(a in values(32), scale in -3.0f64..0.0) {
        let g = interval(32);
        let res = solve_primal(&problem(g.clone(), scale, a.clone(), None), &SolverConfig::default()).unwrap();
        let sup0 = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let l10 = lp_norm_of(&g, &a, 1.0).unwrap();
        for state in res.trajectory.states() {
            prop_assert!(state.iter().all(|v| v.abs() <= sup0 * (1.0 + 1e-12)));
            prop_assert!(lp_norm_of(&g, state, 1.0).unwrap() <= l10 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn energy_inequality(a in values(32), scale in -3.0f64..0.0) {
        let g = interval(32);
        let p = problem(g, scale, a, None);
        let res = solve_primal(&p, &SolverConfig::default()).unwrap();
        let dt = p.time.dt();
        let mut dissipated = 0.0;
        let e0 = res.l2.values[0].powi(2);
        for k in 1..res.l2.values.len() {
            dissipated += 2.0 * p.nu * dt * res.gradient_energy.values[k];
            prop_assert!(res.l2.values[k].powi(2) + dissipated <= e0 * (1.0 + 1e-10));
        }
    }
}
