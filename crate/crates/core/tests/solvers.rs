mod common;

use common::{random_mdp, unit_cost_state};
use lpir_core::model::{AbstractModel, Policy};
use lpir_core::operators::apply_t;
use lpir_core::solvers::*;
use lpir_core::space::CostTable;
use lpir_core::tabular::TabularMdp;
use lpir_core::Error;

/// J* as the pointwise minimum of J_μ over every stationary policy.
fn j_star_brute_force(m: &TabularMdp) -> CostTable {
    let mut best = vec![f64::INFINITY; m.n_states()];
    for mu in Policy::enumerate(m) {
        let j = m.solve_j_mu(&mu).unwrap();
        for (b, v) in best.iter_mut().zip(j.iter()) {
            *b = b.min(*v);
        }
    }
    CostTable(best)
}

fn cfg() -> SolverConfig {
    SolverConfig {
        stop_tol: 1e-11,
        ..SolverConfig::default()
    }
}

#[test]
fn optimal_cost_matches_brute_force() {
    for i in 0..15 {
        let m = random_mdp(30, i, 6, 3);
        let (j, _) = optimal_cost(&m).unwrap();
        assert!(m.space().dist(&j, &j_star_brute_force(&m)) <= 1e-9);
    }
}

#[test]
fn vi_single_state_halves_the_error() {
    let m = unit_cost_state(0.5);
    let out = vi_solve(
        &m,
        &SolverConfig {
            max_iters: 4,
            ..cfg()
        },
    )
    .unwrap();
    let j: Vec<f64> = out.records.iter().map(|r| r.j[0]).collect();
    assert_eq!(j, vec![0.0, 1.0, 1.5, 1.75, 1.875]);
    let errs: Vec<f64> = out.records.iter().map(|r| r.err_norm).collect();
    for w in errs.windows(2) {
        assert!((w[1] - 0.5 * w[0]).abs() < 1e-14);
    }
}

#[test]
fn vi_from_j_star_stops_after_one_iteration() {
    let m = random_mdp(31, 0, 8, 3);
    let (j_star, _) = optimal_cost(&m).unwrap();
    let out = vi_solve(
        &m,
        &SolverConfig {
            init: Some(j_star.clone()),
            ..cfg()
        },
    )
    .unwrap();
    assert!(out.converged);
    assert_eq!(out.iterations, 1);
    assert!(m.space().dist(&out.j, &j_star) <= 1e-9);
}

#[test]
fn vi_converges_to_j_star() {
    for i in 0..10 {
        let m = random_mdp(32, i, 10, 3);
        let out = vi_solve(&m, &cfg()).unwrap();
        assert!(out.converged);
        let oracle = j_star_brute_force(&m);
        let bound = 1e-11 * m.alpha() / (1.0 - m.alpha()) + 1e-9;
        assert!(m.space().dist(&out.j, &oracle) <= bound);
        // geometric error decay
        for w in out.records.windows(2) {
            assert!(w[1].err_norm <= m.alpha() * w[0].err_norm + 1e-12);
        }
    }
}

#[test]
fn pi_single_state_one_evaluation() {
    let m = unit_cost_state(0.5);
    let out = pi_solve(&m, &cfg()).unwrap();
    assert_eq!(out.iterations, 1);
    assert!((out.j[0] - 2.0).abs() < 1e-14);
}

#[test]
fn pi_improves_monotonically_and_agrees() {
    for i in 0..10 {
        let m = random_mdp(33, i, 10, 3);
        let out = pi_solve(&m, &cfg()).unwrap();
        assert!(out.converged);
        for w in out.records[1..].windows(2) {
            assert!(w[1].j.le(&w[0].j, 1e-9));
        }
        let vi = vi_solve(&m, &cfg()).unwrap();
        assert!(m.space().dist(&out.j, &vi.j) <= 1e-8);
        let (_, greedy) = apply_t(&m, &out.j).unwrap();
        assert_eq!(greedy, out.policy);
    }
}

#[test]
fn opi_with_horizon_one_is_vi() {
    let m = random_mdp(34, 0, 10, 3);
    let vi = vi_solve(
        &m,
        &SolverConfig {
            max_iters: 30,
            ..cfg()
        },
    )
    .unwrap();
    let opi = opi_solve(
        &m,
        &SolverConfig {
            max_iters: 30,
            opi_horizon: 1,
            ..cfg()
        },
    )
    .unwrap();
    assert_eq!(vi.records.len(), opi.records.len());
    for (a, b) in vi.records.iter().zip(&opi.records) {
        assert!(m.space().dist(&a.j, &b.j) <= 1e-12);
    }
}

#[test]
fn opi_converges_for_several_horizons() {
    let m = random_mdp(35, 0, 10, 3);
    let (j_star, _) = optimal_cost(&m).unwrap();
    for h in [1, 5, 50] {
        let out = opi_solve(
            &m,
            &SolverConfig {
                opi_horizon: h,
                ..cfg()
            },
        )
        .unwrap();
        assert!(out.converged);
        assert!(m.space().dist(&out.j, &j_star) <= 1e-8);
    }
}

#[test]
fn lambda_pir_with_p_one_is_vi() {
    let m = random_mdp(36, 0, 10, 3);
    let base = SolverConfig {
        max_iters: 40,
        ..cfg()
    };
    let vi = vi_solve(&m, &base).unwrap();
    let pir = lambda_pir_solve(
        &m,
        &SolverConfig {
            prob: ProbSchedule::Constant(1.0),
            ..base.clone()
        },
    )
    .unwrap();
    assert_eq!(pir.branch_count(Step::Lambda), 0);
    for (a, b) in vi.records.iter().zip(&pir.records) {
        assert_eq!(a.j, b.j);
    }
}

#[test]
fn lambda_pir_with_lambda_zero_tracks_vi() {
    let m = random_mdp(37, 0, 10, 3);
    let base = SolverConfig {
        max_iters: 40,
        ..cfg()
    };
    let vi = vi_solve(&m, &base).unwrap();
    let pir = lambda_pir_solve(
        &m,
        &SolverConfig {
            lambda: 0.0,
            ..base.clone()
        },
    )
    .unwrap();
    for (a, b) in vi.records.iter().zip(&pir.records) {
        assert!(m.space().dist(&a.j, &b.j) <= 1e-12);
    }
}

#[test]
fn lambda_pir_converges_from_arbitrary_start() {
    for i in 0..10 {
        let m = random_mdp(38, i, 10, 3);
        let (j_star, _) = optimal_cost(&m).unwrap();
        let init = CostTable(
            (0..m.n_states())
                .map(|x| (x as f64 * 7.3).sin() * 50.0)
                .collect(),
        );
        let out = lambda_pir_solve(
            &m,
            &SolverConfig {
                init: Some(init),
                seed: i,
                lambda: 0.7,
                ..cfg()
            },
        )
        .unwrap();
        assert!(out.converged);
        assert!(m.space().dist(&out.j, &j_star) <= 1e-8);
    }
}

#[test]
fn lambda_pir_sandwich_holds_from_dominating_start() {
    for seed in 0..50u64 {
        let m = random_mdp(39, seed, 10, 3);
        let j0 = make_dominating_j0(&m).unwrap();
        let cfg = SolverConfig {
            init: Some(j0),
            require_dominating: true,
            seed,
            lambda: 0.6,
            ..cfg()
        };
        let out = lambda_pir_solve(&m, &cfg).unwrap();
        for r in &out.records {
            assert!(
                r.lower_ok && r.upper_ok && r.dominated_ok == Some(true),
                "seed {seed} k {}",
                r.k
            );
        }
        for w in out.records.windows(2) {
            assert!(w[1].j.le(&w[0].j, SANDWICH_TOL));
        }
    }
}

#[test]
fn dominating_requirement_rejects_low_start() {
    let m = unit_cost_state(0.5);
    let cfg = SolverConfig {
        require_dominating: true,
        ..cfg()
    };
    let err = lambda_pir_solve(&m, &cfg).unwrap_err();
    assert!(matches!(
        err,
        Error::InvariantViolation { iteration: 0, .. }
    ));
}

#[test]
fn dominating_start_constant() {
    let m = unit_cost_state(0.5);
    assert_eq!(make_dominating_j0(&m).unwrap().0, vec![4.0]);
    for i in 0..10 {
        let m = random_mdp(40, i, 10, 3);
        let j0 = make_dominating_j0(&m).unwrap();
        let (tj, _) = apply_t(&m, &j0).unwrap();
        assert!(tj.le(&j0, 0.0));
    }
}

#[test]
fn branch_frequency_matches_probability() {
    let n = 4000u64;
    for &p in &[0.2, 0.5, 0.8] {
        let hits = (0..n)
            .filter(|&k| lpir_core::rng::bernoulli(9, k, 0, p))
            .count() as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((hits - n as f64 * p).abs() <= 5.0 * sigma, "p={p}: {hits}");
    }
}

#[test]
fn solver_follows_the_branch_stream() {
    let m = random_mdp(41, 0, 10, 3);
    let c = SolverConfig {
        max_iters: 20,
        stop_tol: 1e-300,
        seed: 9,
        ..cfg()
    };
    let out = lambda_pir_solve(&m, &c).unwrap();
    for r in &out.records[1..] {
        let vi = lpir_core::rng::bernoulli(9, r.k as u64 - 1, 0, 0.5);
        assert_eq!(r.branch, Some(if vi { Step::Vi } else { Step::Lambda }));
    }
}

#[test]
fn same_seed_same_run() {
    let m = random_mdp(42, 0, 10, 3);
    let c = SolverConfig { seed: 17, ..cfg() };
    assert_eq!(
        lambda_pir_solve(&m, &c).unwrap(),
        lambda_pir_solve(&m, &c).unwrap()
    );
}

#[test]
fn probability_table_schedule() {
    let m = random_mdp(43, 0, 6, 2);
    let c = SolverConfig {
        prob: ProbSchedule::Table(vec![1.0, 1.0, 0.0]),
        max_iters: 6,
        stop_tol: 1e-300,
        ..cfg()
    };
    let out = lambda_pir_solve(&m, &c).unwrap();
    let branches: Vec<_> = out.records[1..].iter().map(|r| r.branch.unwrap()).collect();
    assert_eq!(
        branches,
        vec![
            Step::Vi,
            Step::Vi,
            Step::Lambda,
            Step::Lambda,
            Step::Lambda,
            Step::Lambda
        ]
    );
}

#[test]
fn config_validation() {
    let m = unit_cost_state(0.5);
    for bad in [
        SolverConfig {
            lambda: 1.0,
            ..cfg()
        },
        SolverConfig {
            prob: ProbSchedule::Constant(1.5),
            ..cfg()
        },
        SolverConfig {
            prob: ProbSchedule::Table(vec![]),
            ..cfg()
        },
        SolverConfig {
            init: Some(CostTable::zeros(3)),
            ..cfg()
        },
    ] {
        assert!(lambda_pir_solve(&m, &bad).is_err(), "{bad:?}");
    }
}
