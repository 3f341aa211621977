mod common;

use common::random_mdp;
use lpir_core::approx::*;
use lpir_core::control::{ControlProblem, Interval};
use lpir_core::model::{AbstractModel, Policy};
use lpir_core::operators::{apply_t_lambda, apply_t_mu};
use lpir_core::quadratic::QuadraticValue;
use lpir_core::rng::{stream, Purpose, Rng};
use lpir_core::solvers::ProbSchedule;
use lpir_core::space::CostTable;

fn mean_horizon(lambda: f64, mode: GeometricMode, n: u64) -> f64 {
    (0..n)
        .map(|s| draw_horizon(lambda, mode, &mut stream(1, Purpose::Horizon, 0, s)).unwrap() as f64)
        .sum::<f64>()
        / n as f64
}

#[test]
fn horizon_means() {
    // sd of L is sqrt(1-λ)/λ ≈ 9.5 for λ = 0.1; 5σ over 10⁵ draws ≈ 0.15
    assert!((mean_horizon(0.1, GeometricMode::Paper, 100_000) - 10.0).abs() < 0.3);
    assert!((mean_horizon(0.5, GeometricMode::Unbiased, 100_000) - 2.0).abs() < 0.03);
    assert_eq!(GeometricMode::Paper.mean(0.1), 10.0);
    assert_eq!(GeometricMode::Unbiased.mean(0.5), 2.0);
}

#[test]
fn horizon_distribution_matches_pmf() {
    let n = 200_000u64;
    let lambda = 0.6;
    let mut counts = [0usize; 4];
    for s in 0..n {
        let l = draw_horizon(
            lambda,
            GeometricMode::Unbiased,
            &mut stream(2, Purpose::Horizon, 0, s),
        )
        .unwrap();
        assert!(l >= 1);
        if l <= 4 {
            counts[l - 1] += 1;
        }
    }
    for (i, &c) in counts.iter().enumerate() {
        let p = (1.0 - lambda) * lambda.powi(i as i32);
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((c as f64 - n as f64 * p).abs() < 5.0 * sigma, "ℓ={}", i + 1);
    }
}

#[test]
fn horizon_rejects_bad_lambda() {
    for lambda in [0.0, 1.0, -0.5, f64::NAN] {
        assert!(draw_horizon(
            lambda,
            GeometricMode::Paper,
            &mut stream(0, Purpose::Horizon, 0, 0)
        )
        .is_err());
    }
}

#[test]
fn random_horizon_rollout_is_unbiased_for_t_lambda() {
    let m = random_mdp(50, 0, 6, 2);
    let mu = Policy::uniform(m.n_states(), 0);
    let j = m
        .space()
        .random_cost(&mut stream(50, Purpose::Trial, 0, 0), 10.0);
    let lambda = 0.5;
    let n = 40_000u64;
    // T_μ^ℓ J for ℓ up to a cap beyond which draws are vanishingly rare
    let mut powers = vec![apply_t_mu(&m, &mu, &j).unwrap()];
    for _ in 1..64 {
        powers.push(apply_t_mu(&m, &mu, powers.last().unwrap()).unwrap());
    }
    let mut sum = CostTable::zeros(m.n_states());
    let mut sq = CostTable::zeros(m.n_states());
    for s in 0..n {
        let l = draw_horizon(
            lambda,
            GeometricMode::Unbiased,
            &mut stream(50, Purpose::Horizon, 0, s),
        )
        .unwrap();
        let v = &powers[l.min(64) - 1];
        for x in 0..m.n_states() {
            sum[x] += v[x];
            sq[x] += v[x] * v[x];
        }
    }
    let exact = apply_t_lambda(&m, &mu, &j, lambda, 1e-12).unwrap();
    for x in 0..m.n_states() {
        let mean = sum[x] / n as f64;
        let var = sq[x] / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - exact[x]).abs() <= 5.0 * se + 1e-12,
            "x={x}: {mean} vs {}",
            exact[x]
        );
    }
}

fn pair(x: Vec<f64>, v: f64) -> SamplePair {
    SamplePair {
        x0: x,
        v,
        branch: Branch::OneStep,
        horizon: 1,
    }
}

fn grid_samples(f: impl Fn(f64, f64) -> f64) -> Vec<SamplePair> {
    let axis = Interval::new(-1.0, 1.0).linspace(7);
    let mut out = Vec::new();
    for &a in &axis {
        for &b in &axis {
            out.push(pair(vec![a, b], f(a, b)));
        }
    }
    out
}

#[test]
fn fit_recovers_exact_quadratic() {
    let samples = grid_samples(|a, b| 2.0 * a * a + 0.6 * a * b + 1.0 * b * b + 0.5);
    let fit = fit_theta(&samples, &QuadraticValue::zero(2), 0.0).unwrap();
    assert!(!fit.projected && !fit.kept_incumbent);
    let t = &fit.theta;
    assert!((t.entry(0, 0) - 2.0).abs() < 1e-8);
    assert!((t.entry(0, 1) - 0.3).abs() < 1e-8);
    assert!((t.entry(1, 0) - 0.3).abs() < 1e-8);
    assert!((t.entry(1, 1) - 1.0).abs() < 1e-8);
    assert!((t.b - 0.5).abs() < 1e-8);
    assert!(fit.unconstrained_residual < 1e-8);
}

#[test]
fn fit_projects_concave_targets() {
    let samples: Vec<SamplePair> = Interval::new(-1.0, 1.0)
        .linspace(21)
        .into_iter()
        .map(|x| pair(vec![x], 3.0 - x * x))
        .collect();
    let mean = samples.iter().map(|s| s.v).sum::<f64>() / samples.len() as f64;
    let fit = fit_theta(&samples, &QuadraticValue::zero(1), 1e-8).unwrap();
    assert!(fit.projected);
    assert!(!fit.kept_incumbent);
    assert_eq!(fit.theta.entry(0, 0), 0.0);
    assert!((fit.theta.b - mean).abs() < 1e-12);
}

#[test]
fn fit_error_scales_with_noise() {
    let mut rng = stream(3, Purpose::Trial, 0, 0);
    for sigma in [0.01, 0.1] {
        let samples: Vec<SamplePair> = (0..400)
            .map(|_| {
                let x: f64 = rng.gen_range(-1.0..1.0);
                let noise: f64 = rng.gen_range(-1.0..1.0) * sigma * 3f64.sqrt();
                pair(vec![x], 2.0 * x * x + 1.0 + noise)
            })
            .collect();
        let fit = fit_theta(&samples, &QuadraticValue::zero(1), 1e-8).unwrap();
        assert!((fit.theta.entry(0, 0) - 2.0).abs() < 10.0 * sigma / 20.0 * 3.0);
        assert!((fit.theta.b - 1.0).abs() < 10.0 * sigma / 20.0 * 3.0);
    }
}

#[test]
fn fit_keeps_incumbent_when_projection_is_worse() {
    // indefinite target: best PSD fit from refitting is worse than a
    // well-chosen incumbent
    let samples = grid_samples(|a, b| 4.0 * a * a - 4.0 * b * b);
    let incumbent = QuadraticValue::new(2, vec![4.0, 0.0, 0.0, 0.0], -1.3).unwrap();
    let fit = fit_theta(&samples, &incumbent, 0.0).unwrap();
    assert!(fit.projected);
    if fit.kept_incumbent {
        assert_eq!(fit.theta, incumbent);
    }
    assert!(fit.theta.min_eigenvalue() >= -1e-10);
}

#[test]
fn fit_rejects_too_few_samples_and_degenerate_designs() {
    let few = vec![pair(vec![0.0], 1.0)];
    assert!(fit_theta(&few, &QuadraticValue::zero(1), 0.0).is_err());
    let same: Vec<SamplePair> = (0..10).map(|_| pair(vec![0.5], 1.0)).collect();
    assert!(fit_theta(&same, &QuadraticValue::zero(1), 0.0).is_err());
    let bad = vec![
        pair(vec![0.0], f64::NAN),
        pair(vec![1.0], 1.0),
        pair(vec![2.0], 1.0),
    ];
    assert!(fit_theta(&bad, &QuadraticValue::zero(1), 0.0).is_err());
}

fn small_linear() -> ControlProblem {
    let mut p = ControlProblem::linear_scalar();
    p.initial_box = vec![Interval::new(-1.0, 1.0)];
    p
}

#[test]
fn training_is_deterministic() {
    let p = ControlProblem::pendulum();
    let cfg = TrainConfig {
        iterations: 3,
        samples: 40,
        seed: 7,
        ..TrainConfig::default()
    };
    let a = train(&p, &cfg, &QuadraticValue::zero(2)).unwrap();
    let b = train(&p, &cfg, &QuadraticValue::zero(2)).unwrap();
    assert_eq!(a, b);
    let c = train(
        &p,
        &TrainConfig { seed: 8, ..cfg },
        &QuadraticValue::zero(2),
    )
    .unwrap();
    assert_ne!(a.0, c.0);
}

#[test]
fn zero_iterations_return_the_start() {
    let p = small_linear();
    let theta0 = QuadraticValue::scalar(3.0, 1.0).unwrap();
    let (theta, log) = train(
        &p,
        &TrainConfig {
            iterations: 0,
            ..TrainConfig::default()
        },
        &theta0,
    )
    .unwrap();
    assert_eq!(theta, theta0);
    assert_eq!(log.thetas, vec![theta0]);
    assert!(log.iterations.is_empty());
}

#[test]
fn every_iterate_is_psd() {
    for p in [ControlProblem::pendulum(), ControlProblem::sincos()] {
        let cfg = TrainConfig {
            iterations: 4,
            samples: 60,
            per_sample_branch: true,
            ..TrainConfig::default()
        };
        let (_, log) = train(&p, &cfg, &QuadraticValue::zero(2)).unwrap();
        for t in &log.thetas {
            assert!(t.min_eigenvalue() >= -1e-10);
        }
        for it in &log.iterations {
            assert!(it.branch.is_none());
            assert!(it.min_eigenvalue >= -1e-10);
        }
    }
}

#[test]
fn vi_scheme_uses_one_step_targets_only() {
    let cfg = TrainConfig {
        scheme: EvalScheme::Vi,
        iterations: 3,
        ..TrainConfig::default()
    };
    let (_, log) = train(&small_linear(), &cfg, &QuadraticValue::zero(1)).unwrap();
    for it in &log.iterations {
        assert_eq!(it.branch, Some(Branch::OneStep));
        assert_eq!(it.transitions, cfg.samples);
    }
    assert_eq!(log.sample_budget(), 3 * cfg.samples);
}

#[test]
fn opi_scheme_uses_fixed_rollouts() {
    let cfg = TrainConfig {
        scheme: EvalScheme::Opi { horizon: 4 },
        iterations: 2,
        ..TrainConfig::default()
    };
    let (_, log) = train(&small_linear(), &cfg, &QuadraticValue::zero(1)).unwrap();
    for it in &log.iterations {
        assert_eq!(it.branch, Some(Branch::Rollout));
        assert_eq!(it.transitions, 4 * cfg.samples);
    }
}

#[test]
fn forced_branches_follow_probability() {
    let cfg = TrainConfig {
        prob: ProbSchedule::Constant(1.0),
        iterations: 3,
        ..TrainConfig::default()
    };
    let (_, log) = train(&small_linear(), &cfg, &QuadraticValue::zero(1)).unwrap();
    assert!(log
        .iterations
        .iter()
        .all(|i| i.branch == Some(Branch::OneStep)));
    let cfg = TrainConfig {
        prob: ProbSchedule::Constant(0.0),
        ..cfg
    };
    let (_, log) = train(&small_linear(), &cfg, &QuadraticValue::zero(1)).unwrap();
    assert!(log
        .iterations
        .iter()
        .all(|i| i.branch == Some(Branch::Rollout)));
}

#[test]
fn rollout_target_one_step() {
    let p = small_linear();
    let theta = QuadraticValue::scalar(1.0, 0.0).unwrap();
    let r = rollout_target(&p, &theta, &[1.0], 1).unwrap();
    // g(1, u*) + 0.95 (1 − 0.5 u*)² at the greedy vertex
    let u: f64 = 0.95 / (2.0 * (1.0 + 0.95 * 0.25));
    let oracle = 1.0 + u * u + 0.95 * (1.0 - 0.5 * u).powi(2);
    assert!((r.value - oracle).abs() < 1e-12);
    assert_eq!(r.clips, 0);
    assert!(rollout_target(&p, &theta, &[1.0], 0).is_err());
    assert!(rollout_target(&p, &theta, &[1000.0], 1).is_err());
}

#[test]
fn rollouts_count_box_exits() {
    let mut p = small_linear();
    p.state_box = vec![Interval::new(-1.0, 1.0)];
    p.control_box = Interval::new(-1.0, -1.0);
    // u = −1 pushes x up by 0.5 each step
    let r = rollout_target(&p, &QuadraticValue::zero(1), &[0.9], 3).unwrap();
    assert_eq!(r.clips, 3);
}

#[test]
fn train_rejects_bad_configs() {
    let p = small_linear();
    let z = QuadraticValue::zero(1);
    assert!(train(
        &p,
        &TrainConfig {
            lambda: 1.0,
            ..TrainConfig::default()
        },
        &z
    )
    .is_err());
    assert!(train(
        &p,
        &TrainConfig {
            samples: 1,
            ..TrainConfig::default()
        },
        &z
    )
    .is_err());
    assert!(train(&p, &TrainConfig::default(), &QuadraticValue::zero(2)).is_err());
    assert!(train(
        &p,
        &TrainConfig {
            scheme: EvalScheme::Opi { horizon: 0 },
            ..TrainConfig::default()
        },
        &z
    )
    .is_err());
}
