//! Data-driven λ-PIR for quadratic value functions.
//!
//! Each training iteration draws one Bernoulli(`p_k`) to choose between the
//! one-step target `min_u g(x₀,u) + α J̃(f(x₀,u), θ)` and a rollout target
//! along the greedy policy with a geometric horizon `L`, collects `S`
//! sample pairs `(x₀, v)` with `x₀` uniform over the initial box, and
//! refits `θ = (P, b)` by least squares followed by projection onto
//! `P ⪰ 0`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::{greedy_control, ControlProblem, Plant};
use crate::error::{param, Error, Result};
use crate::quadratic::QuadraticValue;
use crate::rng::{stream, unit, Purpose, StreamRng};
use crate::solvers::ProbSchedule;

/// Parameterization of the geometric rollout horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometricMode {
    /// `P(L = ℓ) = (1 − λ) λ^(ℓ−1)`, mean `1/(1 − λ)`: `E[T_μ^L J] = T_μ^(λ) J`.
    Unbiased,
    /// `P(L = ℓ) = λ (1 − λ)^(ℓ−1)`, mean `1/λ`.
    Paper,
}

impl GeometricMode {
    pub fn mean(self, lambda: f64) -> f64 {
        match self {
            GeometricMode::Unbiased => 1.0 / (1.0 - lambda),
            GeometricMode::Paper => 1.0 / lambda,
        }
    }
}

/// Draws `L ≥ 1` by inversion.
pub fn draw_horizon(lambda: f64, mode: GeometricMode, rng: &mut StreamRng) -> Result<usize> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(param("lambda", format!("{lambda} not in (0, 1)")));
    }
    // continuation probability
    let keep = match mode {
        GeometricMode::Unbiased => lambda,
        GeometricMode::Paper => 1.0 - lambda,
    };
    let u = 1.0 - unit(rng);
    let extra = libm::floor(libm::log(u) / libm::log(keep));
    Ok(1 + extra.min(1e9) as usize)
}

/// How the evaluation step of each iteration is formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EvalScheme {
    /// Randomized between the one-step and geometric-rollout targets.
    LambdaPir,
    /// Always the one-step target.
    Vi,
    /// Always a rollout of fixed length.
    Opi { horizon: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda: f64,
    pub iterations: usize,
    pub samples: usize,
    pub prob: ProbSchedule,
    pub seed: u64,
    pub geometric_mode: GeometricMode,
    pub ridge: f64,
    pub scheme: EvalScheme,
    /// Draw the branch per sample instead of once per iteration.
    pub per_sample_branch: bool,
    /// Points per axis of the evaluation grid used for `grid_sup_diff`.
    pub grid_points: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.1,
            iterations: 5,
            samples: 100,
            prob: ProbSchedule::Constant(0.5),
            seed: 0,
            geometric_mode: GeometricMode::Paper,
            ridge: 1e-8,
            scheme: EvalScheme::LambdaPir,
            per_sample_branch: false,
            grid_points: 21,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, state_dim: usize) -> Result<()> {
        if self.samples < QuadraticValue::n_params(state_dim) {
            return Err(param(
                "samples",
                format!(
                    "{} samples cannot fit {} parameters",
                    self.samples,
                    QuadraticValue::n_params(state_dim)
                ),
            ));
        }
        if self.scheme == EvalScheme::LambdaPir && !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(param("lambda", format!("{} not in (0, 1)", self.lambda)));
        }
        if let EvalScheme::Opi { horizon: 0 } = self.scheme {
            return Err(param("horizon", "must be at least 1"));
        }
        if !(self.ridge >= 0.0) {
            return Err(param("ridge", "must be nonnegative"));
        }
        if self.grid_points == 0 {
            return Err(param("grid_points", "must be positive"));
        }
        self.prob.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    OneStep,
    Rollout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePair {
    pub x0: Vec<f64>,
    pub v: f64,
    pub branch: Branch,
    /// Rollout length `L` (1 for the one-step branch).
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rollout {
    pub value: f64,
    pub clips: usize,
}

/// `Σ_{ℓ<L} α^ℓ g(x_ℓ, u_ℓ) + α^L J̃(x_L, θ)` along the greedy policy of
/// `θ`, clipping states into the box after each transition.
pub fn rollout_target<P: Plant>(
    problem: &ControlProblem<P>,
    theta: &QuadraticValue,
    x0: &[f64],
    horizon: usize,
) -> Result<Rollout> {
    if horizon == 0 {
        return Err(param("horizon", "must be at least 1"));
    }
    if x0
        .iter()
        .zip(&problem.state_box)
        .any(|(v, b)| !b.contains(*v))
    {
        return Err(param("x0", "outside the state box"));
    }
    let mut x = x0.to_vec();
    let mut value = 0.0;
    let mut discount = 1.0;
    let mut clips = 0;
    for _ in 0..horizon {
        let u = greedy_control(problem, theta, &x)?.u;
        value += discount * problem.stage_cost(&x, u);
        discount *= problem.alpha;
        x = problem.plant.step(&x, u);
        clips += problem.clip_state(&mut x) as usize;
    }
    value += discount * theta.eval(&x);
    Ok(Rollout { value, clips })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub pairs: Vec<SamplePair>,
    /// The iteration's branch; `None` when drawn per sample.
    pub branch: Option<Branch>,
    /// Transitions simulated to build the targets.
    pub transitions: usize,
    pub clips: usize,
}

/// Samples for training iteration `k` (1-based). Streams:
/// branch `(seed, Branch, k, 0)` (or `s + 1` per sample),
/// initial state `(seed, InitialState, k, s)`, horizon `(seed, Horizon, k, s)`.
pub fn collect_samples<P: Plant>(
    problem: &ControlProblem<P>,
    theta: &QuadraticValue,
    config: &TrainConfig,
    k: usize,
) -> Result<SampleBatch> {
    let seed = config.seed;
    let p = config.prob.at(k.saturating_sub(1));
    let draw = |s: u64| crate::rng::bernoulli(seed, k as u64, s, p);
    let iteration_branch = match config.scheme {
        EvalScheme::Vi => Some(Branch::OneStep),
        EvalScheme::Opi { .. } => Some(Branch::Rollout),
        EvalScheme::LambdaPir if config.per_sample_branch => None,
        EvalScheme::LambdaPir => Some(if draw(0) {
            Branch::OneStep
        } else {
            Branch::Rollout
        }),
    };
    let mut pairs = Vec::with_capacity(config.samples);
    let (mut transitions, mut clips) = (0, 0);
    for s in 0..config.samples as u64 {
        let x0 = problem.sample_initial(&mut stream(seed, Purpose::InitialState, k as u64, s));
        let branch = iteration_branch.unwrap_or_else(|| {
            if draw(s + 1) {
                Branch::OneStep
            } else {
                Branch::Rollout
            }
        });
        let horizon = match (branch, config.scheme) {
            (Branch::OneStep, _) => 1,
            (Branch::Rollout, EvalScheme::Opi { horizon }) => horizon,
            (Branch::Rollout, _) => draw_horizon(
                config.lambda,
                config.geometric_mode,
                &mut stream(seed, Purpose::Horizon, k as u64, s),
            )?,
        };
        let r = rollout_target(problem, theta, &x0, horizon)?;
        transitions += horizon;
        clips += r.clips;
        pairs.push(SamplePair {
            x0,
            v: r.value,
            branch,
            horizon,
        });
    }
    Ok(SampleBatch {
        pairs,
        branch: iteration_branch,
        transitions,
        clips,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub theta: QuadraticValue,
    /// RMS residual of the unconstrained ridge solution.
    pub unconstrained_residual: f64,
    /// `Σ_s (J̃(x_s, θ) − v_s)²` at the returned θ.
    pub objective: f64,
    /// The unconstrained `P` had a negative eigenvalue.
    pub projected: bool,
    /// The incumbent was kept because the projected fit was worse.
    pub kept_incumbent: bool,
}

fn objective(theta: &QuadraticValue, samples: &[SamplePair]) -> f64 {
    samples
        .iter()
        .map(|s| theta.eval(&s.x0) - s.v)
        .map(|r| r * r)
        .sum()
}

/// Ridge least squares in the quadratic monomials, projection of `P` onto
/// the PSD cone by eigenvalue clipping, and a refit of `b` given the
/// projected `P`. Falls back to `prev` when that would not improve on it.
pub fn fit_theta(samples: &[SamplePair], prev: &QuadraticValue, ridge: f64) -> Result<FitOutcome> {
    let dim = prev.dim;
    let np = QuadraticValue::n_params(dim);
    if samples.len() < np {
        return Err(Error::Fit(format!(
            "{} samples for {np} parameters",
            samples.len()
        )));
    }
    if let Some(s) = samples
        .iter()
        .find(|s| s.x0.len() != dim || !s.v.is_finite())
    {
        return Err(Error::Fit(format!("malformed sample at x0 = {:?}", s.x0)));
    }
    let rows = samples.len() + np;
    let mut a = DMatrix::<f64>::zeros(rows, np);
    let mut rhs = DVector::<f64>::zeros(rows);
    for (i, s) in samples.iter().enumerate() {
        for (j, f) in QuadraticValue::features(&s.x0).into_iter().enumerate() {
            a[(i, j)] = f;
        }
        rhs[i] = s.v;
    }
    let sr = libm::sqrt(ridge);
    for j in 0..np {
        a[(samples.len() + j, j)] = sr;
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-13 * smax) {
        return Err(Error::Fit(format!(
            "design matrix rank deficient (singular values {smin:e} .. {smax:e}); add ridge or samples"
        )));
    }
    let params = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Fit(String::from(e)))?;
    let raw = QuadraticValue::from_params(dim, params.as_slice())?;
    let unconstrained_residual = libm::sqrt(objective(&raw, samples) / samples.len() as f64);

    let projected = raw.min_eigenvalue() < 0.0;
    let mut theta = raw.project_psd();
    // best offset for the projected P
    theta.b = samples
        .iter()
        .map(|s| s.v - (theta.eval(&s.x0) - theta.b))
        .sum::<f64>()
        / samples.len() as f64;

    let new_obj = objective(&theta, samples);
    let old_obj = objective(prev, samples);
    if new_obj > old_obj + 1e-9 {
        return Ok(FitOutcome {
            theta: prev.clone(),
            unconstrained_residual,
            objective: old_obj,
            projected,
            kept_incumbent: true,
        });
    }
    Ok(FitOutcome {
        theta,
        unconstrained_residual,
        objective: new_obj,
        projected,
        kept_incumbent: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub k: usize,
    pub branch: Option<Branch>,
    pub rollout_samples: usize,
    pub transitions: usize,
    pub clips: usize,
    pub fit_residual: f64,
    pub objective: f64,
    pub projected: bool,
    pub kept_incumbent: bool,
    /// `max |J̃(x, θ_k) − J̃(x, θ_{k−1})|` over the evaluation grid.
    pub grid_sup_diff: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// `θ_0, …, θ_K`.
    pub thetas: Vec<QuadraticValue>,
    pub iterations: Vec<IterationLog>,
}

impl TrainLog {
    pub fn final_theta(&self) -> &QuadraticValue {
        self.thetas.last().expect("log always holds θ_0")
    }

    /// Total transitions simulated across all iterations.
    pub fn sample_budget(&self) -> usize {
        self.iterations.iter().map(|i| i.transitions).sum()
    }
}

/// `K` iterations of sample collection and refitting from `θ_0`.
pub fn train<P: Plant>(
    problem: &ControlProblem<P>,
    config: &TrainConfig,
    theta0: &QuadraticValue,
) -> Result<(QuadraticValue, TrainLog)> {
    problem.validate()?;
    config.validate(problem.state_dim())?;
    theta0.validate()?;
    if theta0.dim != problem.state_dim() {
        return Err(Error::Dimension {
            expected: problem.state_dim(),
            got: theta0.dim,
        });
    }
    let grid = problem.state_grid(config.grid_points);
    let mut theta = theta0.clone();
    let mut log = TrainLog {
        thetas: alloc::vec![theta.clone()],
        iterations: Vec::with_capacity(config.iterations),
    };
    for k in 1..=config.iterations {
        let batch = collect_samples(problem, &theta, config, k)?;
        let fit = fit_theta(&batch.pairs, &theta, config.ridge)?;
        let grid_sup_diff = fit.theta.sup_diff(&theta, grid.iter().map(Vec::as_slice));
        log.iterations.push(IterationLog {
            k,
            branch: batch.branch,
            rollout_samples: batch
                .pairs
                .iter()
                .filter(|p| p.branch == Branch::Rollout)
                .count(),
            transitions: batch.transitions,
            clips: batch.clips,
            fit_residual: fit.unconstrained_residual,
            objective: fit.objective,
            projected: fit.projected,
            kept_incumbent: fit.kept_incumbent,
            grid_sup_diff,
            min_eigenvalue: fit.theta.min_eigenvalue(),
        });
        theta = fit.theta;
        log.thetas.push(theta.clone());
    }
    Ok((theta, log))
}
