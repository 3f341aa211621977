//! Exact iterative solvers on tabular models: value iteration, policy
//! iteration, optimistic policy iteration and λ-policy iteration with
//! randomization (λ-PIR).
//!
//! Every solver records one [`IterateRecord`] per iterate with its distance
//! to `J*` and the two sandwich flags `J* ≤ J_k` and `T J_k ≤ J_k`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::model::{AbstractModel, Policy};
use crate::operators::{apply_t, t_mu_unchecked};
use crate::rng::bernoulli;
use crate::space::CostTable;
use crate::tabular::TabularMdp;

/// Tolerance for the pointwise sandwich comparisons.
pub const SANDWICH_TOL: f64 = 1e-9;

/// `p_k`, the probability of taking the value-iteration branch at
/// iteration `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbSchedule {
    Constant(f64),
    /// `p_k = table[min(k, len - 1)]`
    Table(Vec<f64>),
}

impl ProbSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            ProbSchedule::Constant(p) => *p,
            ProbSchedule::Table(t) => t[k.min(t.len() - 1)],
        }
    }

    /// Probabilities must lie in `[0, 1]`; the endpoints are admitted so
    /// the branches can be forced.
    pub fn validate(&self) -> Result<()> {
        let ok = |p: &f64| (0.0..=1.0).contains(p);
        match self {
            ProbSchedule::Constant(p) if ok(p) => Ok(()),
            ProbSchedule::Table(t) if !t.is_empty() && t.iter().all(ok) => Ok(()),
            _ => Err(param("prob", "every p_k must lie in [0, 1]")),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            ProbSchedule::Constant(p) => alloc::vec![*p],
            ProbSchedule::Table(t) => t.clone(),
        }
    }
}

impl Default for ProbSchedule {
    fn default() -> Self {
        ProbSchedule::Constant(0.5)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub lambda: f64,
    pub prob: ProbSchedule,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub seed: u64,
    pub opi_horizon: usize,
    /// `J_0`; zeros when absent.
    pub init: Option<CostTable>,
    /// Require `T J_0 ≤ J_0` and enforce the sandwich along the run.
    pub require_dominating: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 0.5,
            prob: ProbSchedule::default(),
            max_iters: 10_000,
            stop_tol: 1e-9,
            seed: 0,
            opi_horizon: 10,
            init: None,
            require_dominating: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(param("lambda", format!("{} not in [0, 1)", self.lambda)));
        }
        if !(self.stop_tol > 0.0) {
            return Err(param("stop_tol", "must be positive"));
        }
        if self.opi_horizon == 0 {
            return Err(param("opi_horizon", "must be at least 1"));
        }
        self.prob.validate()
    }

    fn initial(&self, n: usize) -> Result<CostTable> {
        match &self.init {
            Some(j) if j.len() != n => Err(Error::Dimension {
                expected: n,
                got: j.len(),
            }),
            Some(j) => Ok(j.clone()),
            None => Ok(CostTable::zeros(n)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Vi,
    Lambda,
    Opi,
    Pi,
}

impl Step {
    pub fn as_str(self) -> &'static str {
        match self {
            Step::Vi => "vi",
            Step::Lambda => "lambda",
            Step::Opi => "opi",
            Step::Pi => "pi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub k: usize,
    /// The step that produced `J_k`; `None` for `J_0`.
    pub branch: Option<Step>,
    pub j: CostTable,
    /// `‖J_k - J*‖`
    pub err_norm: f64,
    /// `J* ≤ J_k`
    pub lower_ok: bool,
    /// `T J_k ≤ J_k`
    pub upper_ok: bool,
    /// `J_k ≤ T^k J_0`, tracked by λ-PIR when the dominating start is required.
    pub dominated_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub j: CostTable,
    pub policy: Policy,
    pub records: Vec<IterateRecord>,
    pub converged: bool,
    pub iterations: usize,
    /// `‖T J - J‖` at the returned iterate.
    pub residual: f64,
}

impl SolveOutcome {
    pub fn branch_count(&self, step: Step) -> usize {
        self.records
            .iter()
            .filter(|r| r.branch == Some(step))
            .count()
    }
}

/// `J*` and an optimal policy by exact policy iteration from `J = 0`.
pub fn optimal_cost(mdp: &TabularMdp) -> Result<(CostTable, Policy)> {
    let mut j = CostTable::zeros(mdp.n_states());
    let (_, mut mu) = apply_t(mdp, &j)?;
    for _ in 0..10_000 {
        j = mdp.solve_j_mu(&mu)?;
        let (tj, next) = apply_t(mdp, &j)?;
        // stop once no state improves, which also settles ties
        if next == mu || j.excess_over(&tj) <= 1e-13 * (1.0 + mdp.space().norm(&j)) {
            return Ok((j, mu));
        }
        mu = next;
    }
    Err(Error::InvariantViolation {
        iteration: 10_000,
        what: String::from("policy iteration did not terminate"),
    })
}

struct Tracker<'a> {
    mdp: &'a TabularMdp,
    j_star: CostTable,
    records: Vec<IterateRecord>,
}

impl<'a> Tracker<'a> {
    fn new(mdp: &'a TabularMdp) -> Result<Self> {
        let (j_star, _) = optimal_cost(mdp)?;
        Ok(Tracker {
            mdp,
            j_star,
            records: Vec::new(),
        })
    }

    /// Records `J_k` given `T J_k`.
    fn push(
        &mut self,
        k: usize,
        branch: Option<Step>,
        j: &CostTable,
        tj: &CostTable,
        dominated_ok: Option<bool>,
    ) {
        let space = self.mdp.space();
        self.records.push(IterateRecord {
            k,
            branch,
            j: j.clone(),
            err_norm: space.dist(j, &self.j_star),
            lower_ok: self.j_star.le(j, SANDWICH_TOL),
            upper_ok: tj.le(j, SANDWICH_TOL),
            dominated_ok,
        });
    }
}

fn finish(
    mdp: &TabularMdp,
    j: CostTable,
    tracker: Tracker<'_>,
    converged: bool,
    iterations: usize,
) -> Result<SolveOutcome> {
    let (tj, policy) = apply_t(mdp, &j)?;
    let residual = mdp.space().dist(&tj, &j);
    Ok(SolveOutcome {
        j,
        policy,
        records: tracker.records,
        converged,
        iterations,
        residual,
    })
}

/// Value iteration `J_{k+1} = T J_k`.
pub fn vi_solve(mdp: &TabularMdp, config: &SolverConfig) -> Result<SolveOutcome> {
    let cfg = SolverConfig {
        prob: ProbSchedule::Constant(1.0),
        ..config.clone()
    };
    run_randomized(mdp, &cfg, Some(Step::Vi))
}

/// Optimistic policy iteration `J_{k+1} = T_{μ^k}^ℓ J_k` with `μ^k` greedy
/// at `J_k`.
pub fn opi_solve(mdp: &TabularMdp, config: &SolverConfig) -> Result<SolveOutcome> {
    config.validate()?;
    let mut tracker = Tracker::new(mdp)?;
    let mut j = config.initial(mdp.n_states())?;
    let (mut tj, mut mu) = apply_t(mdp, &j)?;
    tracker.push(0, None, &j, &tj, None);
    for k in 0..config.max_iters {
        let mut next = tj.clone();
        for _ in 1..config.opi_horizon {
            next = t_mu_unchecked(mdp, &mu, &next)?;
        }
        let step = mdp.space().dist(&next, &j);
        j = next;
        (tj, mu) = apply_t(mdp, &j)?;
        tracker.push(k + 1, Some(Step::Opi), &j, &tj, None);
        if step <= config.stop_tol {
            return finish(mdp, j, tracker, true, k + 1);
        }
    }
    finish(mdp, j, tracker, false, config.max_iters)
}

/// Policy iteration: greedy improvement followed by exact evaluation,
/// until the policy repeats.
pub fn pi_solve(mdp: &TabularMdp, config: &SolverConfig) -> Result<SolveOutcome> {
    config.validate()?;
    let mut tracker = Tracker::new(mdp)?;
    let mut j = config.initial(mdp.n_states())?;
    let (mut tj, mut mu) = apply_t(mdp, &j)?;
    tracker.push(0, None, &j, &tj, None);
    for k in 0..config.max_iters {
        j = mdp.solve_j_mu(&mu)?;
        let (next_tj, next_mu) = apply_t(mdp, &j)?;
        tj = next_tj;
        tracker.push(k + 1, Some(Step::Pi), &j, &tj, None);
        if next_mu == mu || j.excess_over(&tj) <= 1e-13 * (1.0 + mdp.space().norm(&j)) {
            let residual = mdp.space().dist(&tj, &j);
            return Ok(SolveOutcome {
                j,
                policy: mu,
                records: tracker.records,
                converged: true,
                iterations: k + 1,
                residual,
            });
        }
        mu = next_mu;
    }
    let residual = mdp.space().dist(&tj, &j);
    Ok(SolveOutcome {
        j,
        policy: mu,
        records: tracker.records,
        converged: false,
        iterations: config.max_iters,
        residual,
    })
}

/// λ-PIR: at iteration `k`, with probability `p_k` take `T_{μ^k} J_k`,
/// otherwise `T_{μ^k}^(λ) J_k`, where `μ^k` is greedy at `J_k`. The branch
/// draw uses the stream `(seed, branch, k)`.
///
/// With `require_dominating`, `T J_0 ≤ J_0` is checked up front and every
/// iterate must satisfy `J* ≤ J_k`, `T J_k ≤ J_k` and `J_k ≤ T^k J_0`;
/// a violation is returned as [`Error::InvariantViolation`].
pub fn lambda_pir_solve(mdp: &TabularMdp, config: &SolverConfig) -> Result<SolveOutcome> {
    run_randomized(mdp, config, None)
}

fn run_randomized(
    mdp: &TabularMdp,
    config: &SolverConfig,
    forced: Option<Step>,
) -> Result<SolveOutcome> {
    config.validate()?;
    let space = mdp.space();
    let mut tracker = Tracker::new(mdp)?;
    let mut j = config.initial(mdp.n_states())?;
    let (mut tj, mut mu) = apply_t(mdp, &j)?;
    let enforce = config.require_dominating;
    if enforce && !tj.le(&j, SANDWICH_TOL) {
        return Err(Error::InvariantViolation {
            iteration: 0,
            what: format!("T J_0 exceeds J_0 by {:e}", tj.excess_over(&j)),
        });
    }
    // T^k J_0
    let mut vi_bound = enforce.then(|| j.clone());
    tracker.push(0, None, &j, &tj, enforce.then_some(true));

    for k in 0..config.max_iters {
        let take_vi =
            forced == Some(Step::Vi) || bernoulli(config.seed, k as u64, 0, config.prob.at(k));
        let (next, branch) = if take_vi {
            (tj.clone(), Step::Vi)
        } else {
            (
                mdp.t_lambda_closed_form(&mu, &j, config.lambda)?,
                Step::Lambda,
            )
        };
        let step = space.dist(&next, &j);
        j = next;
        (tj, mu) = apply_t(mdp, &j)?;
        let dominated = match vi_bound.as_mut() {
            Some(bound) => {
                *bound = apply_t(mdp, bound)?.0;
                Some(j.le(bound, SANDWICH_TOL))
            }
            None => None,
        };
        tracker.push(k + 1, Some(branch), &j, &tj, dominated);
        if enforce {
            let rec = tracker.records.last().expect("just pushed");
            let mut broken = Vec::new();
            if !rec.lower_ok {
                broken.push("J* <= J_k");
            }
            if !rec.upper_ok {
                broken.push("T J_k <= J_k");
            }
            if rec.dominated_ok == Some(false) {
                broken.push("J_k <= T^k J_0");
            }
            if !broken.is_empty() {
                return Err(Error::InvariantViolation {
                    iteration: k + 1,
                    what: broken.join(", "),
                });
            }
        }
        if step <= config.stop_tol {
            return finish(mdp, j, tracker, true, k + 1);
        }
    }
    finish(mdp, j, tracker, false, config.max_iters)
}

/// `J_0 = c · v` with `c = 2 max|g| / (1 - α)`, which satisfies `T J_0 ≤ J_0`.
pub fn make_dominating_j0(mdp: &TabularMdp) -> Result<CostTable> {
    let c = 2.0 * mdp.max_abs_cost() / (1.0 - mdp.alpha());
    let j0 = mdp.space().scaled_weight(c);
    let (tj, _) = apply_t(mdp, &j0)?;
    if !tj.le(&j0, 0.0) {
        return Err(Error::InvariantViolation {
            iteration: 0,
            what: format!("dominating start violated by {:e}", tj.excess_over(&j0)),
        });
    }
    Ok(j0)
}
