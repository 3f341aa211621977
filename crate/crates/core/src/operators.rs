//! The operator family `T_μ`, `T`, `T_μ^(w)` and `T_μ^(λ)` on an
//! [`AbstractModel`], with the contraction and monotonicity probes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::model::{AbstractModel, Policy};
use crate::rng::{stream, Purpose, Rng};
use crate::space::CostTable;

/// Default pointwise truncation tolerance (relative to `v(x)`).
pub const DEFAULT_TOL: f64 = 1e-10;

/// Hard cap on the number of series terms.
pub const MAX_TERMS: usize = 200_000;

/// Radius of the norm ball random costs are drawn from.
pub const RANDOM_RADIUS: f64 = 10.0;

/// `(T_μ J)(x) = H(x, μ(x), J)`.
pub fn apply_t_mu<M: AbstractModel + ?Sized>(
    model: &M,
    mu: &Policy,
    j: &CostTable,
) -> Result<CostTable> {
    mu.validate(model)?;
    t_mu_unchecked(model, mu, j)
}

pub(crate) fn t_mu_unchecked<M: AbstractModel + ?Sized>(
    model: &M,
    mu: &Policy,
    j: &CostTable,
) -> Result<CostTable> {
    check_len(model, j)?;
    let mut out = Vec::with_capacity(j.len());
    for x in 0..model.n_states() {
        let v = model.h(x, mu.control(x), j);
        if !v.is_finite() {
            return Err(Error::NonFinite { state: x });
        }
        out.push(v);
    }
    Ok(CostTable(out))
}

/// `(TJ)(x) = min_u H(x, u, J)` together with a minimizing policy. Ties go
/// to the lowest control index.
pub fn apply_t<M: AbstractModel + ?Sized>(model: &M, j: &CostTable) -> Result<(CostTable, Policy)> {
    check_len(model, j)?;
    let n = model.n_states();
    let mut vals = Vec::with_capacity(n);
    let mut pol = Vec::with_capacity(n);
    for x in 0..n {
        let nu = model.n_controls(x);
        if nu == 0 {
            return Err(Error::EmptyControlSet(x));
        }
        let mut best = (0, f64::INFINITY);
        for u in 0..nu {
            let v = model.h(x, u, j);
            if !v.is_finite() {
                return Err(Error::NonFinite { state: x });
            }
            if v < best.1 {
                best = (u, v);
            }
        }
        pol.push(best.0);
        vals.push(best.1);
    }
    Ok((CostTable(vals), Policy(pol)))
}

fn check_len<M: AbstractModel + ?Sized>(model: &M, j: &CostTable) -> Result<()> {
    if j.len() != model.n_states() {
        return Err(Error::Dimension {
            expected: model.n_states(),
            got: j.len(),
        });
    }
    if let Some(x) = j.first_non_finite() {
        return Err(Error::NonFinite { state: x });
    }
    Ok(())
}

/// State-dependent step weights `w_ℓ(x)`, `ℓ ≥ 1`, summing to one per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WeightProfile {
    /// `w_ℓ = (1-λ) λ^(ℓ-1)`, the λ-operator weights.
    Geometric { lambda: f64 },
    /// `w_ℓ(x) = 0` for `ℓ ≤ x` and `(1-β) β^(ℓ-x-1)` afterwards, where the
    /// state at index `i` carries the label `x = i + 1`.
    Shifted { rate: f64 },
    /// Explicit per-state weights for steps `1..=N`; `tail[x]` is the mass
    /// placed on step `N + 1`.
    Table {
        weights: Vec<Vec<f64>>,
        tail: Vec<f64>,
    },
}

impl WeightProfile {
    pub fn geometric(lambda: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(param("lambda", format!("{lambda} not in [0, 1)")));
        }
        Ok(WeightProfile::Geometric { lambda })
    }

    pub fn validate(&self, n_states: usize) -> Result<()> {
        match self {
            WeightProfile::Geometric { lambda } => {
                if !(0.0..1.0).contains(lambda) {
                    return Err(param("lambda", format!("{lambda} not in [0, 1)")));
                }
            }
            WeightProfile::Shifted { rate } => {
                if !(*rate > 0.0 && *rate < 1.0) {
                    return Err(param("rate", format!("{rate} not in (0, 1)")));
                }
            }
            WeightProfile::Table { weights, tail } => {
                if weights.len() != n_states || tail.len() != n_states {
                    return Err(Error::Dimension {
                        expected: n_states,
                        got: weights.len().min(tail.len()),
                    });
                }
                for (x, (row, t)) in weights.iter().zip(tail).enumerate() {
                    if row
                        .iter()
                        .chain(core::iter::once(t))
                        .any(|w| !(w.is_finite() && *w >= 0.0))
                    {
                        return Err(param(
                            "weights",
                            format!("negative or non-finite weight at state {x}"),
                        ));
                    }
                    let total: f64 = row.iter().sum::<f64>() + t;
                    if (total - 1.0).abs() > 1e-12 {
                        return Err(param(
                            "weights",
                            format!("weights at state {x} sum to {total}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// `w_ℓ(x)` for `ℓ ≥ 1`.
    pub fn weight(&self, step: usize, x: usize) -> f64 {
        debug_assert!(step >= 1);
        match self {
            WeightProfile::Geometric { lambda } => (1.0 - lambda) * powi(*lambda, step - 1),
            WeightProfile::Shifted { rate } => {
                let label = x + 1;
                if step <= label {
                    0.0
                } else {
                    (1.0 - rate) * powi(*rate, step - label - 1)
                }
            }
            WeightProfile::Table { weights, tail } => {
                let row = &weights[x];
                if step <= row.len() {
                    row[step - 1]
                } else if step == row.len() + 1 {
                    tail[x]
                } else {
                    0.0
                }
            }
        }
    }

    /// Mass beyond step `n`: `Σ_{ℓ>n} w_ℓ(x)`.
    pub fn tail_mass(&self, n: usize, x: usize) -> f64 {
        match self {
            WeightProfile::Geometric { lambda } => powi(*lambda, n),
            WeightProfile::Shifted { rate } => {
                let label = x + 1;
                if n <= label {
                    1.0
                } else {
                    powi(*rate, n - label)
                }
            }
            WeightProfile::Table { weights, tail } => {
                let row = &weights[x];
                if n < row.len() {
                    row[n..].iter().sum::<f64>() + tail[x]
                } else if n == row.len() {
                    tail[x]
                } else {
                    0.0
                }
            }
        }
    }
}

pub(crate) fn powi(base: f64, exp: usize) -> f64 {
    libm::pow(base, exp as f64)
}

/// Result of a truncated series evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesEval {
    pub value: CostTable,
    /// Number of `T_μ` applications summed.
    pub terms: usize,
    /// Largest `|T_μ^ℓ J(x)|` seen, per state.
    pub observed_bound: Vec<f64>,
    /// Certified pointwise truncation residual, per state.
    pub residual: Vec<f64>,
}

/// `(T_μ^(w) J)(x) = Σ_ℓ w_ℓ(x) (T_μ^ℓ J)(x)`, truncated once the tail mass
/// times a bound on the remaining iterates falls below `tol · v(x)` at
/// every state.
///
/// For `ℓ > n`, contraction gives
/// `|T^ℓ J(x)| ≤ |T^n J(x)| + α/(1-α) · ‖T^n J - T^(n-1) J‖ · v(x)`,
/// which is the bound multiplied by the tail mass.
pub fn apply_t_w<M: AbstractModel + ?Sized>(
    model: &M,
    mu: &Policy,
    j: &CostTable,
    w: &WeightProfile,
    tol: f64,
) -> Result<SeriesEval> {
    if !(tol > 0.0) {
        return Err(param("tol", format!("{tol} must be positive")));
    }
    mu.validate(model)?;
    w.validate(model.n_states())?;
    check_len(model, j)?;
    let space = model.space();
    let alpha = model.alpha();
    let n_states = model.n_states();
    let lip = alpha / (1.0 - alpha);

    let mut acc = vec![0.0; n_states];
    let mut observed = vec![0.0f64; n_states];
    let mut residual = vec![0.0; n_states];
    let mut cur = j.clone();
    for n in 1..=MAX_TERMS {
        let next = t_mu_unchecked(model, mu, &cur)?;
        let step = space.dist(&next, &cur);
        let mut done = true;
        for x in 0..n_states {
            acc[x] += w.weight(n, x) * next[x];
            observed[x] = observed[x].max(next[x].abs());
            let bound = next[x].abs() + lip * step * space.weight(x);
            residual[x] = w.tail_mass(n, x) * bound;
            if residual[x] > tol * space.weight(x) {
                done = false;
            }
        }
        cur = next;
        if done {
            return Ok(SeriesEval {
                value: CostTable(acc),
                terms: n,
                observed_bound: observed,
                residual,
            });
        }
    }
    Err(Error::Truncation { terms: MAX_TERMS })
}

/// The partial sum `Σ_{ℓ=1}^{n} w_ℓ(x) (T_μ^ℓ J)(x)` with no tail.
pub fn partial_t_w<M: AbstractModel + ?Sized>(
    model: &M,
    mu: &Policy,
    j: &CostTable,
    w: &WeightProfile,
    n: usize,
) -> Result<CostTable> {
    mu.validate(model)?;
    w.validate(model.n_states())?;
    check_len(model, j)?;
    let mut acc = vec![0.0; model.n_states()];
    let mut cur = j.clone();
    for step in 1..=n {
        cur = t_mu_unchecked(model, mu, &cur)?;
        for (x, a) in acc.iter_mut().enumerate() {
            *a += w.weight(step, x) * cur[x];
        }
    }
    Ok(CostTable(acc))
}

/// `T_μ^(λ) J = (1-λ) Σ λ^(ℓ-1) T_μ^ℓ J`.
pub fn apply_t_lambda<M: AbstractModel + ?Sized>(
    model: &M,
    mu: &Policy,
    j: &CostTable,
    lambda: f64,
    tol: f64,
) -> Result<CostTable> {
    let w = WeightProfile::geometric(lambda)?;
    Ok(apply_t_w(model, mu, j, &w, tol)?.value)
}

/// `sup_x Σ_ℓ w_ℓ(x) α^ℓ` over the model's (finite) state set, the
/// contraction modulus of `T_μ^(w)`.
pub fn weighted_modulus(w: &WeightProfile, alpha: f64, n_states: usize) -> Result<f64> {
    w.validate(n_states)?;
    let mut best = 0.0f64;
    for x in 0..n_states {
        let mut acc = 0.0;
        let mut a = 1.0;
        let mut step = 1;
        loop {
            a *= alpha;
            acc += w.weight(step, x) * a;
            // remaining terms are bounded by tail · α^(step+1)
            if w.tail_mass(step, x) * a * alpha <= 1e-15 || step >= MAX_TERMS {
                break;
            }
            step += 1;
        }
        best = best.max(acc);
    }
    Ok(best)
}

/// `α (1-λ) / (1-λα)`.
pub fn lambda_modulus(alpha: f64, lambda: f64) -> f64 {
    alpha * (1.0 - lambda) / (1.0 - lambda * alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    TMu,
    T,
    TLambda(f64),
}

fn apply_kind<M: AbstractModel + ?Sized>(
    model: &M,
    mu: &Policy,
    kind: OperatorKind,
    j: &CostTable,
) -> Result<CostTable> {
    match kind {
        OperatorKind::TMu => apply_t_mu(model, mu, j),
        OperatorKind::T => apply_t(model, j).map(|(v, _)| v),
        OperatorKind::TLambda(lambda) => apply_t_lambda(model, mu, j, lambda, 1e-13),
    }
}

/// Largest observed `‖OJ - OJ'‖ / ‖J - J'‖` over `trials` random pairs drawn
/// uniformly from the radius-10 ball. Degenerate pairs are skipped.
pub fn estimate_contraction<M: AbstractModel + ?Sized>(
    model: &M,
    mu: &Policy,
    kind: OperatorKind,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(param("trials", "must be at least 1"));
    }
    let space = model.space();
    let mut worst = 0.0f64;
    for t in 0..trials as u64 {
        let a = space.random_cost(&mut stream(seed, Purpose::Trial, t, 0), RANDOM_RADIUS);
        let b = space.random_cost(&mut stream(seed, Purpose::Trial, t, 1), RANDOM_RADIUS);
        let d = space.dist(&a, &b);
        if d == 0.0 {
            continue;
        }
        let oa = apply_kind(model, mu, kind, &a)?;
        let ob = apply_kind(model, mu, kind, &b)?;
        worst = worst.max(space.dist(&oa, &ob) / d);
    }
    Ok(worst)
}

/// Samples pairs `J ≤ J'` and reports whether `T_μ^(w) J ≤ T_μ^(w) J'`
/// held everywhere up to `1e-10`. Trial 0 uses `J' = J`.
pub fn check_monotone<M: AbstractModel + ?Sized>(
    model: &M,
    mu: &Policy,
    w: &WeightProfile,
    trials: usize,
    seed: u64,
) -> Result<bool> {
    let space = model.space();
    for t in 0..trials as u64 {
        let mut rng = stream(seed, Purpose::Trial, t, 2);
        let lo = space.random_cost(&mut rng, RANDOM_RADIUS);
        let hi = if t == 0 {
            lo.clone()
        } else {
            CostTable(
                lo.iter()
                    .enumerate()
                    .map(|(x, a)| a + RANDOM_RADIUS * space.weight(x) * rng.gen::<f64>())
                    .collect(),
            )
        };
        let a = apply_t_w(model, mu, &lo, w, 1e-13)?.value;
        let b = apply_t_w(model, mu, &hi, w, 1e-13)?.value;
        if !a.le(&b, 1e-10) {
            return Ok(false);
        }
    }
    Ok(true)
}
