//! A weighted operator whose truncations converge pointwise but not in
//! norm.
//!
//! States carry labels `x = 1, 2, …, M` with `v(x) = x` and
//! `(T_μ J)(x) = (1-α) x + α J(x)`, so `J_μ(x) = x`. Weights vanish for
//! `ℓ ≤ x` and follow a geometric tail `(1-β) β^(ℓ-x-1)` afterwards. The
//! truncation `T_μ^(w_n) J_μ` misses all of the mass at every `x ≥ n`,
//! so the normalized gap stays at one for every `n` while each fixed state
//! converges.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::model::{AbstractModel, Policy};
use crate::operators::{partial_t_w, WeightProfile};
use crate::space::{CostTable, WeightedSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSpec {
    /// Tail rate β of the weights.
    pub rate: f64,
    pub alpha: f64,
    /// Number of retained states `M`.
    pub window: usize,
    /// Truncation index `n`.
    pub truncation: usize,
}

impl CounterexampleSpec {
    pub fn new(truncation: usize, window: usize) -> Self {
        CounterexampleSpec {
            rate: 0.5,
            alpha: 0.5,
            window,
            truncation,
        }
    }
}

/// The single-policy shift model on labels `1..=window`.
#[derive(Debug, Clone)]
pub struct ShiftModel {
    alpha: f64,
    space: WeightedSpace,
}

impl ShiftModel {
    pub fn new(alpha: f64, window: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(param("alpha", format!("{alpha} not in (0, 1)")));
        }
        let space = WeightedSpace::new((1..=window).map(|x| x as f64).collect())?;
        Ok(ShiftModel { alpha, space })
    }

    pub fn fixed_point(&self) -> CostTable {
        CostTable(self.space.weights().to_vec())
    }
}

impl AbstractModel for ShiftModel {
    fn space(&self) -> &WeightedSpace {
        &self.space
    }

    fn n_controls(&self, _x: usize) -> usize {
        1
    }

    fn h(&self, x: usize, _u: usize, j: &CostTable) -> f64 {
        let label = self.space.weight(x);
        (1.0 - self.alpha) * label + self.alpha * j[x]
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    /// `‖T_μ^(w_n) J_μ - J_μ‖` over the window.
    pub norm_gap: f64,
    /// `|T_μ^(w_n) J_μ(x) - J_μ(x)| / v(x)` for labels `1..=window`.
    pub pointwise_gap: Vec<f64>,
}

impl CounterexampleReport {
    /// Normalized gap at label `x` (1-based).
    pub fn gap_at(&self, x: usize) -> f64 {
        self.pointwise_gap[x - 1]
    }
}

pub fn counterexample_norm_gap(spec: &CounterexampleSpec) -> Result<CounterexampleReport> {
    if spec.window <= spec.truncation {
        return Err(param(
            "window",
            format!(
                "window {} must exceed truncation {}",
                spec.window, spec.truncation
            ),
        ));
    }
    let model = ShiftModel::new(spec.alpha, spec.window)?;
    let profile = WeightProfile::Shifted { rate: spec.rate };
    let j_mu = model.fixed_point();
    let mu = Policy::uniform(spec.window, 0);
    let partial = partial_t_w(&model, &mu, &j_mu, &profile, spec.truncation)?;
    let space = model.space();
    let pointwise_gap: Vec<f64> = (0..spec.window)
        .map(|x| (partial[x] - j_mu[x]).abs() / space.weight(x))
        .collect();
    let norm_gap = pointwise_gap.iter().copied().fold(0.0, f64::max);
    Ok(CounterexampleReport {
        norm_gap,
        pointwise_gap,
    })
}
