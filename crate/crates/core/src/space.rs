//! Cost functions on a finite state set and the weighted sup-norm.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::rng::{Rng, StreamRng};

/// A cost function `J` over states `0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostTable(pub Vec<f64>);

impl CostTable {
    pub fn zeros(n: usize) -> Self {
        CostTable(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        CostTable(vec![c; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.0.iter().position(|v| !v.is_finite())
    }

    /// `self - other`, componentwise.
    pub fn sub(&self, other: &CostTable) -> CostTable {
        CostTable(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add_scaled(&self, other: &CostTable, c: f64) -> CostTable {
        CostTable(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + c * b)
                .collect(),
        )
    }

    pub fn scale(&self, c: f64) -> CostTable {
        CostTable(self.0.iter().map(|a| c * a).collect())
    }

    /// Pointwise `self <= other + tol`.
    pub fn le(&self, other: &CostTable, tol: f64) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| *a <= *b + tol)
    }

    /// Largest amount by which `self` exceeds `other` (0 when `self <= other`).
    pub fn excess_over(&self, other: &CostTable) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a - b)
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for CostTable {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for CostTable {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<Vec<f64>> for CostTable {
    fn from(v: Vec<f64>) -> Self {
        CostTable(v)
    }
}

/// A finite state set with a positive weight `v(x)` defining
/// `‖J‖ = max_x |J(x)| / v(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSpace {
    weights: Vec<f64>,
}

impl WeightedSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(param("weights", "state set is empty"));
        }
        if let Some(x) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Parameter {
                name: "weights",
                reason: alloc::format!("v({x}) must be finite and positive"),
            });
        }
        Ok(WeightedSpace { weights })
    }

    /// `v ≡ 1` on `n` states.
    pub fn uniform(n: usize) -> Self {
        WeightedSpace {
            weights: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, x: usize) -> f64 {
        self.weights[x]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn norm(&self, j: &CostTable) -> f64 {
        j.0.iter()
            .zip(&self.weights)
            .map(|(a, v)| a.abs() / v)
            .fold(0.0, f64::max)
    }

    pub fn dist(&self, a: &CostTable, b: &CostTable) -> f64 {
        a.0.iter()
            .zip(&b.0)
            .zip(&self.weights)
            .map(|((a, b), v)| (a - b).abs() / v)
            .fold(0.0, f64::max)
    }

    /// Componentwise uniform on `[-radius·v(x), radius·v(x)]`.
    pub fn random_cost(&self, rng: &mut StreamRng, radius: f64) -> CostTable {
        CostTable(
            self.weights
                .iter()
                .map(|v| radius * v * (2.0 * rng.gen::<f64>() - 1.0))
                .collect(),
        )
    }

    /// `c · v`.
    pub fn scaled_weight(&self, c: f64) -> CostTable {
        CostTable(self.weights.iter().map(|v| c * v).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use proptest::prelude::*;

    #[test]
    fn rejects_nonpositive_weight() {
        assert!(WeightedSpace::new(vec![1.0, 0.0]).is_err());
        assert!(WeightedSpace::new(vec![1.0, -2.0]).is_err());
        assert!(WeightedSpace::new(vec![]).is_err());
    }

    #[test]
    fn weighted_norm_divides_by_weight() {
        let s = WeightedSpace::new(vec![1.0, 2.0, 4.0]).unwrap();
        let j = CostTable(vec![1.0, -6.0, 4.0]);
        assert_eq!(s.norm(&j), 3.0);
    }

    #[test]
    fn random_cost_respects_ball() {
        let s = WeightedSpace::new(vec![1.0, 5.0, 0.5]).unwrap();
        let mut rng = stream(3, Purpose::Trial, 0, 0);
        for _ in 0..100 {
            assert!(s.norm(&s.random_cost(&mut rng, 10.0)) <= 10.0);
        }
    }

    proptest! {
        #[test]
        fn norm_axioms(
            a in proptest::collection::vec(-100.0f64..100.0, 6),
            b in proptest::collection::vec(-100.0f64..100.0, 6),
            w in proptest::collection::vec(0.1f64..10.0, 6),
            c in -5.0f64..5.0,
        ) {
            let s = WeightedSpace::new(w).unwrap();
            let (a, b) = (CostTable(a), CostTable(b));
            prop_assert!(s.norm(&a) >= 0.0);
            prop_assert!((s.norm(&a.scale(c)) - c.abs() * s.norm(&a)).abs() <= 1e-9 * (1.0 + s.norm(&a)));
            let sum = a.add_scaled(&b, 1.0);
            prop_assert!(s.norm(&sum) <= s.norm(&a) + s.norm(&b) + 1e-9);
        }
    }
}
