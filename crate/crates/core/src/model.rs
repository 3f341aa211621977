//! The abstract contractive model: a mapping `H(x, u, J)` over a weighted
//! finite state space with finitely enumerable control sets.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{CostTable, WeightedSpace};

pub trait AbstractModel {
    fn space(&self) -> &WeightedSpace;

    /// Number of admissible controls at `x`; controls are `0..n_controls(x)`.
    fn n_controls(&self, x: usize) -> usize;

    fn h(&self, x: usize, u: usize, j: &CostTable) -> f64;

    /// Declared uniform contraction modulus of every `T_μ`.
    fn alpha(&self) -> f64;

    fn n_states(&self) -> usize {
        self.space().len()
    }
}

/// A stationary policy: one control index per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn uniform(n: usize, u: usize) -> Self {
        Policy(alloc::vec![u; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn control(&self, x: usize) -> usize {
        self.0[x]
    }

    pub fn validate<M: AbstractModel + ?Sized>(&self, model: &M) -> Result<()> {
        if self.0.len() != model.n_states() {
            return Err(Error::Dimension {
                expected: model.n_states(),
                got: self.0.len(),
            });
        }
        for (x, &u) in self.0.iter().enumerate() {
            if u >= model.n_controls(x) {
                return Err(Error::InvalidPolicy {
                    state: x,
                    control: u,
                });
            }
        }
        Ok(())
    }

    /// Every policy of `model`, in lexicographic order. Only sensible for
    /// tiny instances.
    pub fn enumerate<M: AbstractModel + ?Sized>(model: &M) -> Vec<Policy> {
        let n = model.n_states();
        let mut out = Vec::new();
        let mut cur = alloc::vec![0usize; n];
        if (0..n).any(|x| model.n_controls(x) == 0) {
            return out;
        }
        loop {
            out.push(Policy(cur.clone()));
            let mut x = 0;
            loop {
                if x == n {
                    return out;
                }
                cur[x] += 1;
                if cur[x] < model.n_controls(x) {
                    break;
                }
                cur[x] = 0;
                x += 1;
            }
        }
    }
}
