//! Finite MDPs with the linear mapping
//! `H(x, u, J) = Σ_y P(y|x,u) (g(x,u,y) + α J(y))`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::linalg::solve_checked;
use crate::model::{AbstractModel, Policy};
use crate::rng::{Rng, StreamRng};
use crate::space::{CostTable, WeightedSpace};

/// Serialized layout of a [`TabularMdp`]. `g[x][u][y]` and `P[x][u][y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpDocument {
    pub alpha: f64,
    pub states: usize,
    pub actions: Vec<usize>,
    pub g: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct TabularMdp {
    doc: MdpDocument,
    /// `Σ_y P(y|x,u) g(x,u,y)`
    expected_cost: Vec<Vec<f64>>,
    space: WeightedSpace,
}

impl TryFrom<MdpDocument> for TabularMdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        let n = doc.states;
        if n == 0 {
            return Err(param("states", "must be positive"));
        }
        if !(doc.alpha > 0.0 && doc.alpha < 1.0) {
            return Err(param("alpha", format!("{} not in (0, 1)", doc.alpha)));
        }
        if doc.actions.len() != n || doc.g.len() != n || doc.p.len() != n {
            return Err(param(
                "states",
                "actions, g and P must have one entry per state",
            ));
        }
        let mut expected_cost = Vec::with_capacity(n);
        for x in 0..n {
            let na = doc.actions[x];
            if na == 0 {
                return Err(Error::EmptyControlSet(x));
            }
            if doc.g[x].len() != na || doc.p[x].len() != na {
                return Err(param(
                    "actions",
                    format!("state {x}: g/P rows do not match {na} actions"),
                ));
            }
            let mut row = Vec::with_capacity(na);
            for u in 0..na {
                let (gs, ps) = (&doc.g[x][u], &doc.p[x][u]);
                if gs.len() != n || ps.len() != n {
                    return Err(param(
                        "P",
                        format!("state {x}, action {u}: expected {n} successors"),
                    ));
                }
                if gs.iter().any(|c| !c.is_finite()) {
                    return Err(param(
                        "g",
                        format!("non-finite cost at state {x}, action {u}"),
                    ));
                }
                if ps.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(param(
                        "P",
                        format!("invalid probability at state {x}, action {u}"),
                    ));
                }
                let total: f64 = ps.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(param("P", format!("row ({x}, {u}) sums to {total}")));
                }
                row.push(ps.iter().zip(gs).map(|(p, c)| p * c).sum());
            }
            expected_cost.push(row);
        }
        Ok(TabularMdp {
            space: WeightedSpace::uniform(n),
            doc,
            expected_cost,
        })
    }
}

impl From<TabularMdp> for MdpDocument {
    fn from(m: TabularMdp) -> Self {
        m.doc
    }
}

impl TabularMdp {
    pub fn new(alpha: f64, g: Vec<Vec<Vec<f64>>>, p: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let actions = p.iter().map(Vec::len).collect();
        TabularMdp::try_from(MdpDocument {
            alpha,
            states: p.len(),
            actions,
            g,
            p,
        })
    }

    /// Deterministic transitions `next[x][u]` with costs `cost[x][u]`.
    pub fn deterministic(alpha: f64, next: &[Vec<usize>], cost: &[Vec<f64>]) -> Result<Self> {
        let n = next.len();
        let mut g = Vec::with_capacity(n);
        let mut p = Vec::with_capacity(n);
        for (nx, cx) in next.iter().zip(cost) {
            let mut gx = Vec::new();
            let mut px = Vec::new();
            for (&y, &c) in nx.iter().zip(cx) {
                if y >= n {
                    return Err(param("next", format!("successor {y} out of range")));
                }
                let mut row = alloc::vec![0.0; n];
                row[y] = 1.0;
                px.push(row);
                gx.push(alloc::vec![c; n]);
            }
            g.push(gx);
            p.push(px);
        }
        TabularMdp::new(alpha, g, p)
    }

    /// Random instance: `1..=max_actions` actions per state, costs uniform
    /// on `[0, 1)`, each transition row supported on a random subset of
    /// successors.
    pub fn random(n: usize, max_actions: usize, alpha: f64, rng: &mut StreamRng) -> Result<Self> {
        if max_actions == 0 {
            return Err(param("max_actions", "must be positive"));
        }
        let mut g = Vec::with_capacity(n);
        let mut p = Vec::with_capacity(n);
        for _ in 0..n {
            let na = rng.gen_range(1..=max_actions);
            let mut gx = Vec::with_capacity(na);
            let mut px = Vec::with_capacity(na);
            for _ in 0..na {
                let mut row: Vec<f64> = (0..n)
                    .map(|_| {
                        if rng.gen::<f64>() < 0.5 {
                            rng.gen::<f64>()
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let pick = rng.gen_range(0..n);
                row[pick] += 0.1;
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|q| *q /= total);
                // absorb rounding so the row sums to 1 within 1e-12
                let drift = 1.0 - row.iter().sum::<f64>();
                row[pick] += drift;
                px.push(row);
                gx.push((0..n).map(|_| rng.gen::<f64>()).collect());
            }
            g.push(gx);
            p.push(px);
        }
        TabularMdp::new(alpha, g, p)
    }

    pub fn document(&self) -> &MdpDocument {
        &self.doc
    }

    pub fn n_actions(&self, x: usize) -> usize {
        self.doc.actions[x]
    }

    pub fn transition(&self, x: usize, u: usize) -> &[f64] {
        &self.doc.p[x][u]
    }

    pub fn expected_cost(&self, x: usize, u: usize) -> f64 {
        self.expected_cost[x][u]
    }

    /// Largest `|g(x,u,y)|` over the whole table.
    pub fn max_abs_cost(&self) -> f64 {
        self.doc
            .g
            .iter()
            .flatten()
            .flatten()
            .fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `(g_μ, P_μ)`.
    pub fn policy_system(&self, mu: &Policy) -> Result<(Vec<f64>, DMatrix<f64>)> {
        mu.validate(self)?;
        let n = self.doc.states;
        let g = (0..n)
            .map(|x| self.expected_cost[x][mu.control(x)])
            .collect();
        let p = DMatrix::from_fn(n, n, |x, y| self.doc.p[x][mu.control(x)][y]);
        Ok((g, p))
    }

    /// `g_μ + α P_μ J`.
    pub fn bellman_mu_linear(&self, mu: &Policy, j: &CostTable) -> Result<CostTable> {
        mu.validate(self)?;
        if j.len() != self.doc.states {
            return Err(Error::Dimension {
                expected: self.doc.states,
                got: j.len(),
            });
        }
        Ok(CostTable(
            (0..self.doc.states)
                .map(|x| self.h(x, mu.control(x), j))
                .collect(),
        ))
    }

    /// `J + (I - λα P_μ)^(-1) (T_μ J - J)`, the exact λ-operator for linear H.
    pub fn t_lambda_closed_form(
        &self,
        mu: &Policy,
        j: &CostTable,
        lambda: f64,
    ) -> Result<CostTable> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(param("lambda", format!("{lambda} not in [0, 1)")));
        }
        let tj = self.bellman_mu_linear(mu, j)?;
        if lambda == 0.0 {
            return Ok(tj);
        }
        let (_, p) = self.policy_system(mu)?;
        let n = self.doc.states;
        let a = DMatrix::identity(n, n) - p * (lambda * self.doc.alpha);
        let d = tj.sub(j);
        let delta = solve_checked(&a, d.as_slice(), 1e-8)?;
        Ok(CostTable(
            j.iter().zip(&delta).map(|(a, b)| a + b).collect(),
        ))
    }

    /// `J_μ = (I - α P_μ)^(-1) g_μ`.
    pub fn solve_j_mu(&self, mu: &Policy) -> Result<CostTable> {
        let (g, p) = self.policy_system(mu)?;
        let n = self.doc.states;
        let a = DMatrix::identity(n, n) - p * self.doc.alpha;
        Ok(CostTable(solve_checked(&a, &g, 1e-8)?))
    }
}

impl AbstractModel for TabularMdp {
    fn space(&self) -> &WeightedSpace {
        &self.space
    }

    fn n_controls(&self, x: usize) -> usize {
        self.doc.actions[x]
    }

    fn h(&self, x: usize, u: usize, j: &CostTable) -> f64 {
        let row = &self.doc.p[x][u];
        let future: f64 = row.iter().zip(j.iter()).map(|(p, v)| p * v).sum();
        self.expected_cost[x][u] + self.doc.alpha * future
    }

    fn alpha(&self) -> f64 {
        self.doc.alpha
    }
}
