//! Quadratic value functions `J̃(x, θ) = xᵀ P x + b` with `θ = (P, b)` and
//! `P ⪰ 0`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticValue {
    pub dim: usize,
    /// Row-major `dim × dim`.
    pub p: Vec<f64>,
    pub b: f64,
}

impl QuadraticValue {
    pub fn new(dim: usize, p: Vec<f64>, b: f64) -> Result<Self> {
        let q = QuadraticValue { dim, p, b };
        q.validate()?;
        Ok(q)
    }

    pub fn zero(dim: usize) -> Self {
        QuadraticValue {
            dim,
            p: vec![0.0; dim * dim],
            b: 0.0,
        }
    }

    /// `a x² + b` in one dimension.
    pub fn scalar(a: f64, b: f64) -> Result<Self> {
        QuadraticValue::new(1, vec![a], b)
    }

    pub fn identity(dim: usize, b: f64) -> Self {
        let mut q = QuadraticValue::zero(dim);
        for i in 0..dim {
            q.p[i * dim + i] = 1.0;
        }
        q.b = b;
        q
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.dim + j]
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.len() != self.dim * self.dim {
            return Err(Error::Dimension {
                expected: self.dim * self.dim,
                got: self.p.len(),
            });
        }
        if self.p.iter().any(|v| !v.is_finite()) || !self.b.is_finite() {
            return Err(param("theta", "non-finite parameter"));
        }
        for i in 0..self.dim {
            for j in 0..i {
                if (self.entry(i, j) - self.entry(j, i)).abs() > SYMMETRY_TOL {
                    return Err(param("theta", format!("P not symmetric at ({i}, {j})")));
                }
            }
        }
        let min = self.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(param("theta", format!("P has eigenvalue {min:e} < 0")));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut acc = self.b;
        for i in 0..self.dim {
            let row = &self.p[i * self.dim..(i + 1) * self.dim];
            acc += x[i] * row.iter().zip(x).map(|(p, v)| p * v).sum::<f64>();
        }
        acc
    }

    /// `P v`
    pub fn apply_p(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                self.p[i * self.dim..(i + 1) * self.dim]
                    .iter()
                    .zip(v)
                    .map(|(p, v)| p * v)
                    .sum()
            })
            .collect()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.p)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.dim == 0 {
            return 0.0;
        }
        self.matrix().symmetric_eigenvalues().min()
    }

    /// Number of regression parameters: upper-triangular entries plus `b`.
    pub fn n_params(dim: usize) -> usize {
        dim * (dim + 1) / 2 + 1
    }

    /// Monomials `x_i x_j` for `i ≤ j`, then the constant 1.
    pub fn features(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut f = Vec::with_capacity(Self::n_params(n));
        for i in 0..n {
            for j in i..n {
                f.push(x[i] * x[j]);
            }
        }
        f.push(1.0);
        f
    }

    /// Inverse of [`features`](Self::features): the coefficient of
    /// `x_i x_j` (`i < j`) is `2 P_ij`.
    pub fn from_params(dim: usize, params: &[f64]) -> Result<Self> {
        if params.len() != Self::n_params(dim) {
            return Err(Error::Dimension {
                expected: Self::n_params(dim),
                got: params.len(),
            });
        }
        let mut p = vec![0.0; dim * dim];
        let mut idx = 0;
        for i in 0..dim {
            for j in i..dim {
                let c = if i == j {
                    params[idx]
                } else {
                    0.5 * params[idx]
                };
                p[i * dim + j] = c;
                p[j * dim + i] = c;
                idx += 1;
            }
        }
        Ok(QuadraticValue {
            dim,
            p,
            b: params[idx],
        })
    }

    /// Nearest PSD matrix in Frobenius norm: symmetrize, then clip negative
    /// eigenvalues to zero. `b` is unchanged.
    pub fn project_psd(&self) -> QuadraticValue {
        if self.dim == 0 {
            return self.clone();
        }
        let m = self.matrix();
        let sym = (&m + m.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
            return self.with_matrix(&sym);
        }
        let clipped = eig.eigenvalues.map(|l| l.max(0.0));
        let v = &eig.eigenvectors;
        let rebuilt = v * DMatrix::from_diagonal(&clipped) * v.transpose();
        // exact symmetry after the rebuild
        let rebuilt = (&rebuilt + rebuilt.transpose()) * 0.5;
        self.with_matrix(&rebuilt)
    }

    fn with_matrix(&self, m: &DMatrix<f64>) -> QuadraticValue {
        let mut p = vec![0.0; self.dim * self.dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                p[i * self.dim + j] = m[(i, j)];
            }
        }
        QuadraticValue {
            dim: self.dim,
            p,
            b: self.b,
        }
    }

    /// `max |J̃(x, self) - J̃(x, other)|` over the given points.
    pub fn sup_diff<'a>(
        &self,
        other: &QuadraticValue,
        points: impl IntoIterator<Item = &'a [f64]>,
    ) -> f64 {
        points
            .into_iter()
            .map(|x| (self.eval(x) - other.eval(x)).abs())
            .fold(0.0, f64::max)
    }
}
