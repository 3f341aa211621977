use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `a x = b` by LU with partial pivoting and checks the residual
/// against `max_residual` (sup norm).
pub(crate) fn solve_checked(a: &DMatrix<f64>, b: &[f64], max_residual: f64) -> Result<Vec<f64>> {
    let rhs = DVector::from_column_slice(b);
    let x = a.clone().lu().solve(&rhs).ok_or(Error::Conditioning {
        residual: f64::INFINITY,
    })?;
    let residual = (a * &x - &rhs).amax();
    if !(residual <= max_residual) {
        return Err(Error::Conditioning { residual });
    }
    Ok(x.iter().copied().collect())
}
