//! Thin wrappers over the dense symmetric routines of `faer`.

#[cfg(test)]
use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Ascending eigenvalues of a symmetric matrix.
pub(crate) fn eigenvalues(m: &Mat<f64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::NoConvergence { iterations: 0, residual: f64::NAN })
}

/// Ascending eigenvalues and the matching orthonormal eigenvectors (columns).
pub(crate) fn eigen(m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::NoConvergence { iterations: 0, residual: f64::NAN })?;
    let s = evd.S().column_vector();
    let vals = (0..m.nrows()).map(|i| s[i]).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Solves `m x = b` through a Cholesky factorisation; `None` when `m` is not
/// numerically positive definite. Reference route for tests.
#[cfg(test)]
pub(crate) fn cholesky_solve(m: &Mat<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let llt = m.llt(Side::Lower).ok()?;
    let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    llt.solve_in_place(rhs.as_mut());
    let x: Vec<f64> = (0..b.len()).map(|i| rhs[(i, 0)]).collect();
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Whether `m` admits a Cholesky factorisation.
#[cfg(test)]
pub(crate) fn is_positive_definite(m: &Mat<f64>) -> bool {
    m.llt(Side::Lower).is_ok()
}
