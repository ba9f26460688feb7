//! Least squares with rank diagnostics.
//!
//! All regressions in the crate go through [`least_squares`], which uses a
//! column-pivoted QR decomposition so that a rank-deficient design is
//! reported with the names of the offending columns instead of silently
//! producing garbage coefficients.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Relative threshold on the diagonal of R below which a column is treated
/// as linearly dependent on the preceding pivots.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coef: DVector<f64>,
    pub fitted: DVector<f64>,
    pub resid: DVector<f64>,
}

/// Builds an `n x p` matrix from row-major data.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, p, |i, j| rows[i][j])
}

/// Returns the indices of columns that are linearly dependent on the others,
/// or an empty vector when the design has full column rank.
pub fn dependent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let p = x.ncols();
    if p == 0 {
        return Vec::new();
    }
    if x.nrows() < p {
        // More columns than rows: the trailing columns can never be pinned.
        return (x.nrows()..p).collect();
    }
    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    let max_diag = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if max_diag == 0.0 {
        return (0..p).collect();
    }
    let mut order = DMatrix::from_fn(1, p, |_, j| j as f64);
    qr.p().permute_columns(&mut order);
    let mut out: Vec<usize> = (0..p)
        .filter(|&i| r[(i, i)].abs() <= RANK_TOLERANCE * max_diag)
        .map(|i| order[(0, i)] as usize)
        .collect();
    out.sort_unstable();
    out
}

/// Ordinary least squares of `y` on the columns of `x`.
///
/// `names` labels the columns for error messages; a rank-deficient design
/// fails with [`Error::Estimation`] naming the collinear columns.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<LeastSquares> {
    if x.nrows() != y.len() {
        return Err(Error::Precondition(format!(
            "design has {} rows but response has {}",
            x.nrows(),
            y.len()
        )));
    }
    let dependent = dependent_columns(x);
    if !dependent.is_empty() {
        let labels: Vec<&str> = dependent
            .iter()
            .map(|&j| names.get(j).map_or("<unnamed>", String::as_str))
            .collect();
        return Err(Error::Estimation(format!(
            "rank-deficient design; collinear terms: {}",
            labels.join(", ")
        )));
    }
    let qr = x.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qty = q.transpose() * y;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Estimation("triangular solve failed".into()))?;
    let fitted = x * &coef;
    let resid = y - &fitted;
    Ok(LeastSquares {
        coef,
        fitted,
        resid,
    })
}

/// Solves `a * x = b` for a symmetric positive definite `a`.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().cholesky().map(|c| c.solve(b)).or_else(|| a.clone().lu().solve(b))
}

/// Inverse of a symmetric positive definite matrix, falling back to LU.
pub fn inverse_spd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| a.clone().try_inverse())
}

/// `X'X` for a row-major slice of equally sized rows.
pub fn cross_product(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.transpose() * x
}
