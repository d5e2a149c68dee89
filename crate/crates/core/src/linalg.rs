//! Minimum-norm least squares through a truncated singular value decomposition.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const DEFAULT_RCOND: f64 = 1e-10;

/// Solves `min ||A x - b||` returning the minimum-norm minimiser.
///
/// Singular values below `rcond * sigma_max` are treated as zero, so
/// rank-deficient and underdetermined systems are handled uniformly.
pub fn lstsq_min_norm(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.len() });
    }
    let cols = a.ncols();
    if a.nrows() == 0 || cols == 0 {
        return Ok(DVector::zeros(cols));
    }
    if !a.iter().all(|v| v.is_finite()) || !b.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("least-squares system"));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = rcond * sigma_max;

    let mut x = DVector::zeros(cols);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let coeff = u.column(i).dot(b) / s;
        x.axpy(coeff, &v_t.row(i).transpose(), 1.0);
    }
    Ok(x)
}

/// Sum of squared residuals `||A x - b||^2`.
pub fn residual_sq(a: &DMatrix<f64>, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a * x - b).norm_squared()
}
