//! Dense least squares through the SVD.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Minimizer of `|A c - b|` and the RMS residual; fails when `A` loses rank.
pub(crate) fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let n = a.nrows();
    if n < a.ncols() {
        return Err(Error::DegenerateData(format!(
            "{n} equations for {} unknowns",
            a.ncols()
        )));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= smax * 1e-13 {
        return Err(Error::DegenerateData("rank-deficient regression matrix".into()));
    }
    let coeffs = svd
        .solve(b, 0.0)
        .map_err(|e| Error::DegenerateData(e.to_string()))?;
    let resid = a * &coeffs - b;
    Ok((coeffs, (resid.norm_squared() / n as f64).sqrt()))
}

/// Polynomial `Σ c_j x^j` fitted with optional per-point weights.
///
/// The design is built in the scaled variable `x / scale` and the
/// coefficients mapped back, which keeps the Vandermonde matrix well
/// conditioned on wide grids. The returned residual is the RMS of the
/// weighted residuals.
pub(crate) fn polyfit(
    xs: &[f64],
    ys: &[f64],
    weights: Option<&[f64]>,
    degree: usize,
) -> Result<(Vec<f64>, f64)> {
    let scale = xs.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let n = xs.len();
    let a = DMatrix::from_fn(n, degree + 1, |i, j| {
        let w = weights.map_or(1.0, |w| w[i]);
        w * (xs[i] / scale).powi(j as i32)
    });
    let b = DVector::from_fn(n, |i, _| weights.map_or(1.0, |w| w[i]) * ys[i]);
    let (c, resid) = solve(&a, &b)?;
    let coeffs = c
        .iter()
        .enumerate()
        .map(|(j, &cj)| cj / scale.powi(j as i32))
        .collect();
    Ok((coeffs, resid))
}
