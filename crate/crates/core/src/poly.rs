//! Small helpers for monomial-basis polynomials.

use num_complex::Complex64;

pub(crate) fn horner(coeffs: &[Complex64], x: f64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
}

#[cfg(test)]
pub(crate) fn horner_real(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// `p(x) = exp(log_mag) * phase` with `|phase| = 1`; survives `|x|` far past
/// the point where `x^deg` overflows.
pub(crate) fn polar_eval(coeffs: &[Complex64], x: f64) -> (f64, Complex64) {
    let deg = coeffs.len() - 1;
    let value = if x.abs() <= 1.0 {
        horner(coeffs, x)
    } else {
        // p(x) = x^deg q(1/x)
        let w = 1.0 / x;
        let q = coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * w + c);
        let mag = q.norm();
        if mag == 0.0 {
            return (f64::NEG_INFINITY, Complex64::new(1.0, 0.0));
        }
        let sign = if x < 0.0 && deg % 2 == 1 { -1.0 } else { 1.0 };
        return (deg as f64 * x.abs().ln() + mag.ln(), q / mag * sign);
    };
    let mag = value.norm();
    if mag == 0.0 {
        (f64::NEG_INFINITY, Complex64::new(1.0, 0.0))
    } else {
        (mag.ln(), value / mag)
    }
}

/// Coefficients of `p(s - 1)` as a polynomial in `s`.
pub(crate) fn shift_minus_one(coeffs: &[f64]) -> Vec<f64> {
    // repeated synthetic division by (s - 1) in the shifted variable
    let mut out = coeffs.to_vec();
    let n = out.len();
    for i in 0..n {
        for j in (i..n.saturating_sub(1)).rev() {
            out[j] -= out[j + 1];
        }
    }
    out
}

pub(crate) fn trim_real(mut coeffs: Vec<f64>) -> Vec<f64> {
    while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
        coeffs.pop();
    }
    coeffs
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
