//! Special functions: complex log-Gamma, gaussian moments, Hermite
//! polynomials and the error function.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default cap on polynomial degree, shared with [`crate::funcmodel`].
pub const DEFAULT_DEGREE_CAP: usize = 32;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// A finite complex number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexPoint(Complex64);

impl ComplexPoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::Domain(format!("non-finite complex point {re} + {im}i")));
        }
        Ok(Self(Complex64::new(re, im)))
    }

    pub fn real(re: f64) -> Result<Self> {
        Self::new(re, 0.0)
    }

    pub fn imag(im: f64) -> Result<Self> {
        Self::new(0.0, im)
    }

    pub fn re(&self) -> f64 {
        self.0.re
    }

    pub fn im(&self) -> f64 {
        self.0.im
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }
}

impl From<ComplexPoint> for Complex64 {
    fn from(z: ComplexPoint) -> Self {
        z.0
    }
}

impl TryFrom<Complex64> for ComplexPoint {
    type Error = Error;

    fn try_from(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }
}

/// True when `z` is one of 0, -1, -2, ...
pub fn is_gamma_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// Principal-branch log-Gamma of a validated point.
pub fn complex_log_gamma(z: ComplexPoint) -> Result<Complex64> {
    ln_gamma(z.value())
}

/// Principal-branch `log Γ(z)`, imaginary part reduced to `(-π, π]`.
///
/// Lanczos (g = 7, nine terms) on `Re z >= 1/2`, reflection below.
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("non-finite argument {z}")));
    }
    if is_gamma_pole(z) {
        return Err(Error::Pole { re: z.re, im: z.im });
    }
    let raw = if z.re < 0.5 {
        let one_minus = Complex64::new(1.0, 0.0) - z;
        Complex64::new(PI.ln(), 0.0) - ln_sin_pi(z) - lanczos_ln_gamma(one_minus)
    } else {
        lanczos_ln_gamma(z)
    };
    Ok(principal(raw))
}

/// `Γ(z)` by exponentiating [`ln_gamma`].
pub fn gamma(z: Complex64) -> Result<Complex64> {
    ln_gamma(z).map(|l| l.exp())
}

fn lanczos_ln_gamma(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut series = Complex64::new(LANCZOS_COEFFS[0], 0.0);
    for (k, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        series += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + series.ln()
}

/// `log sin(πz)` without overflow for large `|Im z|`.
fn ln_sin_pi(z: Complex64) -> Complex64 {
    let w = z * PI;
    let i = Complex64::i();
    if w.im.abs() < 20.0 {
        w.sin().ln()
    } else if w.im > 0.0 {
        -i * w + Complex64::new(0.0, 0.5).ln() + (1.0 - (2.0 * i * w).exp()).ln()
    } else {
        i * w + Complex64::new(0.0, -0.5).ln() + (1.0 - (-2.0 * i * w).exp()).ln()
    }
}

fn principal(z: Complex64) -> Complex64 {
    let two_pi = 2.0 * PI;
    let mut im = z.im - two_pi * (z.im / two_pi).round();
    if im <= -PI {
        im += two_pi;
    }
    Complex64::new(z.re, im)
}

/// `(2m-1)!!` with the convention `(-1)!! = 1`.
pub fn double_factorial_odd(m: u32) -> f64 {
    (1..=m).map(|j| (2 * j - 1) as f64).product()
}

/// `∫ x^{2m} e^{-s x²/2} dx` over the real line.
pub fn gaussian_moment(m: u32, s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("gaussian moment needs s > 0, got {s}")));
    }
    Ok(double_factorial_odd(m) * (2.0 * PI / s).sqrt() / s.powi(m as i32))
}

/// Monomial coefficients of the physicists' Hermite polynomial `H_n`.
pub fn hermite_coeffs(n: usize) -> Result<Vec<f64>> {
    hermite_coeffs_capped(n, DEFAULT_DEGREE_CAP)
}

pub fn hermite_coeffs_capped(n: usize, cap: usize) -> Result<Vec<f64>> {
    if n > cap {
        return Err(Error::CapExceeded { degree: n, cap });
    }
    Ok(hermite_table(n).pop().expect("table has n + 1 rows"))
}

/// Rows `H_0 ..= H_n` from `H_{k+1} = 2x H_k - 2k H_{k-1}`.
pub(crate) fn hermite_table(n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    rows.push(vec![1.0]);
    if n >= 1 {
        rows.push(vec![0.0, 2.0]);
    }
    for k in 1..n {
        let mut next = vec![0.0; k + 2];
        for (j, &c) in rows[k].iter().enumerate() {
            next[j + 1] += 2.0 * c;
        }
        for (j, &c) in rows[k - 1].iter().enumerate() {
            next[j] -= 2.0 * k as f64 * c;
        }
        rows.push(next);
    }
    rows
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}
