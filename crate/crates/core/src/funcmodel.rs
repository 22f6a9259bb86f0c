//! Finite sums of polynomial-times-gaussian terms `p(x) e^{-a x²/2}`.
//!
//! Coefficients are stored in the monomial basis and are complex-capable:
//! the Fourier image of a real odd term has imaginary coefficients. The
//! transform itself goes through the Hermite basis, where it is diagonal.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::{horner, log_add_exp, polar_eval, shift_minus_one, trim_real};
use crate::quad::{integrate_line, LineHint};
use crate::specfun::{double_factorial_odd, gaussian_moment, hermite_table, DEFAULT_DEGREE_CAP};

/// Relative tolerance for [`exp_moment`].
pub const EXP_MOMENT_TOL: f64 = 1e-10;

fn inv_sqrt_2pi() -> f64 {
    1.0 / (2.0 * PI).sqrt()
}

/// One term `p(x) γ_a(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussPolyTerm {
    coeffs: Vec<Complex64>,
    width: f64,
}

impl GaussPolyTerm {
    /// Real coefficients, `coeffs[j]` multiplying `x^j`. Trailing zeros are
    /// dropped; an all-zero polynomial is rejected.
    pub fn new(coeffs: Vec<f64>, width: f64) -> Result<Self> {
        Self::new_complex(coeffs.into_iter().map(|c| Complex64::new(c, 0.0)).collect(), width)
    }

    pub fn new_complex(mut coeffs: Vec<Complex64>, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::Validation(format!("width must be a positive finite real, got {width}")));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Validation("coefficients must be finite".into()));
        }
        while coeffs.last().is_some_and(|c| *c == Complex64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            return Err(Error::Validation(
                "coefficients must be nonempty with a nonzero leading coefficient".into(),
            ));
        }
        let degree = coeffs.len() - 1;
        if degree > DEFAULT_DEGREE_CAP {
            return Err(Error::CapExceeded {
                degree,
                cap: DEFAULT_DEGREE_CAP,
            });
        }
        Ok(Self { coeffs, width })
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|c| c.im == 0.0)
    }

    pub fn real_coeffs(&self) -> Option<Vec<f64>> {
        self.is_real().then(|| self.coeffs.iter().map(|c| c.re).collect())
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        horner(&self.coeffs, x) * (-0.5 * self.width * x * x).exp()
    }

    /// `(ln |term(x)|, phase)`.
    fn polar(&self, x: f64) -> (f64, Complex64) {
        let (lm, phase) = polar_eval(&self.coeffs, x);
        (lm - 0.5 * self.width * x * x, phase)
    }

    fn fourier(&self) -> Self {
        let a = self.width;
        let n = self.degree();
        let table = hermite_table(n);
        // t = √a x, so x^m = a^{-m/2} t^m
        let mut mono: Vec<Complex64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, &c)| c * a.powf(-(m as f64) / 2.0))
            .collect();
        let mut herm = vec![Complex64::new(0.0, 0.0); n + 1];
        for k in (0..=n).rev() {
            let h = mono[k] / table[k][k];
            herm[k] = h;
            for (j, &hj) in table[k].iter().enumerate() {
                mono[j] -= h * hj;
            }
        }
        // H_k γ_1 is an eigenfunction with eigenvalue (-i)^k
        let minus_i = Complex64::new(0.0, -1.0);
        let mut out = vec![Complex64::new(0.0, 0.0); n + 1];
        let mut eig = Complex64::new(1.0, 0.0);
        for (k, &h) in herm.iter().enumerate() {
            for (j, &hj) in table[k].iter().enumerate() {
                out[j] += h * eig * hj;
            }
            eig *= minus_i;
        }
        // undo the dilation: f(x) = g(√a x) has f̂(y) = a^{-1/2} ĝ(y/√a)
        for (m, c) in out.iter_mut().enumerate() {
            *c *= a.powf(-(m as f64) / 2.0 - 0.5);
        }
        Self::new_complex(out, 1.0 / a).expect("leading Hermite coefficient is nonzero")
    }

    /// Monomials of one parity; `None` when nothing survives.
    fn parity_part(&self, odd: bool) -> Option<Self> {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| if (j % 2 == 1) == odd { c } else { Complex64::new(0.0, 0.0) })
            .collect();
        Self::new_complex(coeffs, self.width).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Mellin index `k` selecting this parity.
    pub fn mellin_index(self) -> u8 {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }
}

/// `Σ p_i(x) γ_{a_i}(x)` with distinct widths in ascending order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussPoly {
    terms: Vec<GaussPolyTerm>,
}

impl GaussPoly {
    /// Rejects repeated widths; widths are compared exactly.
    pub fn new(mut terms: Vec<GaussPolyTerm>) -> Result<Self> {
        terms.sort_by(|a, b| a.width.total_cmp(&b.width));
        if let Some(w) = terms.windows(2).find(|w| w[0].width == w[1].width) {
            return Err(Error::Validation(format!(
                "at most one term per width, width {} repeated",
                w[0].width
            )));
        }
        Ok(Self { terms })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// `γ_a`.
    pub fn gaussian(width: f64) -> Result<Self> {
        Self::single(vec![1.0], width)
    }

    /// `x^m γ_a`.
    pub fn monomial(m: usize, width: f64) -> Result<Self> {
        let mut c = vec![0.0; m + 1];
        c[m] = 1.0;
        Self::single(c, width)
    }

    pub fn single(coeffs: Vec<f64>, width: f64) -> Result<Self> {
        Ok(Self {
            terms: vec![GaussPolyTerm::new(coeffs, width)?],
        })
    }

    /// From `(coeffs, width)` pairs.
    pub fn from_real_terms(terms: &[(Vec<f64>, f64)]) -> Result<Self> {
        let terms = terms
            .iter()
            .map(|(c, w)| GaussPolyTerm::new(c.clone(), *w))
            .collect::<Result<Vec<_>>>()?;
        Self::new(terms)
    }

    pub fn terms(&self) -> &[GaussPolyTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_real(&self) -> bool {
        self.terms.iter().all(GaussPolyTerm::is_real)
    }

    pub fn widths(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.width).collect()
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(GaussPolyTerm::degree).max().unwrap_or(0)
    }

    /// Slowest-decaying width.
    pub fn min_width(&self) -> Option<f64> {
        self.terms.first().map(|t| t.width)
    }

    pub fn max_width(&self) -> Option<f64> {
        self.terms.last().map(|t| t.width)
    }

    /// The common width, or `MixedWidth` when there is more than one.
    pub fn single_width(&self) -> Result<f64> {
        match self.terms.as_slice() {
            [t] => Ok(t.width),
            [] => Err(Error::Validation("zero function has no width".into())),
            _ => Err(Error::MixedWidth(self.widths())),
        }
    }

    pub fn eval_complex(&self, x: f64) -> Complex64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// Real part of the value; the full value for real coefficients.
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_complex(x).re
    }

    /// `ln |f(x)|`, finite far beyond the range where `f(x)` underflows.
    pub fn ln_abs(&self, x: f64) -> f64 {
        let parts: Vec<(f64, Complex64)> = self.terms.iter().map(|t| t.polar(x)).collect();
        let top = parts.iter().fold(f64::NEG_INFINITY, |m, p| m.max(p.0));
        if top == f64::NEG_INFINITY {
            return top;
        }
        let sum: Complex64 = parts.iter().map(|&(l, ph)| ph * (l - top).exp()).sum();
        let mag = sum.norm();
        if mag == 0.0 {
            f64::NEG_INFINITY
        } else {
            top + mag.ln()
        }
    }

    /// `ln(|f(x)| + |f(-x)|)`.
    pub fn ln_abs_folded(&self, x: f64) -> f64 {
        log_add_exp(self.ln_abs(x), self.ln_abs(-x))
    }

    /// Closed-form Fourier transform `f̂(y) = (2π)^{-1/2} ∫ f(x) e^{-ixy} dx`.
    pub fn fourier(&self) -> Self {
        let terms = self.terms.iter().map(GaussPolyTerm::fourier).collect();
        Self::new(terms).expect("reciprocal widths stay distinct")
    }

    /// `(even part, odd part)`.
    pub fn parity_parts(&self) -> (Self, Self) {
        let even = self.terms.iter().filter_map(|t| t.parity_part(false)).collect();
        let odd = self.terms.iter().filter_map(|t| t.parity_part(true)).collect();
        (Self { terms: even }, Self { terms: odd })
    }

    /// Parity when `f` is purely even or purely odd (and nonzero).
    pub fn parity(&self) -> Option<Parity> {
        let (even, odd) = self.parity_parts();
        match (even.is_zero(), odd.is_zero()) {
            (false, true) => Some(Parity::Even),
            (true, false) => Some(Parity::Odd),
            _ => None,
        }
    }

    /// `x ↦ f(s x)`.
    pub fn dilate(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Domain(format!("dilation factor must be positive, got {s}")));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let coeffs = t
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| c * s.powi(j as i32))
                    .collect();
                GaussPolyTerm::new_complex(coeffs, t.width * s * s)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(terms)
    }

    fn real_terms(&self) -> Result<Vec<(Vec<f64>, f64)>> {
        self.terms
            .iter()
            .map(|t| t.real_coeffs().map(|c| (c, t.width)).ok_or(Error::NotReal))
            .collect()
    }
}

/// `∫ |f(x)| e^{ε|x|} dx`.
pub fn exp_moment(f: &GaussPoly, eps: f64) -> Result<f64> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("eps must be a nonnegative real, got {eps}")));
    }
    let Some(a) = f.min_width() else {
        return Ok(0.0);
    };
    let r = integrate_line(
        |x| (f.ln_abs(x) + eps * x.abs()).exp(),
        EXP_MOMENT_TOL,
        LineHint::gaussian(a),
    )?;
    Ok(r.value)
}

/// `F(λ) = (2π)^{-1/2} ∫ f(x) f(λx) dx` from gaussian moments.
pub fn autocorr_eval(f: &GaussPoly, lambda: f64) -> Result<f64> {
    if !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be finite, got {lambda}")));
    }
    let terms = f.real_terms()?;
    let mut total = 0.0;
    for (ci, ai) in &terms {
        for (cj, aj) in &terms {
            let s = ai + aj * lambda * lambda;
            for (k, &ck) in ci.iter().enumerate() {
                if ck == 0.0 {
                    continue;
                }
                let mut lam_pow = 1.0;
                for (l, &cl) in cj.iter().enumerate() {
                    if (k + l) % 2 == 0 && cl != 0.0 {
                        total += ck * cl * lam_pow * gaussian_moment(((k + l) / 2) as u32, s)?;
                    }
                    lam_pow *= lambda;
                }
            }
        }
    }
    Ok(total * inv_sqrt_2pi())
}

/// Coefficients of `F(λ) = Σ_j (t_j + u_j λ) (λ²+1)^{-j-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFractionF {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
}

impl PartialFractionF {
    pub fn eval(&self, lambda: f64) -> f64 {
        let s = lambda * lambda + 1.0;
        self.t
            .iter()
            .zip(&self.u)
            .enumerate()
            .map(|(j, (&t, &u))| (t + u * lambda) * s.powf(-(j as f64) - 0.5))
            .sum()
    }
}

/// Partial-fraction form of `F` for a single-width real `f`.
///
/// Expanding the moments gives `F(λ) = Σ_m P_m(λ) (λ²+1)^{-m-1/2}` with
/// `deg P_m <= 2m`. Splitting `P_m(λ) = E(λ²) + λ O(λ²)` and rewriting `E`,
/// `O` in powers of `λ²+1` moves each piece onto a lower index `j`.
pub fn autocorr_closed(f: &GaussPoly) -> Result<PartialFractionF> {
    if f.is_zero() {
        return Ok(PartialFractionF {
            t: vec![0.0],
            u: vec![0.0],
        });
    }
    let a = f.single_width()?;
    let c = f.terms[0].real_coeffs().ok_or(Error::NotReal)?;
    let deg = c.len() - 1;
    let mut t = vec![0.0; deg + 1];
    let mut u = vec![0.0; deg + 1];
    for m in 0..=deg {
        // P_m(λ) = Σ_{k+l=2m} c_k c_l (2m-1)!! a^{-m-1/2} λ^l
        let scale = double_factorial_odd(m as u32) * a.powf(-(m as f64) - 0.5);
        let mut p = vec![0.0; 2 * m + 1];
        for (l, slot) in p.iter_mut().enumerate() {
            let k = 2 * m - l;
            if k <= deg && l <= deg {
                *slot = c[k] * c[l] * scale;
            }
        }
        let even: Vec<f64> = p.iter().step_by(2).copied().collect();
        let odd: Vec<f64> = p.iter().skip(1).step_by(2).copied().collect();
        // in s = λ²+1: E(s-1) = Σ e_r s^r lands on t_{m-r}
        for (r, e) in shift_minus_one(&even).into_iter().enumerate() {
            t[m - r] += e;
        }
        for (r, o) in shift_minus_one(&odd).into_iter().enumerate() {
            u[m - r] += o;
        }
    }
    let len = trim_real(t.clone()).len().max(trim_real(u.clone()).len());
    t.truncate(len);
    u.truncate(len);
    Ok(PartialFractionF { t, u })
}

/// `|F(1/λ) - |λ| F(λ)|`.
pub fn reflection_residual(f: &GaussPoly, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Err(Error::Domain("reflection needs lambda != 0".into()));
    }
    let lhs = autocorr_eval(f, 1.0 / lambda)?;
    let rhs = lambda.abs() * autocorr_eval(f, lambda)?;
    Ok((lhs - rhs).abs())
}

/// `G(λ) = (λ²+1)^{1/2} F(λ)`.
pub fn g_symmetric(f: &GaussPoly, lambda: f64) -> Result<f64> {
    Ok((lambda * lambda + 1.0).sqrt() * autocorr_eval(f, lambda)?)
}
