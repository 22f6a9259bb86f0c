//! Mellin transforms `M^k_f(z) = (2π)^{-1/2} ∫ f(x) sgn(x)^k |x|^{z-1/2} dx`
//! and the normalized `Θ^k_f(z) = M^k_f(z) / Γ(z/2 + k/2 + 1/4)`.
//!
//! For `f = Σ c_m x^m γ_a` every quantity here has a closed form; the
//! quadrature path exists to check them.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::funcmodel::{GaussPoly, GaussPolyTerm, Parity, PartialFractionF};
use crate::lsq::polyfit;
use crate::quad::{integrate_half_line_complex, Decay, LineHint};
use crate::specfun::{ln_gamma, ComplexPoint};

/// Relative residual below which a polynomial degree is accepted.
pub const DEGREE_SELECTION_THRESHOLD: f64 = 1e-8;

/// Tolerance used by [`mellin_numeric`].
pub const NUMERIC_TOL: f64 = 1e-11;

const C0: Complex64 = Complex64::new(0.0, 0.0);

fn inv_sqrt_2pi() -> f64 {
    1.0 / (2.0 * PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MellinValue {
    pub z: Complex64,
    pub k: u8,
    pub value: Complex64,
}

/// `Θ^k(z) = r(z) e^{exp_rate z}`; for a product fit `exp_rate` is 0 and
/// `poly_coeffs` holds the product polynomial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaFit {
    pub poly_coeffs: Vec<Complex64>,
    pub exp_rate: f64,
    pub residual: f64,
}

impl ThetaFit {
    pub fn degree(&self) -> usize {
        self.poly_coeffs.len().saturating_sub(1)
    }
}

/// `(2π)^{-1/2} ∫_0^∞ (f(x) + (-1)^k f(-x)) x^{z-1/2} dx` after `x = u²`.
pub fn mellin_numeric(f: &GaussPoly, k: Parity, z: ComplexPoint) -> Result<Complex64> {
    let z = z.value();
    if z.re.abs() >= 0.5 {
        return Err(Error::Domain(format!("numeric Mellin needs |Re z| < 1/2, got {z}")));
    }
    let Some(a) = f.min_width() else {
        return Ok(C0);
    };
    let sign = if k == Parity::Odd { -1.0 } else { 1.0 };
    // dx x^{z-1/2} = 2 u^{2z} du
    let g = |u: f64| -> Complex64 {
        if u == 0.0 {
            return C0;
        }
        let x = u * u;
        let folded = f.eval_complex(x) + sign * f.eval_complex(-x);
        2.0 * folded * (2.0 * z * u.ln()).exp()
    };
    // e^{-a u⁴/2} is dominated by e^{-a u²/2} beyond u = 1
    let hint = LineHint {
        scale: a.powf(-0.25).max(1.0),
        decay: Decay::Gaussian { width: a },
    };
    let (v, _) = integrate_half_line_complex(g, NUMERIC_TOL, hint)?;
    Ok(v * inv_sqrt_2pi())
}

fn parity_terms(term: &GaussPolyTerm, k: Parity) -> impl Iterator<Item = (usize, Complex64)> + '_ {
    let ki = k.mellin_index() as usize;
    term.coeffs()
        .iter()
        .enumerate()
        .filter(move |(m, c)| m % 2 == ki % 2 && **c != C0)
        .map(|(m, &c)| (m, c))
}

/// Closed form: `x^m γ_a` contributes
/// `(2π)^{-1/2} (a/2)^{-(z/2+m/2+1/4)} Γ(z/2+m/2+1/4)` when `m + k` is even.
pub fn mellin_gausspoly_closed(f: &GaussPoly, k: Parity, z: ComplexPoint) -> Result<Complex64> {
    let z = z.value();
    let mut total = C0;
    for term in f.terms() {
        let ln_half = (0.5 * term.width()).ln();
        for (m, c) in parity_terms(term, k) {
            let s = 0.5 * z + 0.5 * m as f64 + 0.25;
            total += c * (ln_gamma(s)? - s * ln_half).exp();
        }
    }
    Ok(total * inv_sqrt_2pi())
}

/// `Γ(s + n) / Γ(s)`.
fn pochhammer(s: Complex64, n: usize) -> Complex64 {
    (0..n).fold(Complex64::new(1.0, 0.0), |acc, i| acc * (s + i as f64))
}

/// `Θ^k_f(z)`; entire for this class, so the Gamma ratio reduces to a
/// rising factorial and no pole can occur.
pub fn theta(f: &GaussPoly, k: Parity, z: ComplexPoint) -> Result<Complex64> {
    let z = z.value();
    let ki = k.mellin_index() as usize;
    let base = 0.5 * z + 0.5 * ki as f64 + 0.25;
    let mut total = C0;
    for term in f.terms() {
        let ln_half = (0.5 * term.width()).ln();
        for (m, c) in parity_terms(term, k) {
            let s = 0.5 * z + 0.5 * m as f64 + 0.25;
            total += c * pochhammer(base, (m - ki) / 2) * (-s * ln_half).exp();
        }
    }
    Ok(total * inv_sqrt_2pi())
}

pub fn theta_value(f: &GaussPoly, k: Parity, z: ComplexPoint) -> Result<MellinValue> {
    Ok(MellinValue {
        z: z.value(),
        k: k.mellin_index(),
        value: theta(f, k, z)?,
    })
}

/// Mellin transform of `F(λ) = Σ (t_j + u_j λ)(λ²+1)^{-j-1/2}` from the
/// Beta integral, term by term.
pub fn mellin_f_closed(pf: &PartialFractionF, k: Parity, z: ComplexPoint) -> Result<Complex64> {
    let z = z.value();
    let (coeffs, shift) = match k {
        Parity::Even => (&pf.t, 0.25),
        Parity::Odd => (&pf.u, 0.75),
    };
    let mut total = C0;
    let mut lead = None;
    for (j, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let lead = match lead {
            Some(l) => l,
            None => *lead.insert(ln_gamma(0.5 * z + shift)?),
        };
        let jf = j as f64;
        let ln = lead + ln_gamma(jf - 0.5 * z + 0.5 - shift)? - ln_gamma(Complex64::new(jf + 0.5, 0.0))?;
        total += c * ln.exp();
    }
    Ok(total * inv_sqrt_2pi())
}

/// Max relative deviation of `M^k_F(it) = M^k_f(it) M^k_f(-it)` over the
/// grid, with `F` in closed partial-fraction form.
pub fn verify_product_identity(f: &GaussPoly, k: Parity, t_grid: &[f64]) -> Result<f64> {
    let pf = crate::funcmodel::autocorr_closed(f)?;
    let mut worst = 0.0_f64;
    for &t in t_grid {
        let z = ComplexPoint::imag(t)?;
        let lhs = mellin_f_closed(&pf, k, z)?;
        let rhs = mellin_gausspoly_closed(f, k, z)? * mellin_gausspoly_closed(f, k, ComplexPoint::imag(-t)?)?;
        let scale = rhs.norm();
        let dev = (lhs - rhs).norm();
        worst = worst.max(if scale > 0.0 { dev / scale } else { dev });
    }
    Ok(worst)
}

/// `|Θ^k_{f̂}(z) - i^{-k} 2^z Θ^k_f(-z)|`.
pub fn theta_hat_relation(f: &GaussPoly, k: Parity, z: ComplexPoint) -> Result<f64> {
    let zv = z.value();
    if zv.re.abs() >= 0.5 {
        return Err(Error::Domain(format!("relation is stated for |Re z| < 1/2, got {zv}")));
    }
    let lhs = theta(&f.fourier(), k, z)?;
    let phase = match k {
        Parity::Even => Complex64::new(1.0, 0.0),
        Parity::Odd => Complex64::new(0.0, -1.0),
    };
    let rhs = phase * (zv * 2f64.ln()).exp() * theta(f, k, ComplexPoint::try_from(-zv)?)?;
    Ok((lhs - rhs).norm())
}

/// `n` evenly spaced points on `[-3, 3]`.
pub fn default_real_grid(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| -3.0 + 6.0 * i as f64 / (n - 1) as f64).collect()
}

/// Polynomial fit of `Θ^k(z) Θ^k(-z)` on a real grid, taking the smallest
/// degree whose RMS residual relative to the largest sample is below
/// [`DEGREE_SELECTION_THRESHOLD`].
pub fn theta_product_poly(f: &GaussPoly, k: Parity, z_grid: &[f64]) -> Result<ThetaFit> {
    f.single_width()?;
    if !f.is_real() {
        return Err(Error::NotReal);
    }
    if z_grid.len() < 2 {
        return Err(Error::DegenerateData("need at least 2 grid points".into()));
    }
    let values = z_grid
        .iter()
        .map(|&z| {
            let p = theta(f, k, ComplexPoint::real(z)?)? * theta(f, k, ComplexPoint::real(-z)?)?;
            Ok(p.re)
        })
        .collect::<Result<Vec<f64>>>()?;
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(ThetaFit {
            poly_coeffs: vec![C0],
            exp_rate: 0.0,
            residual: 0.0,
        });
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for degree in 0..z_grid.len() - 1 {
        let Ok((c, rms)) = polyfit(z_grid, &values, None, degree) else {
            break;
        };
        let rel = rms / scale;
        let better = best.as_ref().is_none_or(|b| rel < b.1);
        if better {
            best = Some((c, rel));
        }
        if rel <= DEGREE_SELECTION_THRESHOLD {
            break;
        }
    }
    let (c, residual) = best.expect("degree 0 fit always succeeds on distinct points");
    Ok(ThetaFit {
        poly_coeffs: c.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
        exp_rate: 0.0,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcmodel::autocorr_closed;
    use crate::specfun::gamma;
    use approx::assert_relative_eq;

    fn re(x: f64) -> ComplexPoint {
        ComplexPoint::real(x).unwrap()
    }

    fn im(t: f64) -> ComplexPoint {
        ComplexPoint::imag(t).unwrap()
    }

    fn g(x: f64) -> f64 {
        gamma(Complex64::new(x, 0.0)).unwrap().re
    }

    fn corpus() -> Vec<GaussPoly> {
        let mut out = Vec::new();
        for &a in &[0.5, 1.0, 2.0, 4.0] {
            for deg in 0..=4usize {
                let c: Vec<f64> = (0..=deg).map(|j| if (deg - j) % 2 == 0 { 1.0 + 0.3 * j as f64 } else { 0.0 }).collect();
                out.push(GaussPoly::single(c, a).unwrap());
            }
        }
        out
    }

    #[test]
    fn numeric_examples() {
        let g1 = GaussPoly::gaussian(1.0).unwrap();
        let want = 2f64.powf(0.25) * g(0.25) * inv_sqrt_2pi();
        let v = mellin_numeric(&g1, Parity::Even, re(0.0)).unwrap();
        assert_relative_eq!(v.re, want, max_relative = 1e-9);
        assert_relative_eq!(v.re, 1.7200, max_relative = 1e-4);
        let x1 = GaussPoly::monomial(1, 1.0).unwrap();
        assert!(mellin_numeric(&x1, Parity::Even, im(2.0)).unwrap().norm() < 1e-15);
        let v = mellin_numeric(&x1, Parity::Odd, re(0.0)).unwrap();
        assert_relative_eq!(v.re, inv_sqrt_2pi() * 2f64.powf(0.75) * g(0.75), max_relative = 1e-9);
        assert_relative_eq!(v.re, 0.8222, max_relative = 1e-4);
        assert!(mellin_numeric(&g1, Parity::Even, re(0.5)).is_err());
    }

    #[test]
    fn numeric_against_direct_oracle() {
        // midpoint sums of the defining integral, without the substitution
        let g1 = GaussPoly::gaussian(1.0).unwrap();
        let n = 2_000_000;
        let h = 40.0 / n as f64;
        let oracle: f64 = (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) * h;
                2.0 * (-0.5 * x * x).exp() * x.powf(-0.25)
            })
            .sum::<f64>()
            * h
            * inv_sqrt_2pi();
        let v = mellin_numeric(&g1, Parity::Even, re(0.25)).unwrap().re;
        // the x^{-1/4} endpoint costs the midpoint rule about h^{3/4}
        assert!((v - oracle).abs() / v < 1e-4, "{v} vs {oracle}");
    }

    #[test]
    fn closed_examples() {
        let g1 = GaussPoly::gaussian(1.0).unwrap();
        assert_relative_eq!(
            mellin_gausspoly_closed(&g1, Parity::Even, re(0.0)).unwrap().re,
            1.7200,
            max_relative = 1e-4
        );
        assert_eq!(mellin_gausspoly_closed(&g1, Parity::Odd, im(1.0)).unwrap(), C0);
        for &a in &[0.5, 3.0] {
            let d = GaussPoly::monomial(1, a).unwrap();
            for &z in &[0.0, 0.3, -0.2] {
                let want = inv_sqrt_2pi() * (a / 2.0).powf(-z / 2.0 - 0.75) * g(z / 2.0 + 0.75);
                let got = mellin_gausspoly_closed(&d, Parity::Odd, re(z)).unwrap();
                assert_relative_eq!(got.re, want, max_relative = 1e-12);
            }
        }
        assert!(matches!(
            mellin_gausspoly_closed(&g1, Parity::Even, re(-0.5)),
            Err(Error::Pole { .. })
        ));
    }

    #[test]
    fn numeric_matches_closed_on_corpus() {
        for f in corpus() {
            for k in [Parity::Even, Parity::Odd] {
                for &t in &[0.0, 1.0, 3.0, 7.0] {
                    let c = mellin_gausspoly_closed(&f, k, im(t)).unwrap();
                    let n = mellin_numeric(&f, k, im(t)).unwrap();
                    let scale = c.norm().max(1e-300);
                    if c.norm() == 0.0 {
                        assert!(n.norm() < 1e-12);
                    } else {
                        assert!((c - n).norm() / scale < 1e-7, "{f:?} k={k:?} t={t}: {c} vs {n}");
                    }
                }
            }
        }
    }

    #[test]
    fn theta_examples() {
        let g1 = GaussPoly::gaussian(1.0).unwrap();
        let v = theta(&g1, Parity::Even, re(0.0)).unwrap();
        assert_relative_eq!(v.re, 2f64.powf(0.25) * inv_sqrt_2pi(), max_relative = 1e-14);
        assert_relative_eq!(v.re, 0.4744, max_relative = 1e-4);
        for &z in &[0.3, -1.2, 2.0] {
            let p = theta(&g1, Parity::Even, re(z)).unwrap() * theta(&g1, Parity::Even, re(-z)).unwrap();
            assert_relative_eq!(p.re, 2f64.sqrt() / (2.0 * PI), max_relative = 1e-14);
        }
        assert_eq!(theta(&g1, Parity::Odd, im(3.0)).unwrap(), C0);
        // ratio agrees with M / Γ
        let f = GaussPoly::single(vec![0.5, 0.0, 1.0, 0.0, -0.2], 1.7).unwrap();
        for &t in &[0.0, 2.0, 9.0] {
            let z = Complex64::new(0.1, t);
            let m = mellin_gausspoly_closed(&f, Parity::Even, z.try_into().unwrap()).unwrap();
            let ratio = m / gamma(0.5 * z + 0.25).unwrap();
            let th = theta(&f, Parity::Even, z.try_into().unwrap()).unwrap();
            assert!((ratio - th).norm() <= 1e-12 * th.norm());
        }
    }

    #[test]
    fn theta_conjugate_symmetry_and_growth() {
        for f in corpus() {
            let deg = f.degree() as i32;
            for k in [Parity::Even, Parity::Odd] {
                let mut worst = 0.0_f64;
                for i in 0..=80 {
                    let t = 0.5 * i as f64;
                    let p = theta(&f, k, im(t)).unwrap();
                    let q = theta(&f, k, im(-t)).unwrap();
                    assert!((p.conj() - q).norm() <= 1e-13 * p.norm().max(1e-300));
                    worst = worst.max(p.norm() / (1.0 + t).powi(deg));
                }
                assert!(worst.is_finite() && worst < 1e3);
            }
        }
    }

    #[test]
    fn mellin_of_f_examples() {
        let pf = PartialFractionF { t: vec![1.0], u: vec![0.0] };
        let v = mellin_f_closed(&pf, Parity::Even, re(0.0)).unwrap();
        assert_relative_eq!(v.re, g(0.25).powi(2) * inv_sqrt_2pi() / PI.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(v.re, 2.9587, max_relative = 1e-4);
        // the autocorrelation of γ_1 is (1+λ²)^{-1/2} = F of t = [1]; its Mellin
        // transform by quadrature
        let numeric = |z: f64| {
            // 2∫_0^∞ F(λ) λ^{z-1/2} dλ with λ = u², split at 1 and folded by u -> 1/u
            let g = |u: f64| if u == 0.0 { 0.0 } else { 4.0 * (1.0 + u.powi(4)).powf(-0.5) * u.powf(2.0 * z) };
            let head = crate::quad::integrate_interval(g, 0.0, 1.0, 1e-12).unwrap().value;
            let tail = crate::quad::integrate_interval(|w| if w == 0.0 { 0.0 } else { g(1.0 / w) / (w * w) }, 0.0, 1.0, 1e-12)
                .unwrap()
                .value;
            (head + tail) * inv_sqrt_2pi()
        };
        for &z in &[-0.3, 0.0, 0.2, 0.4] {
            let c = mellin_f_closed(&pf, Parity::Even, re(z)).unwrap().re;
            assert_relative_eq!(c, numeric(z), max_relative = 1e-7);
        }
        let pf = PartialFractionF { t: vec![0.0, 0.0], u: vec![0.0, 1.0] };
        let v = mellin_f_closed(&pf, Parity::Odd, re(0.0)).unwrap();
        assert_relative_eq!(v.re, inv_sqrt_2pi() * g(0.75).powi(2) / g(1.5), max_relative = 1e-13);
    }

    #[test]
    fn product_identity() {
        let grid: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64).collect();
        let g1 = GaussPoly::gaussian(1.0).unwrap();
        assert!(verify_product_identity(&g1, Parity::Even, &grid).unwrap() <= 1e-9);
        assert_eq!(verify_product_identity(&g1, Parity::Odd, &grid).unwrap(), 0.0);
        let x1 = GaussPoly::monomial(1, 1.0).unwrap();
        assert!(verify_product_identity(&x1, Parity::Odd, &grid).unwrap() <= 1e-9);
        for f in corpus() {
            let k = f.parity().unwrap();
            let dev = verify_product_identity(&f, k, &grid).unwrap();
            assert!(dev <= 1e-9, "{f:?}: {dev}");
        }
        let mixed = GaussPoly::from_real_terms(&[(vec![1.0], 1.0), (vec![1.0], 2.0)]).unwrap();
        assert!(matches!(
            verify_product_identity(&mixed, Parity::Even, &grid),
            Err(Error::MixedWidth(_))
        ));
        let _ = autocorr_closed(&g1).unwrap();
    }

    #[test]
    fn theta_hat_examples() {
        let g1 = GaussPoly::gaussian(1.0).unwrap();
        assert!(theta_hat_relation(&g1, Parity::Even, im(0.2)).unwrap() <= 1e-10);
        let x1 = GaussPoly::monomial(1, 1.0).unwrap();
        assert!(theta_hat_relation(&x1, Parity::Odd, re(0.0)).unwrap() <= 1e-10);
        let g4 = GaussPoly::gaussian(4.0).unwrap();
        assert!(theta_hat_relation(&g4, Parity::Even, re(0.1)).unwrap() <= 1e-9);
        for f in corpus() {
            let k = f.parity().unwrap();
            for &(x, t) in &[(0.0, 0.0), (0.2, 1.0), (-0.3, 4.0)] {
                let z = ComplexPoint::new(x, t).unwrap();
                let r = theta_hat_relation(&f, k, z).unwrap();
                let scale = theta(&f, k, z).unwrap().norm().max(1.0);
                assert!(r <= 1e-9 * scale, "{f:?} z={x}+{t}i: {r}");
            }
        }
    }

    #[test]
    fn product_polynomial_examples() {
        let grid = default_real_grid(61);
        let fit = theta_product_poly(&GaussPoly::gaussian(1.0).unwrap(), Parity::Even, &grid).unwrap();
        assert_eq!(fit.degree(), 0);
        assert!((fit.poly_coeffs[0].re - 2f64.sqrt() / (2.0 * PI)).abs() <= 1e-10);
        assert!(fit.residual <= 1e-8);
        let fit = theta_product_poly(&GaussPoly::monomial(1, 1.0).unwrap(), Parity::Odd, &grid).unwrap();
        assert_eq!(fit.degree(), 0);
        assert!((fit.poly_coeffs[0].re - 2f64.powf(1.5) / (2.0 * PI)).abs() <= 1e-10);
        // (x² + c) γ_1 gives √2/(2π) ((c + 1/2)² - z²)
        let c = 0.7;
        let fit = theta_product_poly(&GaussPoly::single(vec![c, 0.0, 1.0], 1.0).unwrap(), Parity::Even, &grid).unwrap();
        assert_eq!(fit.degree(), 2);
        let k = 2f64.sqrt() / (2.0 * PI);
        assert!((fit.poly_coeffs[0].re - k * (c + 0.5).powi(2)).abs() < 1e-10);
        assert!(fit.poly_coeffs[1].re.abs() < 1e-10);
        assert!((fit.poly_coeffs[2].re + k).abs() < 1e-10);
        for f in corpus() {
            let k = f.parity().unwrap();
            let fit = theta_product_poly(&f, k, &grid).unwrap();
            assert!(fit.residual <= 1e-8);
            assert_eq!(fit.degree(), f.degree() - k.mellin_index() as usize);
        }
    }
}
