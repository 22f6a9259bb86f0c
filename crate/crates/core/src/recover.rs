//! Recovering `f = p γ_a` from samples: the width from the tail decay, the
//! polynomial from a least-squares fit against `x^j γ_a(x)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lsq::{polyfit, solve};
use crate::mellin::ThetaFit;
use crate::specfun::DEFAULT_DEGREE_CAP;

/// Fit residual (relative to the largest sample) accepted during degree
/// selection.
pub const RESIDUAL_THRESHOLD: f64 = 1e-6;

/// Samples below this fraction of the largest one are ignored by the width
/// regression.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Relative residual accepted by [`fit_theta_exponent`].
pub const THETA_RESIDUAL_THRESHOLD: f64 = 1e-8;

const MIN_SAMPLES: usize = 8;

/// Samples on a strictly increasing grid symmetric about 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFn {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl SampledFn {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Validation(format!("{} abscissas but {} values", xs.len(), ys.len())));
        }
        if xs.len() < MIN_SAMPLES {
            return Err(Error::Validation(format!(
                "need at least {MIN_SAMPLES} samples, got {}",
                xs.len()
            )));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::Validation("samples must be finite".into()));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("grid must be strictly increasing".into()));
        }
        let span = xs[xs.len() - 1].abs().max(xs[0].abs());
        let n = xs.len();
        if (0..n).any(|i| (xs[i] + xs[n - 1 - i]).abs() > 1e-12 * span) {
            return Err(Error::Validation("grid must be symmetric about 0".into()));
        }
        Ok(Self { xs, ys })
    }

    /// `f` sampled at `n` evenly spaced points of `[-half_width, half_width]`.
    pub fn from_fn(mut f: impl FnMut(f64) -> f64, half_width: f64, n: usize) -> Result<Self> {
        let step = 2.0 * half_width / (n.max(2) - 1) as f64;
        // positive half first, mirrored so the grid is exactly symmetric
        let pos: Vec<f64> = (0..n / 2).map(|i| half_width - i as f64 * step).collect();
        let mut xs: Vec<f64> = pos.iter().map(|x| -x).collect();
        if n % 2 == 1 {
            xs.push(0.0);
        }
        xs.extend(pos.iter().rev());
        let ys = xs.iter().map(|&x| f(x)).collect();
        Self::new(xs, ys)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    fn max_abs(&self) -> f64 {
        self.ys.iter().fold(0.0_f64, |m, y| m.max(y.abs()))
    }
}

/// Level below which samples are indistinguishable from noise: ten times the
/// largest `|y|` on the outermost 5% of the grid, where a gaussian-decaying
/// function has died out.
fn noise_level(s: &SampledFn, top: f64) -> f64 {
    let reach = s.xs[s.xs.len() - 1];
    let edge = s
        .xs
        .iter()
        .zip(&s.ys)
        .filter(|(x, _)| x.abs() >= 0.95 * reach)
        .fold(0.0_f64, |m, (_, y)| m.max(y.abs()));
    (10.0 * edge).max(NOISE_FLOOR * top)
}

/// Width from regressing `ln|f|` on `(-x²/2, ln|x|, 1)` over the outer third
/// of the samples above the noise level; the `ln|x|` column absorbs the
/// polynomial's leading power.
pub fn fit_gaussian_width(s: &SampledFn) -> Result<f64> {
    let top = s.max_abs();
    if top == 0.0 {
        return Err(Error::DegenerateData("all samples are zero".into()));
    }
    let floor = noise_level(s, top);
    let kept: Vec<(f64, f64)> = s
        .xs
        .iter()
        .zip(&s.ys)
        .filter(|(x, y)| **x != 0.0 && y.abs() > floor)
        .map(|(&x, &y)| (x, y))
        .collect();
    let reach = kept.iter().fold(0.0_f64, |m, (x, _)| m.max(x.abs()));
    let window: Vec<(f64, f64)> = kept.into_iter().filter(|(x, _)| x.abs() >= reach * 2.0 / 3.0).collect();
    if window.len() < 4 {
        return Err(Error::DegenerateData(format!(
            "{} usable samples in the outer window, need 4",
            window.len()
        )));
    }
    let a = DMatrix::from_fn(window.len(), 3, |i, j| {
        let x = window[i].0;
        match j {
            0 => -0.5 * x * x,
            1 => x.abs().ln(),
            _ => 1.0,
        }
    });
    let b = DVector::from_fn(window.len(), |i, _| window[i].1.abs().ln());
    let (c, _) = solve(&a, &b)?;
    if !(c[0] > 0.0) {
        return Err(Error::DegenerateData(format!("samples do not decay like a gaussian (fitted width {})", c[0])));
    }
    Ok(c[0])
}

/// Coefficients of `p` minimizing `Σ (y_i - p(x_i) γ_a(x_i))²` at a fixed
/// degree, and the RMS residual.
fn fit_at_degree(s: &SampledFn, a: f64, degree: usize) -> Result<(Vec<f64>, f64)> {
    let w: Vec<f64> = s.xs.iter().map(|x| (-0.5 * a * x * x).exp()).collect();
    let g: Vec<f64> = s.xs.iter().zip(&s.ys).map(|(x, y)| y * (0.5 * a * x * x).exp()).collect();
    // weights w on g reproduce the residual in f-space; points where the
    // gaussian underflows carry no information
    let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0 && g[i].is_finite()).collect();
    let xs: Vec<f64> = keep.iter().map(|&i| s.xs[i]).collect();
    let gs: Vec<f64> = keep.iter().map(|&i| g[i]).collect();
    let ws: Vec<f64> = keep.iter().map(|&i| w[i]).collect();
    let (c, rms) = polyfit(&xs, &gs, Some(&ws), degree)?;
    Ok((c, rms * (keep.len() as f64 / s.xs.len() as f64).sqrt()))
}

/// Polynomial with `f ≈ p γ_a`, at the smallest degree whose RMS residual is
/// below [`RESIDUAL_THRESHOLD`] times the largest sample.
pub fn recover_polynomial(s: &SampledFn, a: f64) -> Result<Vec<f64>> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("width must be positive, got {a}")));
    }
    let target = RESIDUAL_THRESHOLD * s.max_abs();
    if target == 0.0 {
        return Err(Error::DegenerateData("all samples are zero".into()));
    }
    let max_degree = DEFAULT_DEGREE_CAP.min(s.xs.len() - 2);
    for degree in 0..=max_degree {
        let (c, rms) = fit_at_degree(s, a, degree)?;
        if rms <= target {
            return Ok(c);
        }
    }
    Err(Error::DegenerateData(format!(
        "no polynomial of degree <= {max_degree} fits within {target:e}"
    )))
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Width minimizing the fixed-degree fit residual, searched within a factor
/// `e^{±0.5}` of `a0`.
pub fn refine_width(s: &SampledFn, a0: f64, degree: usize) -> Result<f64> {
    if !(a0 > 0.0 && a0.is_finite()) {
        return Err(Error::Domain(format!("width must be positive, got {a0}")));
    }
    let resid = |ln_a: f64| fit_at_degree(s, ln_a.exp(), degree).map_or(f64::INFINITY, |r| r.1);
    let ln_a = golden_min(resid, a0.ln() - 0.5, a0.ln() + 0.5, 1e-10);
    Ok(ln_a.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recovered {
    pub width: f64,
    pub coeffs: Vec<f64>,
    /// RMS residual of the final fit in sample units.
    pub residual: f64,
}

/// Full pipeline: tail regression for a first width, then for increasing
/// degree a width refinement, stopping at the first degree whose residual
/// passes [`RESIDUAL_THRESHOLD`].
pub fn recover(s: &SampledFn) -> Result<Recovered> {
    let a0 = fit_gaussian_width(s)?;
    let target = RESIDUAL_THRESHOLD * s.max_abs();
    let max_degree = DEFAULT_DEGREE_CAP.min(s.xs.len() - 2);
    for degree in 0..=max_degree {
        let a = refine_width(s, a0, degree)?;
        let (coeffs, residual) = fit_at_degree(s, a, degree)?;
        if residual <= target {
            return Ok(Recovered {
                width: a,
                coeffs,
                residual,
            });
        }
    }
    Err(Error::DegenerateData(format!(
        "no polynomial of degree <= {max_degree} fits within {target:e}"
    )))
}

/// Least-squares polynomial for `Θ(z) e^{-rate z}` at one degree, scored
/// relative to the largest `|Θ|`.
fn theta_fit_at(zs: &[f64], thetas: &[f64], rate: f64, degree: usize, scale: f64) -> Result<(Vec<f64>, f64)> {
    let w: Vec<f64> = zs.iter().map(|z| (rate * z).exp()).collect();
    let g: Vec<f64> = zs.iter().zip(thetas).map(|(z, t)| t * (-rate * z).exp()).collect();
    let (c, rms) = polyfit(zs, &g, Some(&w), degree)?;
    Ok((c, rms / scale))
}

/// `Θ(z) ≈ r(z) e^{rate z}` from real samples.
///
/// A first rate comes from regressing `ln|Θ|` on `(1, z, ln(1+z²))`; then for
/// increasing degree of `r` the rate is refined by minimizing the residual of
/// the polynomial fit, stopping once the residual relative to `max|Θ|` drops
/// below [`THETA_RESIDUAL_THRESHOLD`].
pub fn fit_theta_exponent(values: &[(f64, f64)]) -> Result<ThetaFit> {
    if values.len() < MIN_SAMPLES {
        return Err(Error::DegenerateData(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            values.len()
        )));
    }
    let zs: Vec<f64> = values.iter().map(|v| v.0).collect();
    let thetas: Vec<f64> = values.iter().map(|v| v.1).collect();
    if zs.windows(2).any(|w| w[0] >= w[1]) || zs.iter().chain(&thetas).any(|v| !v.is_finite()) {
        return Err(Error::Validation("sample points must be finite and strictly increasing".into()));
    }
    let scale = thetas.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    let live: Vec<usize> = (0..zs.len()).filter(|&i| thetas[i].abs() > 1e-12 * scale).collect();
    if 2 * live.len() < zs.len() || live.len() < 3 {
        return Err(Error::DegenerateData("Θ vanishes on more than half the samples".into()));
    }
    let a = DMatrix::from_fn(live.len(), 3, |i, j| {
        let z = zs[live[i]];
        match j {
            0 => 1.0,
            1 => z,
            _ => (1.0 + z * z).ln(),
        }
    });
    let b = DVector::from_fn(live.len(), |i, _| thetas[live[i]].abs().ln());
    let (c, _) = solve(&a, &b)?;
    let rate0 = c[1];

    let max_degree = DEFAULT_DEGREE_CAP.min(zs.len() - 2);
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    for degree in 0..=max_degree {
        let resid = |r: f64| theta_fit_at(&zs, &thetas, r, degree, scale).map_or(f64::INFINITY, |x| x.1);
        let rate = golden_min(resid, rate0 - 1.0, rate0 + 1.0, 1e-12);
        let Ok((coeffs, res)) = theta_fit_at(&zs, &thetas, rate, degree, scale) else {
            break;
        };
        if best.as_ref().is_none_or(|b| res < b.2) {
            best = Some((coeffs, rate, res));
        }
        if res <= THETA_RESIDUAL_THRESHOLD {
            break;
        }
    }
    let (coeffs, rate, residual) = best.ok_or_else(|| Error::DegenerateData("no fit".into()))?;
    Ok(ThetaFit {
        poly_coeffs: coeffs.into_iter().map(|c| Complex64::new(c, 0.0)).collect(),
        exp_rate: rate,
        residual,
    })
}

/// Width of `γ_a` whose `Θ⁰` grows at `rate`: `a = 2 e^{-2 rate}`.
pub fn width_from_rate(rate: f64) -> f64 {
    2.0 * (-2.0 * rate).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcmodel::{GaussPoly, Parity};
    use crate::mellin::theta;
    use crate::specfun::ComplexPoint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(f: &GaussPoly, half_width: f64, n: usize) -> SampledFn {
        SampledFn::from_fn(|x| f.eval(x), half_width, n).unwrap()
    }

    #[test]
    fn sampled_fn_invariants() {
        assert!(SampledFn::new(vec![-1.0, 0.0, 1.0], vec![1.0; 3]).is_err());
        let xs: Vec<f64> = (0..9).map(|i| i as f64 - 4.0).collect();
        assert!(SampledFn::new(xs.clone(), vec![1.0; 9]).is_ok());
        assert!(SampledFn::new(xs.iter().map(|x| x + 0.1).collect(), vec![1.0; 9]).is_err());
        let mut bad = xs.clone();
        bad.swap(0, 1);
        assert!(SampledFn::new(bad, vec![1.0; 9]).is_err());
        let s = SampledFn::from_fn(|x| x, 3.0, 257).unwrap();
        assert_eq!(s.xs()[128], 0.0);
        assert_eq!(s.xs()[0], -s.xs()[256]);
    }

    #[test]
    fn width_examples() {
        let s = sample(&GaussPoly::gaussian(1.0).unwrap(), 6.0, 201);
        assert!((fit_gaussian_width(&s).unwrap() - 1.0).abs() < 1e-3);
        let f = GaussPoly::single(vec![1.0, 0.0, 1.0], 2.0).unwrap();
        let s = sample(&f, 8.0 / 2f64.sqrt(), 257);
        let a = fit_gaussian_width(&s).unwrap();
        assert!((a - 2.0).abs() < 1e-2, "a = {a}");
        // independent oracle: two-parameter fit of ln|y| - ln(1+x²) = ln c - a x²/2
        let xs = s.xs();
        let ys = s.ys();
        let (c, _) = polyfit(
            &xs.iter().map(|x| -0.5 * x * x).collect::<Vec<_>>(),
            &ys.iter().zip(xs).map(|(y, x)| y.abs().ln() - (1.0 + x * x).ln()).collect::<Vec<_>>(),
            None,
            1,
        )
        .unwrap();
        assert!((c[1] - a).abs() < 1e-2);
        let zero = SampledFn::new((0..9).map(|i| i as f64 - 4.0).collect(), vec![0.0; 9]).unwrap();
        assert!(matches!(fit_gaussian_width(&zero), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn polynomial_examples() {
        let f = GaussPoly::single(vec![1.0, 0.0, 1.0], 1.0).unwrap();
        let c = recover_polynomial(&sample(&f, 8.0, 257), 1.0).unwrap();
        assert_eq!(c.len(), 3);
        for (got, want) in c.iter().zip([1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-4);
        }
        let c = recover_polynomial(&sample(&GaussPoly::gaussian(1.0).unwrap(), 8.0, 257), 1.0).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0] - 1.0).abs() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x3 = GaussPoly::monomial(3, 1.0).unwrap();
        let s = SampledFn::from_fn(|x| x3.eval(x) + 1e-8 * rng.gen_range(-1.0..1.0), 8.0, 257).unwrap();
        let c = recover_polynomial(&s, 1.0).unwrap();
        assert_eq!(c.len(), 4);
        for (j, (got, want)) in c.iter().zip([0.0, 0.0, 0.0, 1.0]).enumerate() {
            assert!((got - want).abs() < 1e-4, "coefficient {j}: {got}");
        }
    }

    #[test]
    fn round_trip_with_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &a in &[0.5, 1.0, 2.0, 4.0] {
            for deg in 0..=4usize {
                let mut c: Vec<f64> = (0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect();
                c[deg] = 1.0;
                let f = GaussPoly::single(c.clone(), a).unwrap();
                let mut noise = ChaCha8Rng::seed_from_u64(deg as u64 * 31 + a.to_bits() % 97);
                let s = SampledFn::from_fn(|x| f.eval(x) + 1e-8 * noise.gen_range(-1.0..1.0), 8.0 / a.sqrt(), 257).unwrap();
                let r = recover(&s).unwrap();
                assert!((r.width - a).abs() <= 1e-2 * a, "a = {a}, deg {deg}: width {}", r.width);
                assert_eq!(r.coeffs.len(), deg + 1, "a = {a}: {:?}", r.coeffs);
                let lead = r.coeffs[deg];
                for (got, want) in r.coeffs.iter().zip(&c) {
                    assert!((got / lead - want).abs() <= 1e-3 * want.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn parity_is_preserved() {
        let f = GaussPoly::single(vec![0.0, 2.0, 0.0, -1.0], 1.5).unwrap();
        let r = recover(&sample(&f, 8.0 / 1.5f64.sqrt(), 257)).unwrap();
        assert!(r.coeffs[0].abs() < 1e-6 && r.coeffs[2].abs() < 1e-6, "{:?}", r.coeffs);
    }

    fn theta_samples(f: &GaussPoly, k: Parity) -> Vec<(f64, f64)> {
        crate::mellin::default_real_grid(61)
            .into_iter()
            .map(|z| (z, theta(f, k, ComplexPoint::real(z).unwrap()).unwrap().re))
            .collect()
    }

    #[test]
    fn theta_exponent_examples() {
        let fit = fit_theta_exponent(&theta_samples(&GaussPoly::gaussian(1.0).unwrap(), Parity::Even)).unwrap();
        assert!((fit.exp_rate - 2f64.ln() / 2.0).abs() < 1e-6);
        assert_eq!(fit.degree(), 0);
        let fit = fit_theta_exponent(&theta_samples(&GaussPoly::monomial(1, 1.0).unwrap(), Parity::Odd)).unwrap();
        assert!((fit.exp_rate - 2f64.ln() / 2.0).abs() < 1e-6);
        assert_eq!(fit.degree(), 0);
        let fit = fit_theta_exponent(&theta_samples(&GaussPoly::gaussian(4.0).unwrap(), Parity::Even)).unwrap();
        assert!((fit.exp_rate + 2f64.ln() / 2.0).abs() < 1e-6);
        for &a in &[0.5, 1.0, 2.0, 4.0] {
            let fit = fit_theta_exponent(&theta_samples(&GaussPoly::gaussian(a).unwrap(), Parity::Even)).unwrap();
            assert!((fit.exp_rate + (a / 2.0).ln() / 2.0).abs() < 1e-6);
            assert!((width_from_rate(fit.exp_rate) - a).abs() < 1e-3 * a);
        }
        let f = GaussPoly::single(vec![0.3, 0.0, 1.0], 1.3).unwrap();
        let fit = fit_theta_exponent(&theta_samples(&f, Parity::Even)).unwrap();
        assert_eq!(fit.degree(), 1);
        assert!((fit.exp_rate + (1.3f64 / 2.0).ln() / 2.0).abs() < 1e-6);
        assert!(fit_theta_exponent(&[(0.0, 1.0); 3]).is_err());
    }
}
