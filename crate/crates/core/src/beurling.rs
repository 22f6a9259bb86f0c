//! The coupled integral `I(λ) = ∬ |f(x) f̂(y)| e^{λ|xy|} dx dy` for
//! polynomial-times-gaussian `f`, its growth exponent as `λ → 1-`, and the
//! polynomially weighted variant that stays finite at `λ = 1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::funcmodel::GaussPoly;
use crate::lsq::polyfit;
use crate::quad::{integrate_quadrant, probe_divergence, CoupledIntegrand, QuadOutcome, LAMBDA_SCAN_CAP};

/// Schedule points used for the exponent fit.
pub const FIT_POINTS: usize = 4;

/// Bisection stops once the bracket is this narrow.
pub const ONSET_RESOLUTION: f64 = 1e-6;

/// `λ_k = 1 - 2^{-k}` for `k = 2..=12`.
pub fn default_schedule() -> Vec<f64> {
    (2..=12).map(|k| 1.0 - 0.5f64.powi(k)).collect()
}

fn check_real(f: &GaussPoly) -> Result<()> {
    if f.is_zero() {
        return Err(Error::Validation("the zero function has no uncertainty integral".into()));
    }
    if !f.is_real() {
        return Err(Error::NotReal);
    }
    Ok(())
}

/// `(|f(x)| + |f(-x)|)(|f̂(y)| + |f̂(-y)|) e^{λxy}` on the first quadrant, whose
/// integral is `I(λ)`.
pub fn uncertainty_integrand(f: &GaussPoly) -> Result<CoupledIntegrand<'static>> {
    check_real(f)?;
    let fh = f.fourier();
    let x_width = f.min_width().expect("nonzero");
    let y_width = fh.min_width().expect("nonzero");
    let f = f.clone();
    CoupledIntegrand::new(
        move |x| f.ln_abs_folded(x),
        move |y| fh.ln_abs_folded(y),
        x_width,
        y_width,
    )
}

/// `I(λ)` for `0 <= λ < 1`.
pub fn uncertainty_integral(f: &GaussPoly, lambda: f64, tol: f64) -> Result<QuadOutcome> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda must lie in [0, 1), got {lambda}")));
    }
    integrate_quadrant(&uncertainty_integrand(f)?, lambda, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub err_estimates: Vec<f64>,
    /// Slope of `ln I` against `-ln(1-λ)` over the last points.
    pub exponent: Option<f64>,
    /// RMS residual of that fit.
    pub residual: Option<f64>,
    /// Onset of divergence, bisected between the last convergent schedule
    /// point and the first divergent one; the scan stops there.
    pub diverged_at: Option<f64>,
}

fn check_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.len() < FIT_POINTS {
        return Err(Error::ScheduleTooShort {
            len: schedule.len(),
            min: FIT_POINTS,
        });
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("schedule must be strictly ascending".into()));
    }
    let (lo, hi) = (schedule[0], schedule[schedule.len() - 1]);
    if !(lo >= 0.0) || !(hi <= LAMBDA_SCAN_CAP) {
        return Err(Error::Domain(format!(
            "schedule must lie in [0, {LAMBDA_SCAN_CAP}], got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Least-squares slope of `ln values` against `-ln(1 - λ)` on the last
/// [`FIT_POINTS`] entries, with its RMS residual.
pub fn growth_exponent(lambdas: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    let n = lambdas.len();
    if n < FIT_POINTS || values.len() != n {
        return Err(Error::ScheduleTooShort {
            len: n.min(values.len()),
            min: FIT_POINTS,
        });
    }
    let xs: Vec<f64> = lambdas[n - FIT_POINTS..].iter().map(|l| -(1.0 - l).ln()).collect();
    let ys: Vec<f64> = values[n - FIT_POINTS..].iter().map(|v| v.ln()).collect();
    let (c, rms) = polyfit(&xs, &ys, None, 1)?;
    Ok((c[1], rms))
}

fn assemble(h: &CoupledIntegrand, schedule: &[f64], outcomes: Vec<Result<QuadOutcome>>) -> Result<ScanResult> {
    let mut res = ScanResult {
        lambdas: Vec::new(),
        values: Vec::new(),
        err_estimates: Vec::new(),
        exponent: None,
        residual: None,
        diverged_at: None,
    };
    for (&lambda, outcome) in schedule.iter().zip(outcomes) {
        match outcome? {
            QuadOutcome::Converged(r) => {
                res.lambdas.push(lambda);
                res.values.push(r.value);
                res.err_estimates.push(r.err_estimate);
            }
            QuadOutcome::Diverged(d) => {
                let lo = res.lambdas.last().copied().unwrap_or(0.0);
                res.diverged_at = Some(bisect_onset(h, lo, d.lambda));
                return Ok(res);
            }
        }
    }
    let (slope, rms) = growth_exponent(&res.lambdas, &res.values)?;
    res.exponent = Some(slope);
    res.residual = Some(rms);
    Ok(res)
}

/// `I(λ)` along the schedule and the fitted blow-up exponent. Schedule
/// points are evaluated in parallel.
pub fn scan_growth(f: &GaussPoly, schedule: &[f64], tol: f64) -> Result<ScanResult> {
    check_schedule(schedule)?;
    let h = uncertainty_integrand(f)?;
    let outcomes = schedule
        .par_iter()
        .map(|&l| integrate_quadrant(&h, l, tol))
        .collect();
    assemble(&h, schedule, outcomes)
}

/// [`scan_growth`] on the calling thread.
pub fn scan_growth_sequential(f: &GaussPoly, schedule: &[f64], tol: f64) -> Result<ScanResult> {
    check_schedule(schedule)?;
    let h = uncertainty_integrand(f)?;
    let outcomes = schedule
        .iter()
        .map(|&l| integrate_quadrant(&h, l, tol))
        .collect();
    assemble(&h, schedule, outcomes)
}

/// `min(1, √(a/b))`: the coupling beyond which `∬ γ_a(x) γ_{1/b}(y) e^{λxy}`
/// diverges.
pub fn mixed_blowup_threshold(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("widths must be positive, got a = {a}, b = {b}")));
    }
    Ok((a / b).sqrt().min(1.0))
}

/// Smallest `λ` in `[0, 1]` at which the quadrant integral of `h` diverges,
/// by bisection on the divergence probe. `None` if it converges up to 1.
pub fn divergence_onset(h: &CoupledIntegrand) -> Option<f64> {
    if probe_divergence(h, 1.0).is_none() {
        return None;
    }
    Some(bisect_onset(h, 0.0, 1.0))
}

/// Divergence onset in `[lo, hi]`, given that `hi` diverges.
fn bisect_onset(h: &CoupledIntegrand, mut lo: f64, mut hi: f64) -> f64 {
    if probe_divergence(h, lo).is_some() {
        return lo;
    }
    while hi - lo > ONSET_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if probe_divergence(h, mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `∬ |f(x) f̂(y)| e^{λ|xy|} (1 + |x| + |y|)^{-N}` for `0 <= λ <= 1`.
pub fn bdj_integral(f: &GaussPoly, n: f64, lambda: f64, tol: f64) -> Result<QuadOutcome> {
    if !(n >= 0.0 && n.is_finite()) {
        return Err(Error::Domain(format!("N must be a nonnegative real, got {n}")));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let h = uncertainty_integrand(f)?;
    let h = if n > 0.0 {
        h.with_weight(move |x, y| -n * (1.0 + x + y).ln())
    } else {
        h
    };
    integrate_quadrant(&h, lambda, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BdjMax {
    pub value: f64,
    /// Maximizing `t = |xy|`.
    pub argmax: f64,
}

/// `max_{t >= 1} e^{(λ-1)t} (2+t)^N`, the largest value of
/// `e^{(λ-1)|xy|}(1+|x|+|y|)^N` with `min(|x|,|y|) >= 1`, which is attained
/// on `|x| = 1` or `|y| = 1`.
pub fn bdj_max_bound(n: f64, lambda: f64) -> Result<BdjMax> {
    if !(n >= 0.0 && n.is_finite()) {
        return Err(Error::Domain(format!("N must be a nonnegative real, got {n}")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    // ln φ is concave, so golden-section search on a bracket holding the
    // stationary point N/(1-λ) - 2 finds the maximum.
    let ln_phi = |t: f64| (lambda - 1.0) * t + n * (2.0 + t).ln();
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (1.0, 2.0 + n / (1.0 - lambda));
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (ln_phi(c), ln_phi(d));
    while hi - lo > 1e-12 * hi {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = ln_phi(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = ln_phi(d);
        }
    }
    let mut t = 0.5 * (lo + hi);
    if ln_phi(1.0) >= ln_phi(t) {
        t = 1.0;
    }
    Ok(BdjMax {
        value: ln_phi(t).exp(),
        argmax: t,
    })
}

/// Growth exponent of [`bdj_max_bound`] along a schedule, fitted like
/// [`scan_growth`]; positive values mean growth `(1-λ)^{-exponent}`.
pub fn bdj_bound_exponent(n: f64, schedule: &[f64]) -> Result<(f64, f64)> {
    let values = schedule
        .iter()
        .map(|&l| bdj_max_bound(n, l).map(|b| b.value))
        .collect::<Result<Vec<_>>>()?;
    growth_exponent(schedule, &values)
}
