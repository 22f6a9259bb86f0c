//! Adaptive Gauss–Kronrod integration on intervals, the line and the first
//! quadrant.
//!
//! The quadrant integrator targets kernels `w(x) v(y) e^{λxy}` whose mass
//! concentrates on a ridge as the coupling approaches the envelope limit.
//! Integrands are passed as logarithms so that the divergence probe can look
//! far past the range where the linear values underflow or overflow.

use std::cell::{Cell, RefCell};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, LN_2, PI};
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::specfun::erfc;

/// Refinement budget per one-dimensional adaptive call.
pub const DEFAULT_MAX_EVALUATIONS: usize = 1_000_000;

/// Largest coupling accepted by growth scans, `1 - 2^{-12}`.
pub const LAMBDA_SCAN_CAP: f64 = 1.0 - 1.0 / 4096.0;

/// Normalized coupling at which the quadrant integrator rotates onto the ridge.
pub const ROTATION_THRESHOLD: f64 = 0.9;

// QUADPACK qk21 abscissae and weights.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_478_322,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Outcome of a converged integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub err_estimate: f64,
    pub evaluations: usize,
}

/// Growth detected along the truncation boundary: the integral is infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    pub lambda: f64,
    /// Truncation radius from which the growth was observed.
    pub witness_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadOutcome {
    Converged(QuadResult),
    Diverged(Divergence),
}

impl QuadOutcome {
    pub fn converged(&self) -> Option<&QuadResult> {
        match self {
            QuadOutcome::Converged(r) => Some(r),
            QuadOutcome::Diverged(_) => None,
        }
    }

    pub fn divergence(&self) -> Option<&Divergence> {
        match self {
            QuadOutcome::Converged(_) => None,
            QuadOutcome::Diverged(d) => Some(d),
        }
    }

    pub fn value(&self) -> Option<f64> {
        self.converged().map(|r| r.value)
    }
}

pub(crate) trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment<V> {
    a: f64,
    b: f64,
    value: V,
    err: f64,
}

impl<V> PartialEq for Segment<V> {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl<V> Eq for Segment<V> {}
impl<V> PartialOrd for Segment<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Segment<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn gk21<V: QuadValue, F: FnMut(f64) -> V>(f: &mut F, a: f64, b: f64) -> Segment<V> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut kronrod = f_center * WGK[10];
    let mut gauss = V::zero();
    let mut resabs = WGK[10] * f_center.magnitude();
    let mut fv1 = [V::zero(); 10];
    let mut fv2 = [V::zero(); 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod = kronrod + (f1 + f2) * WGK[j];
        resabs += WGK[j] * (f1.magnitude() + f2.magnitude());
        if j % 2 == 1 {
            gauss = gauss + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = kronrod * 0.5;
    let mut resasc = WGK[10] * (f_center - mean).magnitude();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).magnitude() + (fv2[j] - mean).magnitude());
    }
    let abs_half = half.abs();
    let value = kronrod * half;
    let resabs = resabs * abs_half;
    let resasc = resasc * abs_half;
    let mut err = ((kronrod - gauss) * half).magnitude();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Segment {
        a,
        b,
        value,
        err,
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Adaptive<V> {
    pub value: V,
    pub err: f64,
    pub evaluations: usize,
}

/// Global adaptive bisection starting from the partition `breaks`.
///
/// Stops once the summed error is below `max(abs_tol, rel_tol * |I|)`.
pub(crate) fn adaptive<V: QuadValue, F: FnMut(f64) -> V>(
    f: &mut F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    budget: usize,
) -> Result<Adaptive<V>> {
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Segment<V>> = Vec::new();
    let mut evaluations = 0;
    let mut total = V::zero();
    let mut total_err = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let s = gk21(f, w[0], w[1]);
            evaluations += 21;
            total = total + s.value;
            total_err += s.err;
            heap.push(s);
        }
    }
    loop {
        let target = abs_tol.max(rel_tol * total.magnitude());
        if total_err <= target {
            break;
        }
        let Some(worst) = heap.pop() else {
            return Err(Error::ToleranceNotMet {
                achieved: total_err,
                target,
                evaluations,
            });
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) < 1e-13 * worst.a.abs().max(worst.b.abs()) {
            frozen.push(worst);
            continue;
        }
        if evaluations + 42 > budget {
            return Err(Error::ToleranceNotMet {
                achieved: total_err,
                target,
                evaluations,
            });
        }
        let left = gk21(f, worst.a, mid);
        let right = gk21(f, mid, worst.b);
        evaluations += 42;
        total = total - worst.value + left.value + right.value;
        total_err += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
    }
    // resum to drop accumulated cancellation in the running totals
    let mut value = V::zero();
    let mut err = 0.0;
    for s in heap.iter().chain(frozen.iter()) {
        value = value + s.value;
        err += s.err;
    }
    Ok(Adaptive {
        value,
        err,
        evaluations,
    })
}

/// Adaptive integral of `f` over `[a, b]` to relative tolerance `tol`.
pub fn integrate_interval<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    check_tol(tol)?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("interval endpoints must be finite".into()));
    }
    let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut g = |x: f64| f(x);
    let r = adaptive(&mut g, &[lo, hi], 0.0, tol, DEFAULT_MAX_EVALUATIONS)?;
    Ok(QuadResult {
        value: sign * r.value,
        err_estimate: r.err,
        evaluations: r.evaluations,
    })
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("tolerance must be positive, got {tol}")))
    }
}

/// Declared decay beyond the scale hint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay {
    /// `|g(x)|` falls at least like `e^{-width x²/2}` times slowly varying factors.
    Gaussian { width: f64 },
    /// `|g(x)|` falls at least like `e^{-rate |x|}`.
    Exponential { rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineHint {
    /// Length scale beyond which the declared decay holds.
    pub scale: f64,
    pub decay: Decay,
}

impl LineHint {
    pub fn gaussian(width: f64) -> Self {
        Self {
            scale: 1.0 / width.sqrt(),
            decay: Decay::Gaussian { width },
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.scale > 0.0
            && self.scale.is_finite()
            && match self.decay {
                Decay::Gaussian { width } => width > 0.0 && width.is_finite(),
                Decay::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid line hint {self:?}")))
        }
    }

    /// Bound on `∫_R^∞ |g|` given `|g(R)|`.
    fn tail_factor(&self, r: f64) -> f64 {
        match self.decay {
            Decay::Gaussian { width } => {
                // half the declared width absorbs polynomial and e^{c|x|} factors
                let a = 0.5 * width;
                let z = r * (a / 2.0).sqrt();
                (PI / (2.0 * a)).sqrt() * scaled_erfc(z)
            }
            Decay::Exponential { rate } => 2.0 / rate,
        }
    }
}

/// `e^{z²} erfc(z)` for `z >= 0`.
fn scaled_erfc(z: f64) -> f64 {
    if z < 25.0 {
        (z * z).exp() * erfc(z)
    } else {
        let inv = 1.0 / (z * z);
        (1.0 - 0.5 * inv + 0.75 * inv * inv) / (z * PI.sqrt())
    }
}

fn geometric_breaks(first: f64, limit: f64, out: &mut Vec<f64>) {
    let mut p = first;
    while p < limit {
        out.push(p);
        p *= 2.0;
    }
}

fn sorted_breaks(mut pts: Vec<f64>) -> Vec<f64> {
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Find a truncation radius whose tail bound falls below `tol/10` of the mass.
fn line_truncation<V: QuadValue, F: FnMut(f64) -> V>(
    g: &mut F,
    hint: &LineHint,
    tol: f64,
    two_sided: bool,
) -> Result<(f64, f64, f64)> {
    let mut r = 4.0 * hint.scale;
    for _ in 0..80 {
        // coarse mass estimate by the trapezoid rule
        let n = 400;
        let lo = if two_sided { -r } else { 0.0 };
        let h = (r - lo) / n as f64;
        let mass: f64 = (1..n).map(|i| g(lo + i as f64 * h).magnitude()).sum::<f64>() * h;
        let edge = g(r).magnitude() + if two_sided { g(-r).magnitude() } else { 0.0 };
        let beyond = g(1.25 * r).magnitude() + if two_sided { g(-1.25 * r).magnitude() } else { 0.0 };
        let tail = edge * hint.tail_factor(r);
        if beyond <= edge && tail <= 0.1 * tol * mass {
            return Ok((r, tail, mass));
        }
        if mass == 0.0 && edge == 0.0 && beyond == 0.0 {
            return Ok((r, 0.0, 0.0));
        }
        r *= 1.5;
    }
    Err(Error::ToleranceNotMet {
        achieved: f64::INFINITY,
        target: tol,
        evaluations: 0,
    })
}

fn line_generic<V: QuadValue, F: FnMut(f64) -> V>(
    g: &mut F,
    tol: f64,
    hint: LineHint,
    two_sided: bool,
) -> Result<(V, f64, usize)> {
    check_tol(tol)?;
    hint.validate()?;
    let (r, tail, mass) = line_truncation(g, &hint, tol, two_sided)?;
    let mut pts = vec![0.0, r];
    geometric_breaks(hint.scale / 256.0, r, &mut pts);
    if two_sided {
        let neg: Vec<f64> = pts.iter().map(|p| -p).collect();
        pts.extend(neg);
    }
    let pts = sorted_breaks(pts);
    let res = adaptive(g, &pts, 0.1 * tol * mass, 0.9 * tol, DEFAULT_MAX_EVALUATIONS)?;
    Ok((res.value, res.err + tail, res.evaluations))
}

/// `∫_ℝ g` with erf-bounded tail truncation; `tol` is relative to `∫|g|`.
pub fn integrate_line<F: Fn(f64) -> f64>(g: F, tol: f64, hint: LineHint) -> Result<QuadResult> {
    let mut h = |x: f64| g(x);
    let (value, err_estimate, evaluations) = line_generic(&mut h, tol, hint, true)?;
    Ok(QuadResult {
        value,
        err_estimate,
        evaluations,
    })
}

/// `∫_0^∞ g` for a complex integrand, same truncation rule as [`integrate_line`].
pub fn integrate_half_line_complex<F: Fn(f64) -> Complex64>(
    g: F,
    tol: f64,
    hint: LineHint,
) -> Result<(Complex64, f64)> {
    let mut h = |x: f64| g(x);
    let (value, err, _) = line_generic(&mut h, tol, hint, false)?;
    Ok((value, err))
}

type LnFn<'a> = Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>;
type LnFn2<'a> = Box<dyn Fn(f64, f64) -> f64 + Send + Sync + 'a>;

/// Nonnegative quadrant integrand `w(x) v(y) ρ(x, y) e^{λxy}` given through
/// logarithms, with gaussian envelope widths for `w` and `v`.
pub struct CoupledIntegrand<'a> {
    ln_w: LnFn<'a>,
    ln_v: LnFn<'a>,
    ln_weight: Option<LnFn2<'a>>,
    x_width: f64,
    y_width: f64,
}

impl<'a> CoupledIntegrand<'a> {
    pub fn new(
        ln_w: impl Fn(f64) -> f64 + Send + Sync + 'a,
        ln_v: impl Fn(f64) -> f64 + Send + Sync + 'a,
        x_width: f64,
        y_width: f64,
    ) -> Result<Self> {
        for w in [x_width, y_width] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Domain(format!("envelope widths must be positive, got {w}")));
            }
        }
        Ok(Self {
            ln_w: Box::new(ln_w),
            ln_v: Box::new(ln_v),
            ln_weight: None,
            x_width,
            y_width,
        })
    }

    /// Separable gaussians `e^{-a x²/2} e^{-b y²/2}`.
    pub fn gaussians(a: f64, b: f64) -> Result<Self> {
        Self::new(move |x| -0.5 * a * x * x, move |y| -0.5 * b * y * y, a, b)
    }

    /// Multiply by `e^{ln_weight(x, y)}`; the weight must not grow faster than
    /// a polynomial.
    pub fn with_weight(mut self, ln_weight: impl Fn(f64, f64) -> f64 + Send + Sync + 'a) -> Self {
        self.ln_weight = Some(Box::new(ln_weight));
        self
    }

    pub fn x_width(&self) -> f64 {
        self.x_width
    }

    pub fn y_width(&self) -> f64 {
        self.y_width
    }

    pub fn ln_value(&self, x: f64, y: f64, lambda: f64) -> f64 {
        let mut l = (self.ln_w)(x) + (self.ln_v)(y) + lambda * x * y;
        if let Some(wt) = &self.ln_weight {
            l += wt(x, y);
        }
        if l.is_nan() {
            f64::NEG_INFINITY
        } else {
            l
        }
    }

    pub fn value(&self, x: f64, y: f64, lambda: f64) -> f64 {
        self.ln_value(x, y, lambda).exp()
    }

    /// Coordinates rescaled by `x = s x'`, `y = y'/s` so both envelopes share
    /// width `√(ab)`; `xy` and the area element are unchanged.
    fn balance(&self) -> (f64, f64) {
        let s = (self.y_width / self.x_width).powf(0.25);
        (s, (self.x_width * self.y_width).sqrt())
    }
}

// Radii up to r0 * 2^24: beyond that the cancellation in -x²/2 - y²/2 + λxy
// swamps the log-integrand.
const PROBE_STEPS: usize = 96;
const PROBE_ANGLES: usize = 64;

/// Log-maximum of the integrand on arcs of geometrically growing radius.
struct Probe {
    radii: Vec<f64>,
    ln_max: Vec<f64>,
}

impl Probe {
    fn run(h: &CoupledIntegrand, lambda: f64) -> Self {
        let (s, c) = h.balance();
        let ln_at = |r: f64, th: f64| h.ln_value(s * r * th.cos(), r * th.sin() / s, lambda);
        let r0 = 0.25 / c.sqrt();
        let mut radii = Vec::with_capacity(PROBE_STEPS + 1);
        let mut ln_max = Vec::with_capacity(PROBE_STEPS + 1);
        for k in 0..=PROBE_STEPS {
            let r = r0 * 2f64.powf(k as f64 / 4.0);
            let mut best = f64::NEG_INFINITY;
            let mut best_j = 0;
            for j in 0..=PROBE_ANGLES {
                let v = ln_at(r, FRAC_PI_2 * j as f64 / PROBE_ANGLES as f64);
                if v > best {
                    best = v;
                    best_j = j;
                }
            }
            // golden-section refinement around the best sample
            let step = FRAC_PI_2 / PROBE_ANGLES as f64;
            let mut lo = (best_j as f64 - 1.0).max(0.0) * step;
            let mut hi = (best_j as f64 + 1.0).min(PROBE_ANGLES as f64) * step;
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..40 {
                let m1 = hi - phi * (hi - lo);
                let m2 = lo + phi * (hi - lo);
                if ln_at(r, m1) > ln_at(r, m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            best = best.max(ln_at(r, 0.5 * (lo + hi)));
            radii.push(r);
            ln_max.push(best);
        }
        Self { radii, ln_max }
    }

    /// Growth across three doublings at the far end of the probe.
    fn growth_witness(&self) -> Option<f64> {
        let g = &self.ln_max;
        let k = g.len() - 1;
        let rising = g[k - 12] < g[k - 8] && g[k - 8] < g[k - 4] && g[k - 4] < g[k];
        if !rising {
            return None;
        }
        let mut start = k - 4;
        while start >= 4 && g[start - 4] < g[start] {
            start -= 4;
        }
        Some(self.radii[start])
    }

    /// Power-law decay exponent per unit `ln r` at the far end.
    fn far_decay_exponent(&self) -> f64 {
        let g = &self.ln_max;
        let k = g.len() - 1;
        (g[k - 4] - g[k]) / LN_2
    }
}

/// Divergence test alone, without integrating.
pub fn probe_divergence(h: &CoupledIntegrand, lambda: f64) -> Option<Divergence> {
    let probe = Probe::run(h, lambda);
    classify(h, lambda, &probe).err()
}

enum Region {
    /// Gaussian decay in every direction; truncate on a finite radius.
    Bounded,
    /// Flat ridge with integrable power-law decay along it.
    Unbounded,
}

fn classify(h: &CoupledIntegrand, lambda: f64, probe: &Probe) -> std::result::Result<Region, Divergence> {
    let (_, c) = h.balance();
    let coupling = lambda / c;
    if probe.ln_max.iter().all(|&g| g == f64::NEG_INFINITY) {
        return Ok(Region::Bounded);
    }
    if let Some(witness_scale) = probe.growth_witness() {
        return Err(Divergence {
            lambda,
            witness_scale,
        });
    }
    if coupling >= 1.0 - 1e-12 {
        // flat ridge: mass along it behaves like ∫ u^{-p} du
        let k = probe.radii.len() - 1;
        if probe.far_decay_exponent() <= 1.0 {
            return Err(Divergence {
                lambda,
                witness_scale: probe.radii[k - 4],
            });
        }
        return Ok(Region::Unbounded);
    }
    Ok(Region::Bounded)
}

fn truncation_radius(probe: &Probe, tol: f64) -> (f64, f64) {
    let g = &probe.ln_max;
    let (arg, peak) = g
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let cutoff = peak + tol.ln() - 9.0;
    let mut k = g.len() - 1;
    while k > arg + 1 && g[k - 1] < cutoff {
        k -= 1;
    }
    (probe.radii[k], g[k])
}

/// Inner integral carried through the outer rule together with its error
/// estimate, so the accumulated inner error is itself integrated.
#[derive(Debug, Clone, Copy, Default)]
struct Carried {
    value: f64,
    err: f64,
}

impl Add for Carried {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Carried {
            value: self.value + o.value,
            err: self.err + o.err,
        }
    }
}

impl Sub for Carried {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Carried {
            value: self.value - o.value,
            err: self.err - o.err,
        }
    }
}

impl Mul<f64> for Carried {
    type Output = Self;
    fn mul(self, w: f64) -> Self {
        Carried {
            value: self.value * w,
            err: self.err * w,
        }
    }
}

impl QuadValue for Carried {
    fn zero() -> Self {
        Carried::default()
    }
    fn magnitude(self) -> f64 {
        self.value.abs()
    }
}

/// `∫_0^∞ ∫_0^∞ h(x, y) dx dy` to relative tolerance `tol`, or the divergence
/// witness when the integrand grows along the truncation boundary.
///
/// At normalized coupling `λ/√(ab) >= 0.9` the integral is taken in rotated
/// coordinates `u = (x+y)/√2`, `v = (x-y)/√2`, after balancing the envelope
/// widths, so the ridge runs along the `u` axis. At full coupling the ridge
/// is integrated out to the probe radius and the remainder is added from the
/// measured power-law decay.
pub fn integrate_quadrant(h: &CoupledIntegrand, lambda: f64, tol: f64) -> Result<QuadOutcome> {
    check_tol(tol)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("coupling must be a finite nonnegative real, got {lambda}")));
    }
    let probe = Probe::run(h, lambda);
    let region = match classify(h, lambda, &probe) {
        Ok(r) => r,
        Err(d) => return Ok(QuadOutcome::Diverged(d)),
    };
    let (radius, tail_ln) = truncation_radius(&probe, tol);
    let probe_limit = *probe.radii.last().expect("probe has radii");

    let (s, c) = h.balance();
    let coupling = lambda / c;
    let f = |xb: f64, yb: f64| h.value(s * xb, yb / s, lambda);
    let sigma = 1.0 / c.sqrt();

    let inner_rel = 0.1 * tol;
    let peak = Cell::new(0.0_f64);
    let inner_evals = Cell::new(0_usize);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    // Absolute inner tolerance shrinks like (scale/r)^2 so the integrated
    // inner error stays finite on long ridges.
    let run_inner = |g: &mut dyn FnMut(f64) -> f64, breaks: &[f64], damping: f64| -> Carried {
        if failure.borrow().is_some() {
            return Carried::default();
        }
        let mut gg = |t: f64| g(t);
        let abs_tol = inner_rel * peak.get() * damping;
        match adaptive(&mut gg, breaks, abs_tol, inner_rel, DEFAULT_MAX_EVALUATIONS) {
            Ok(r) => {
                inner_evals.set(inner_evals.get() + r.evaluations);
                peak.set(peak.get().max(r.value));
                Carried {
                    value: r.value,
                    err: r.err,
                }
            }
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                Carried::default()
            }
        }
    };

    let outer_rel = 0.5 * tol;
    let (value, err, evaluations) = if coupling >= ROTATION_THRESHOLD {
        let sigma_v = 1.0 / (c + lambda).sqrt();
        let sqrt_half = std::f64::consts::FRAC_1_SQRT_2;
        let (ridge, limit) = match region {
            Region::Bounded => (1.0 / (c - lambda).sqrt(), radius),
            Region::Unbounded => (4.0 * sigma, probe_limit),
        };
        let inner_at = |u: f64| -> Carried {
            let v_max = u.min(limit);
            if v_max <= 0.0 {
                return Carried::default();
            }
            let mut pts = vec![-v_max, 0.0, v_max];
            let mut p = sigma_v / 8.0;
            while p < v_max {
                pts.push(p);
                pts.push(-p);
                p *= 2.0;
            }
            let pts = sorted_breaks(pts);
            let mut g = |v: f64| f((u + v) * sqrt_half, (u - v) * sqrt_half);
            run_inner(&mut g, &pts, (ridge / u).powi(2).min(1.0))
        };
        let mut pts = vec![0.0, limit];
        geometric_breaks(sigma / 4.0, limit, &mut pts);
        geometric_breaks(ridge / 4.0, limit, &mut pts);
        let pts = sorted_breaks(pts);
        let mut g = |u: f64| inner_at(u);
        let r = adaptive(&mut g, &pts, 0.0, outer_rel, DEFAULT_MAX_EVALUATIONS)?;
        match region {
            Region::Bounded => {
                let tail = tail_ln.exp() * radius * (radius + ridge) * FRAC_PI_2;
                (r.value.value, r.err + r.value.err + tail, r.evaluations)
            }
            Region::Unbounded => {
                // ∫_U^∞ C u^{-p} du with C U^{-p} the inner integral at U
                let edge = inner_at(limit).value;
                let tail = edge * limit / (probe.far_decay_exponent() - 1.0);
                (r.value.value + tail, r.err + r.value.err + tail, r.evaluations)
            }
        }
    } else {
        let mut pts = vec![0.0, radius];
        geometric_breaks(sigma / 4.0, radius, &mut pts);
        let pts = sorted_breaks(pts);
        let inner_pts = pts.clone();
        let mut g = |xb: f64| {
            let mut gy = |yb: f64| f(xb, yb);
            run_inner(&mut gy, &inner_pts, (sigma / xb).powi(2).min(1.0))
        };
        let r = adaptive(&mut g, &pts, 0.0, outer_rel, DEFAULT_MAX_EVALUATIONS)?;
        let tail = tail_ln.exp() * radius * radius * FRAC_PI_2;
        (r.value.value, r.err + r.value.err + tail, r.evaluations)
    };
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(QuadOutcome::Converged(QuadResult {
        value,
        err_estimate: err,
        evaluations: evaluations + inner_evals.get(),
    }))
}
