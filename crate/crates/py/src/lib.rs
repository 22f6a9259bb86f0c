use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use kit::beurling;
use kit::cli::{self, Command, RunConfig};
use kit::funcmodel::{self, Parity};
use kit::mellin as mel;
use kit::quad::CoupledIntegrand;
use kit::recover::{self as rec, SampledFn};
use kit::specfun::{self, ComplexPoint};

create_exception!(uncertainty_kit, UncertaintyKitError, PyValueError);

fn err(e: kit::Error) -> PyErr {
    UncertaintyKitError::new_err((e.kind(), e.to_string()))
}

fn parity(k: u8) -> PyResult<Parity> {
    match k {
        0 => Ok(Parity::Even),
        1 => Ok(Parity::Odd),
        _ => Err(PyValueError::new_err(format!("k must be 0 or 1, got {k}"))),
    }
}

fn point(z: Complex64) -> PyResult<ComplexPoint> {
    ComplexPoint::new(z.re, z.im).map_err(err)
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn serialize<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &value)
}

/// Sum of polynomial-times-gaussian terms.
#[pyclass(name = "GaussPoly", frozen, skip_from_py_object)]
struct PyGaussPoly {
    inner: kit::GaussPoly,
}

#[pymethods]
impl PyGaussPoly {
    /// `terms` is a list of `(coeffs, width)` with `coeffs[j]` the coefficient of `x^j`.
    #[new]
    fn new(terms: Vec<(Vec<f64>, f64)>) -> PyResult<Self> {
        let inner = kit::GaussPoly::from_real_terms(&terms).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn gaussian(width: f64) -> PyResult<Self> {
        let inner = kit::GaussPoly::gaussian(width).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn monomial(m: usize, width: f64) -> PyResult<Self> {
        let inner = kit::GaussPoly::monomial(m, width).map_err(err)?;
        Ok(Self { inner })
    }

    fn __call__(&self, x: f64) -> Complex64 {
        self.inner.eval_complex(x)
    }

    fn eval(&self, x: f64) -> f64 {
        self.inner.eval(x)
    }

    /// List of `(coeffs, width)`; coefficients are complex.
    fn terms(&self) -> Vec<(Vec<Complex64>, f64)> {
        self.inner
            .terms()
            .iter()
            .map(|t| (t.coeffs().to_vec(), t.width()))
            .collect()
    }

    fn widths(&self) -> Vec<f64> {
        self.inner.widths()
    }

    fn degree(&self) -> usize {
        self.inner.degree()
    }

    fn is_real(&self) -> bool {
        self.inner.is_real()
    }

    /// `0` for even, `1` for odd, `None` for mixed parity.
    fn parity(&self) -> Option<u8> {
        self.inner.parity().map(Parity::mellin_index)
    }

    fn fourier(&self) -> Self {
        Self {
            inner: self.inner.fourier(),
        }
    }

    fn parity_parts(&self) -> (Self, Self) {
        let (e, o) = self.inner.parity_parts();
        (Self { inner: e }, Self { inner: o })
    }

    fn dilate(&self, s: f64) -> PyResult<Self> {
        let inner = self.inner.dilate(s).map_err(err)?;
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        let parts: Vec<String> = self
            .inner
            .terms()
            .iter()
            .map(|t| match t.real_coeffs() {
                Some(c) => format!("({c:?}, {:?})", t.width()),
                None => format!("({:?}, {:?})", t.coeffs(), t.width()),
            })
            .collect();
        format!("GaussPoly([{}])", parts.join(", "))
    }
}

#[pyfunction]
fn gamma(z: Complex64) -> PyResult<Complex64> {
    specfun::gamma(z).map_err(err)
}

#[pyfunction]
fn ln_gamma(z: Complex64) -> PyResult<Complex64> {
    specfun::ln_gamma(z).map_err(err)
}

#[pyfunction]
fn hermite_coeffs(n: usize) -> PyResult<Vec<f64>> {
    specfun::hermite_coeffs(n).map_err(err)
}

#[pyfunction]
fn exp_moment(f: &PyGaussPoly, eps: f64) -> PyResult<f64> {
    funcmodel::exp_moment(&f.inner, eps).map_err(err)
}

/// `F(λ)`.
#[pyfunction]
fn autocorr(f: &PyGaussPoly, lam: f64) -> PyResult<f64> {
    funcmodel::autocorr_eval(&f.inner, lam).map_err(err)
}

/// Partial-fraction coefficients `(t, u)` of `F`.
#[pyfunction]
fn autocorr_closed(f: &PyGaussPoly) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let pf = funcmodel::autocorr_closed(&f.inner).map_err(err)?;
    Ok((pf.t, pf.u))
}

#[pyfunction]
fn reflection_residual(f: &PyGaussPoly, lam: f64) -> PyResult<f64> {
    funcmodel::reflection_residual(&f.inner, lam).map_err(err)
}

/// `I(λ)`, or `None` when the integral diverges.
#[pyfunction]
#[pyo3(signature = (f, lam, tol = 1e-8))]
fn uncertainty_integral(py: Python<'_>, f: &PyGaussPoly, lam: f64, tol: f64) -> PyResult<Option<f64>> {
    let out = py.detach(|| beurling::uncertainty_integral(&f.inner, lam, tol)).map_err(err)?;
    Ok(out.value())
}

#[pyfunction]
#[pyo3(signature = (f, schedule = None, tol = 1e-8))]
fn scan_growth<'py>(
    py: Python<'py>,
    f: &PyGaussPoly,
    schedule: Option<Vec<f64>>,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let schedule = schedule.unwrap_or_else(beurling::default_schedule);
    let r = py.detach(|| beurling::scan_growth(&f.inner, &schedule, tol)).map_err(err)?;
    serialize(py, &r)
}

/// Divergence onset of `∬ e^{-a x²/2} e^{-b y²/2} e^{λxy}` over the quadrant.
#[pyfunction]
fn gaussian_divergence_onset(py: Python<'_>, a: f64, b: f64) -> PyResult<Option<f64>> {
    let h = CoupledIntegrand::gaussians(a, b).map_err(err)?;
    Ok(py.detach(|| beurling::divergence_onset(&h)))
}

#[pyfunction]
#[pyo3(signature = (f, n, lam, tol = 1e-8))]
fn bdj_integral(py: Python<'_>, f: &PyGaussPoly, n: f64, lam: f64, tol: f64) -> PyResult<Option<f64>> {
    let out = py.detach(|| beurling::bdj_integral(&f.inner, n, lam, tol)).map_err(err)?;
    Ok(out.value())
}

/// `(value, argmax)`.
#[pyfunction]
fn bdj_max_bound(n: f64, lam: f64) -> PyResult<(f64, f64)> {
    let b = beurling::bdj_max_bound(n, lam).map_err(err)?;
    Ok((b.value, b.argmax))
}

#[pyfunction]
fn mellin(f: &PyGaussPoly, k: u8, z: Complex64) -> PyResult<Complex64> {
    mel::mellin_gausspoly_closed(&f.inner, parity(k)?, point(z)?).map_err(err)
}

#[pyfunction]
fn mellin_numeric(f: &PyGaussPoly, k: u8, z: Complex64) -> PyResult<Complex64> {
    mel::mellin_numeric(&f.inner, parity(k)?, point(z)?).map_err(err)
}

#[pyfunction]
fn theta(f: &PyGaussPoly, k: u8, z: Complex64) -> PyResult<Complex64> {
    mel::theta(&f.inner, parity(k)?, point(z)?).map_err(err)
}

#[pyfunction]
fn verify_product_identity(f: &PyGaussPoly, k: u8, t_grid: Vec<f64>) -> PyResult<f64> {
    mel::verify_product_identity(&f.inner, parity(k)?, &t_grid).map_err(err)
}

#[pyfunction]
fn theta_hat_relation(f: &PyGaussPoly, k: u8, z: Complex64) -> PyResult<f64> {
    mel::theta_hat_relation(&f.inner, parity(k)?, point(z)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (f, k, z_grid = None))]
fn theta_product_poly<'py>(
    py: Python<'py>,
    f: &PyGaussPoly,
    k: u8,
    z_grid: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let grid = z_grid.unwrap_or_else(|| mel::default_real_grid(61));
    let fit = mel::theta_product_poly(&f.inner, parity(k)?, &grid).map_err(err)?;
    serialize(py, &fit)
}

/// Width and polynomial from symmetric samples.
#[pyfunction]
fn recover<'py>(py: Python<'py>, xs: Vec<f64>, ys: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let s = SampledFn::new(xs, ys).map_err(err)?;
    let r = py.detach(|| rec::recover(&s)).map_err(err)?;
    serialize(py, &r)
}

/// `Θ(z) ≈ r(z) e^{rate z}` from `(z, Θ(z))` pairs on the real axis.
#[pyfunction]
fn fit_theta_exponent<'py>(py: Python<'py>, values: Vec<(f64, f64)>) -> PyResult<Bound<'py, PyAny>> {
    let fit = rec::fit_theta_exponent(&values).map_err(err)?;
    serialize(py, &fit)
}

#[pyfunction]
fn width_from_rate(rate: f64) -> f64 {
    rec::width_from_rate(rate)
}

/// Run a command-line report (`scan`, `verify`, `mellin`, `recover`) on an
/// input file and return it as a dict.
#[pyfunction]
#[pyo3(signature = (command, path, tol = None, schedule = None))]
fn run_report<'py>(
    py: Python<'py>,
    command: &str,
    path: &str,
    tol: Option<f64>,
    schedule: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let command = match command {
        "scan" => Command::Scan,
        "verify" => Command::Verify,
        "mellin" => Command::Mellin,
        "recover" => Command::Recover,
        other => return Err(PyValueError::new_err(format!("unknown command {other:?}"))),
    };
    let mut config = RunConfig::new(command, path);
    if let Some(t) = tol {
        config.tol = t;
    }
    if let Some(s) = schedule {
        config.lambda_schedule = s;
    }
    config.validate().map_err(err)?;
    let report = py.detach(|| cli::execute(&config)).map_err(|(_, e)| err(e))?;
    let value: Value = serde_json::from_str(&report.to_json()).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &value)
}

#[pymodule]
fn uncertainty_kit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("UncertaintyKitError", m.py().get_type::<UncertaintyKitError>())?;
    m.add_class::<PyGaussPoly>()?;
    m.add_function(wrap_pyfunction!(gamma, m)?)?;
    m.add_function(wrap_pyfunction!(ln_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(hermite_coeffs, m)?)?;
    m.add_function(wrap_pyfunction!(exp_moment, m)?)?;
    m.add_function(wrap_pyfunction!(autocorr, m)?)?;
    m.add_function(wrap_pyfunction!(autocorr_closed, m)?)?;
    m.add_function(wrap_pyfunction!(reflection_residual, m)?)?;
    m.add_function(wrap_pyfunction!(uncertainty_integral, m)?)?;
    m.add_function(wrap_pyfunction!(scan_growth, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_divergence_onset, m)?)?;
    m.add_function(wrap_pyfunction!(bdj_integral, m)?)?;
    m.add_function(wrap_pyfunction!(bdj_max_bound, m)?)?;
    m.add_function(wrap_pyfunction!(mellin, m)?)?;
    m.add_function(wrap_pyfunction!(mellin_numeric, m)?)?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(verify_product_identity, m)?)?;
    m.add_function(wrap_pyfunction!(theta_hat_relation, m)?)?;
    m.add_function(wrap_pyfunction!(theta_product_poly, m)?)?;
    m.add_function(wrap_pyfunction!(recover, m)?)?;
    m.add_function(wrap_pyfunction!(fit_theta_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(width_from_rate, m)?)?;
    m.add_function(wrap_pyfunction!(run_report, m)?)?;
    Ok(())
}
