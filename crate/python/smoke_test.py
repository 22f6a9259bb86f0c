"""Smoke test for the uncertainty_kit extension module.

Build the module and put it on the path first, e.g.

    cargo build --release -p uncertainty-kit-py
    cp target/release/libuncertainty_kit.so python/uncertainty_kit.so
    python3 python/smoke_test.py
"""

import cmath
import json
import math
import pathlib
import sys

import uncertainty_kit as uk

ROOT = pathlib.Path(__file__).resolve().parent.parent
DATA = ROOT / "crates" / "core" / "tests" / "data"
SCHEMA = ROOT / "crates" / "core" / "schema" / "output.schema.json"


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    g1 = uk.GaussPoly.gaussian(1.0)
    assert g1.eval(0.0) == 1.0
    assert g1.parity() == 0
    assert uk.GaussPoly.monomial(1, 1.0).parity() == 1
    assert repr(g1) == "GaussPoly([([1.0], 1.0)])"

    f = uk.GaussPoly([([0.7, 0.0, 1.0], 1.0), ([1.0], 4.0)])
    assert f.widths() == [1.0, 4.0]
    assert f.degree() == 2

    assert close(uk.gamma(0.5).real, math.sqrt(math.pi), 1e-12)
    z = complex(0.3, 2.0)
    assert abs(uk.gamma(z + 1) - z * uk.gamma(z)) < 1e-10 * abs(uk.gamma(z + 1))

    for lam in (0.0, 0.5, 0.9):
        want = 4 * (math.pi / 2 + math.asin(lam)) / math.sqrt(1 - lam * lam)
        assert close(uk.uncertainty_integral(g1, lam), want, 1e-6)

    scan = uk.scan_growth(g1)
    assert abs(scan["exponent"] - 0.5) < 0.05, scan["exponent"]
    onset = uk.gaussian_divergence_onset(1.0, 0.25)
    assert abs(onset - 0.5) < 0.01, onset

    assert uk.reflection_residual(f, 3.0) < 1e-10
    t, u = uk.autocorr_closed(g1)
    assert close(t[0], 1.0, 1e-12) and all(x == 0 for x in u)

    m_closed = uk.mellin(g1, 0, 2j)
    m_num = uk.mellin_numeric(g1, 0, 2j)
    assert abs(m_closed - m_num) < 1e-8 * abs(m_closed)
    assert uk.theta_hat_relation(g1, 0, complex(0.25, 3.0)) < 1e-9
    fit = uk.theta_product_poly(g1, 0)
    assert len(fit["poly_coeffs"]) == 1
    assert close(fit["poly_coeffs"][0][0], math.sqrt(2) / (2 * math.pi), 1e-10)

    samples = [(z, uk.theta(g1, 0, z).real) for z in [-3 + 0.1 * i for i in range(61)]]
    rate = uk.fit_theta_exponent(samples)["exp_rate"]
    assert close(uk.width_from_rate(rate), 1.0, 1e-3)

    single = uk.GaussPoly([([0.5, 0.0, -1.0], 2.0)])
    xs = [-6 + 12 * i / 256 for i in range(257)]
    rec = uk.recover(xs, [single.eval(x) for x in xs])
    assert close(rec["width"], 2.0, 1e-6), rec
    assert all(abs(a - b) < 1e-6 for a, b in zip(rec["coeffs"], [0.5, 0.0, -1.0]))

    try:
        uk.GaussPoly.gaussian(-1.0)
    except uk.UncertaintyKitError as e:
        assert e.args[0] == "validation" and "width" in e.args[1], e.args
    else:
        raise AssertionError("negative width accepted")

    report = uk.run_report("verify", str(DATA / "gaussian.json"))
    assert all(c["status"] == "pass" for c in report["checks"]), report["checks"]
    try:
        import jsonschema
    except ImportError:
        jsonschema = None
    if jsonschema is not None:
        jsonschema.validate(report, json.loads(SCHEMA.read_text()))

    print("smoke test passed")


if __name__ == "__main__":
    sys.exit(main())
