import pathlib

import numpy as np
import pytest

from superlab import OverflowDomain, dawson, dawson_from_erfcx, erfcx

DATA = pathlib.Path(__file__).parent / "data" / "specfun_oracle.npz"

# frozen from the arbitrary-precision oracle (tests/tools/gen_specfun_oracle.py)
DAWSON_PEAK_X = 0.9241388730
DAWSON_PEAK = 0.5410442246351817
ERFCX_ONE = 0.4275835761558070


@pytest.fixture(scope="module")
def oracle():
    return np.load(DATA)


def test_dawson_against_oracle(oracle):
    vals = dawson(oracle["x"])
    rel = np.abs(vals - oracle["dawson"]) / np.abs(oracle["dawson"])
    assert rel.max() < 1e-10


def test_erfcx_against_oracle(oracle):
    vals = erfcx(oracle["z"])
    rel = np.abs(vals - oracle["erfcx"]) / np.abs(oracle["erfcx"])
    assert rel.max() < 1e-10


def test_frozen_spot_values():
    assert dawson(DAWSON_PEAK_X) == pytest.approx(DAWSON_PEAK, rel=1e-12)
    assert erfcx(1.0) == pytest.approx(ERFCX_ONE, rel=1e-12)


def test_dawson_is_odd():
    x = np.linspace(0.0, 25.0, 400)
    np.testing.assert_allclose(dawson(-x), -dawson(x), rtol=0, atol=0)


def test_dawson_peak_location():
    # the maximum sits where 2xF(x) = 1; scan a fine grid around it
    x = np.linspace(0.5, 1.5, 20001)
    vals = dawson(x)
    i = int(np.argmax(vals))
    assert abs(x[i] - DAWSON_PEAK_X) < 1e-4
    assert vals[i] == pytest.approx(DAWSON_PEAK, rel=1e-8)


def test_dawson_asymptotic_tail():
    # F(x) -> 1/(2x) + 1/(4x^3) + ...
    x = np.array([10.0, 20.0, 30.0])
    expect = (1.0 / (2 * x) + 1.0 / (4 * x**3) + 3.0 / (8 * x**5)
              + 15.0 / (16 * x**7))
    np.testing.assert_allclose(dawson(x), expect, rtol=1e-7)


def test_erfcx_real_line_positive_decreasing():
    x = np.linspace(0.0, 50.0, 500)
    vals = erfcx(x).real
    assert (vals > 0).all()
    assert (np.diff(vals) < 0).all()
    assert erfcx(0.0) == pytest.approx(1.0, rel=1e-14)


def test_erfcx_conjugate_symmetry():
    rng = np.random.default_rng(7)
    z = rng.uniform(-15, 15, 200) + 1j * rng.uniform(-15, 15, 200)
    np.testing.assert_allclose(erfcx(np.conj(z)), np.conj(erfcx(z)),
                               rtol=1e-13)


def test_erfcx_scalar_returns_python_complex():
    v = erfcx(1.0 + 2.0j)
    assert isinstance(v, complex)


def test_erfcx_overflow_domain_raises():
    # deep in the left half-plane exp(z^2) exceeds double range
    with pytest.raises(OverflowDomain):
        erfcx(-30.0)
    with pytest.raises(OverflowDomain):
        erfcx(np.array([-1.0, -40.0 + 1.0j]))
    # same real part is safe when the imaginary part cancels the growth
    assert np.isfinite(erfcx(-30.0 + 40.0j))


def test_erfcx_rejects_nonfinite():
    with pytest.raises(ValueError):
        erfcx(np.nan)
    with pytest.raises(ValueError):
        erfcx(np.array([1.0, np.inf]))


def test_dawson_from_erfcx_matches_dawson():
    x = np.linspace(-6.0, 6.0, 301)
    np.testing.assert_allclose(dawson_from_erfcx(x), dawson(x),
                               rtol=1e-12, atol=1e-300)
