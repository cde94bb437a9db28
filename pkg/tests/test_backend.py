import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dressedtls import _backend, _kernels_py

compiled = pytest.importorskip("dressedtls._kernels")


def test_backend_selected():
    assert _backend.NAME in ("cython", "python")
    assert _backend.kernels in (compiled, _kernels_py)


@given(st.floats(0.0, 80.0), st.integers(0, 60))
def test_bessel_tables_agree(x, nmax):
    a = compiled.bessel_table(x, nmax)
    b = _kernels_py.bessel_table(x, nmax)
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)


def test_bessel_many_agree():
    xs = np.concatenate([[0.0, 1e-80, 1e-7], np.linspace(-30, 30, 301)])
    np.testing.assert_allclose(compiled.bessel_table_many(xs, 45),
                               _kernels_py.bessel_table_many(xs, 45), rtol=1e-13, atol=1e-15)


def test_dressed_coefficients_agree():
    rng = np.random.default_rng(3)
    npts = 500
    alpha = rng.uniform(0.0, 15.0, npts)
    eta = rng.uniform(0.0, np.pi, npts)
    n = rng.integers(0, 5, npts)
    args = (alpha, np.cos(eta), np.sin(eta) ** 2, n, 0.37, 30)
    for a, b in zip(compiled.dressed_coefficients(*args), _kernels_py.dressed_coefficients(*args)):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("alpha", [0.0, 0.8, 4.0])
def test_magnus_agree(alpha):
    a = compiled.magnus_propagate(7.2e9, 0.3e9, alpha, 7e9, 2000)
    b = _kernels_py.magnus_propagate(7.2e9, 0.3e9, alpha, 7e9, 2000)
    assert a.shape == (2001, 2, 2)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
