import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from antidazzle.bessel import jn_table


def _mp_jn(n, x):
    with mpmath.workdps(40):
        return float(mpmath.besselj(n, x))


@pytest.mark.parametrize("x", [0.0, 1e-300, 1e-8, 9.9e-6, 1.01e-5, 0.3, 1.0, 5.5, 17.0, 35.0, 36.5, 80.0, 250.0, 590.0])
def test_against_mpmath(x):
    table = jn_table(np.array([x]), 40)
    for n in range(41):
        assert table[n, 0] == pytest.approx(_mp_jn(n, x), abs=2e-15)


def test_zero_argument():
    t = jn_table(np.zeros(3), 5)
    assert np.all(t[0] == 1.0)
    assert np.all(t[1:] == 0.0)


def test_shape_and_scipy_agreement():
    from scipy.special import jv

    x = np.linspace(0, 120, 37).reshape(37, 1) * np.ones((1, 2))
    t = jn_table(x, 12)
    assert t.shape == (13, 37, 2)
    np.testing.assert_allclose(t, jv(np.arange(13)[:, None, None], x[None]), atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 400.0, allow_nan=False), st.integers(2, 35))
def test_recurrence_identity(x, n):
    # J_{n-1} + J_{n+1} = (2n/x) J_n
    t = jn_table(np.array([x]), 36)[:, 0]
    lhs = t[n - 1] + t[n + 1]
    assert abs(lhs * x - 2 * n * t[n]) <= 1e-13 * max(1.0, x)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 300.0, allow_nan=False))
def test_normalisation_sum(x):
    # J_0^2 + 2 sum J_k^2 = 1
    t = jn_table(np.array([x]), int(x) + 40)[:, 0]
    assert t[0] ** 2 + 2 * np.sum(t[1:] ** 2) == pytest.approx(1.0, abs=1e-12)
