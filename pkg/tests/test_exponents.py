import math

import mpmath as mp
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from insulated_gap import exponents as ex

D_GRID = range(3, 13)
M_GRID = (2, 2.5, 3, 4, 6, 10)


def mp_root(d, m, k=1):
    """Textbook quadratic formula at 50 digits, independent of the conjugate form."""
    with mp.workdps(50):
        b = mp.mpf(d) + mp.mpf(m) - 3
        return float((-b + mp.sqrt(b * b + 4 * k * (k + d - 3))) / 2)


def test_alpha_d3_m2():
    assert ex.alpha(3, 2) == pytest.approx(math.sqrt(2) - 1, abs=1e-15)


def test_alpha_d4_m3():
    assert ex.alpha(4, 3) == pytest.approx(math.sqrt(6) - 2, abs=1e-14)
    assert ex.alpha(4, 3) == pytest.approx(mp_root(4, 3), rel=1e-14)


def test_alpha_k_examples():
    assert ex.alpha_k(3, 2, 1) == ex.alpha(3, 2)
    assert ex.alpha_k(3, 2, 2) == pytest.approx(math.sqrt(5) - 1, abs=1e-14)
    c = ex.alpha_k(3, 2, 2)
    assert abs(c * c + 2 * c - 4) < 1e-13
    assert ex.alpha_k(3, 2, 3) > ex.alpha_k(3, 2, 2)


def test_blowup_rate_examples():
    rate, beta = ex.blowup_rate(3, 2)
    assert rate == pytest.approx((math.sqrt(2) - 2) / 2, abs=1e-15)
    assert rate == pytest.approx(-0.2928932, abs=1e-7)
    rate33, _ = ex.blowup_rate(3, 3)
    assert rate33 == pytest.approx(((math.sqrt(13) - 3) / 2 - 1) / 3, abs=1e-15)
    assert rate33 == pytest.approx(-0.2324081, abs=1e-7)


@pytest.mark.parametrize("d", D_GRID)
@pytest.mark.parametrize("m", M_GRID)
def test_grid_root_properties(d, m):
    a = ex.alpha(d, m)
    assert 0 < a < 1
    assert ex.quadratic_residual(a, d, m) <= 1e-12
    assert a == pytest.approx(mp_root(d, m), rel=1e-13)
    rate, beta = ex.blowup_rate(d, m)
    assert -1 / m < rate < 0
    assert 0 < beta < 1 / m


def test_monotone_on_grid():
    for m in M_GRID:
        vals = [ex.alpha(d, m) for d in D_GRID]
        assert all(b > a for a, b in zip(vals, vals[1:]))
    for d in D_GRID:
        vals = [ex.alpha(d, m) for m in M_GRID]
        assert all(b < a for a, b in zip(vals, vals[1:]))


@given(d=st.integers(3, 10_000), m=st.floats(2, 1e4), k=st.integers(1, 50))
@settings(max_examples=300, deadline=None)
def test_alpha_k_root_and_monotone(d, m, k):
    c = ex.alpha_k(d, m, k)
    assert c > 0
    assert ex.quadratic_residual(c, d, m, k) <= 1e-12
    assert ex.alpha_k(d, m, k + 1) > c


@given(d=st.integers(3, 10_000), m=st.floats(2, 1e4))
@settings(max_examples=200, deadline=None)
def test_rate_identity(d, m):
    rate, beta = ex.blowup_rate(d, m)
    assert rate == pytest.approx(-1 / m + beta, abs=1e-15)


@pytest.mark.parametrize("d", [10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6])
def test_large_d_remainder_bounded(d):
    # 50-digit evaluation gives remainders 1.994, 1.9994, ... -> 2
    assert ex.asymptotic_check(d, 2)["d_remainder"] <= 10


@pytest.mark.parametrize("m", [10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6])
def test_large_m_remainder_bounded(m):
    assert ex.asymptotic_check(3, m)["m_remainder"] <= 10


def test_small_params_only_report():
    diag = ex.asymptotic_check(3, 2)
    assert all(math.isfinite(v) for v in diag.values())


@pytest.mark.parametrize("d,m,k", [(2, 2, 1), (3, 1.5, 1), (3, 2, 0), (3.5, 2, 1)])
def test_domain_errors(d, m, k):
    with pytest.raises(ex.ExponentDomainError):
        ex.alpha_k(d, m, k)


def test_beta_threshold_d3():
    # with d = 3 the threshold simplifies to alpha + m/2
    assert ex.beta_threshold(3, 2) == pytest.approx(math.sqrt(2), abs=1e-14)
    assert ex.beta_threshold(3, 3) == pytest.approx(ex.alpha(3, 3) + 1.5, abs=1e-14)


def test_summary_dict():
    res = ex.exponent_summary(3, 2, 2).as_dict()
    assert set(res) == {"alpha", "alpha_k", "rate", "beta"}
    assert res["alpha_k"] == pytest.approx(math.sqrt(5) - 1)
