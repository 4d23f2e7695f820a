import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from insulated_gap.geometry import (FlatPlates, GeometryError, HypothesisViolation, InclusionPair,
                                    build_chart, fit_lambda0, validate_hypotheses)


@pytest.fixture
def pair():
    return InclusionPair.build(m=2, r1=1.0, r2=1.0, epsilon=1e-3)


def test_default_window(pair):
    assert pair.R0 == pytest.approx(0.3)
    assert pair.gamma == 2


def test_tangency(pair):
    h1, h2, h1p, h2p = pair.boundary_graphs(np.array([0.0]))
    assert h1[0] == 0 and h2[0] == 0 and h1p[0] == 0 and h2p[0] == 0


def test_cap_value():
    p = InclusionPair(epsilon=1e-3, R0=0.7, m=2, r1=1.0, r2=2.0)
    h1, *_ = p.boundary_graphs(np.array([0.6]))
    assert h1[0] == pytest.approx(0.2, abs=1e-15)


@pytest.mark.parametrize("m", [2, 2.5, 3, 4])
def test_derivatives_match_finite_differences(m):
    p = InclusionPair.build(m=m, r1=1.0, r2=1.5)
    r = np.linspace(0.05, 0.25, 9)
    h = 1e-4
    vals = p.graphs(r)
    u1, d1, u2, d2 = p.graphs(r + h), p.graphs(r - h), p.graphs(r + 2 * h), p.graphs(r - 2 * h)

    def fd(i):  # fourth-order central difference
        return (8 * (u1[i] - d1[i]) - (u2[i] - d2[i])) / (12 * h)

    for i in range(4):
        np.testing.assert_allclose(vals[i + 2], fd(i), rtol=1e-8)


def test_symmetric_gap(pair):
    r = np.linspace(0, pair.R0, 1001)
    h1, h2, h1p, h2p = pair.boundary_graphs(r)
    assert np.array_equal(h1, -h2) and np.array_equal(h1p, -h2p)
    assert np.all(h1 >= 0)


def test_profile_remainder_constant(pair):
    r = np.linspace(0, pair.R0, 100_001)[1:]
    h1, h2, *_ = pair.boundary_graphs(r)
    C = np.abs(h1 - h2 - pair.lambda0 * r ** 2) / r ** 4
    assert C.max() <= 10


@pytest.mark.parametrize("m,r1,r2", [(2, 1, 1), (2, 0.5, 2), (3, 1, 1.3), (2.5, 1.2, 0.8), (4, 1, 1)])
def test_lambda0_fit(m, r1, r2):
    p = InclusionPair.build(m=m, r1=r1, r2=r2)
    expected = (1 / r1 ** (m - 1) + 1 / r2 ** (m - 1)) / m
    assert p.lambda0 == pytest.approx(expected, rel=1e-15)
    assert abs(fit_lambda0(p) - expected) <= 1e-10


def test_hypotheses_pass(pair):
    rep = validate_hypotheses(pair)
    assert rep.ok and rep.tangency and rep.ordering
    assert rep.kappa1 <= 2
    assert rep.kappa2 <= 4
    assert np.isfinite(rep.h1_constant)


def test_stored_constants_checked():
    tight = validate_hypotheses(InclusionPair.build(m=2))
    strict = InclusionPair.build(m=2, kappa1=0.5 * tight.kappa1)
    with pytest.raises(HypothesisViolation, match="kappa1"):
        validate_hypotheses(strict)
    rep = validate_hypotheses(strict, raise_on_failure=False)
    assert not rep.ok and rep.messages
    validate_hypotheses(InclusionPair.build(m=2, kappa1=tight.kappa1, kappa2=tight.kappa2))


@pytest.mark.parametrize("R0", [1.0, 1.5, 0.0, -0.1])
def test_window_outside_semi_axis(R0):
    with pytest.raises(GeometryError):
        InclusionPair(epsilon=1e-3, R0=R0, m=2, r1=1.0, r2=1.0)


@pytest.mark.parametrize("kw", [dict(m=1.5), dict(epsilon=0.0), dict(r1=-1.0)])
def test_constructor_errors(kw):
    args = dict(epsilon=1e-3, R0=0.3, m=2, r1=1.0, r2=1.0) | kw
    with pytest.raises(GeometryError):
        InclusionPair(**args)


def test_graphs_reject_radius_outside_window(pair):
    with pytest.raises(GeometryError):
        pair.graphs(np.array([0.31]))


# --- chart -----------------------------------------------------------------

@given(r=st.floats(0, 0.3), s=st.floats(0, 1), eps=st.sampled_from([1e-2, 1e-3, 1e-4]))
@settings(max_examples=200, deadline=None)
def test_round_trip(r, s, eps):
    chart = build_chart(InclusionPair.build(m=2, r1=1.0, r2=1.7, epsilon=eps))
    r2_, xd = chart.to_phys(r, s)
    _, s2 = chart.to_rect(r2_, xd)
    assert abs(s2 - s) <= 1e-14 * max(1.0, chart.delta(r) / eps)
    r3, xd2 = chart.to_phys(r, s2)
    assert abs(xd2 - xd) <= 1e-14


def test_flat_chart_is_affine():
    chart = build_chart(FlatPlates(epsilon=1e-3, R0=0.3))
    R, S = np.meshgrid(np.linspace(0, 0.3, 11), np.linspace(0, 1, 5), indexing="ij")
    arr, ars, ass = chart.coefficients(R, S)
    assert np.all(ars == 0)
    np.testing.assert_allclose(arr, 1e-3)
    np.testing.assert_allclose(ass, 1 / 1e-3)
    assert chart.diagnostics["cross_constant"] == 0


def test_chart_spd_and_unit_determinant(pair):
    chart = build_chart(pair)
    assert chart.diagnostics["min_eigenvalue"] > 0
    assert chart.diagnostics["det_error"] <= 1e-9
    assert chart.diagnostics["jacobian_min"] == pytest.approx(1e-3)


@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_cross_coefficient_constant(eps):
    chart = build_chart(InclusionPair.build(m=2, epsilon=eps))
    assert chart.diagnostics["cross_constant"] <= 5


def test_degenerate_gap_rejected():
    class Pinched(FlatPlates):
        def graphs(self, r):
            z = np.zeros_like(np.asarray(r, dtype=float))
            return z, z + 2 * self.epsilon, z, z, z, z

    with pytest.raises(GeometryError, match="delta"):
        build_chart(Pinched(epsilon=1e-3, R0=0.3))


def _poly(r, x):
    # smooth test field and its physical partials
    return 1 + 2 * r - r * x + 3 * x ** 2 + r ** 2 * x, 2 - x + 2 * r * x, -r + 6 * x + r ** 2


@pytest.mark.parametrize("r", [0.0, 0.05, 0.17, 0.3])
def test_conormal_equals_physical_normal_flux(r):
    pair = InclusionPair.build(m=3, r1=1.0, r2=1.4, epsilon=1e-2)
    chart = build_chart(pair)
    h1, h2, h1p, h2p = pair.boundary_graphs(np.array(r))
    for s, sign, normal in [(1.0, 1, (-h1p, 1.0)), (0.0, -1, (h2p, -1.0))]:
        _, x = chart.to_phys(r, s)
        _, Ur, Ud = _poly(r, x)
        b = chart.tilt(r, s)
        delta = chart.delta(r)
        u_r, u_s = Ur + b * Ud, delta * Ud   # chain rule through x_d = X(r, s)
        _, ars, ass = chart.coefficients(r, s)
        conormal = sign * (ars * u_r + ass * u_s)
        assert conormal == pytest.approx(normal[0] * Ur + normal[1] * Ud, rel=1e-12, abs=1e-14)
        gr, gd = chart.physical_gradient(r, s, u_r, u_s)
        assert gr == pytest.approx(Ur, rel=1e-12) and gd == pytest.approx(Ud, rel=1e-12)


def test_with_epsilon(pair):
    q = pair.with_epsilon(1e-5)
    assert q.epsilon == 1e-5 and q.r1 == pair.r1 and q.R0 == pair.R0
    np.testing.assert_allclose(q.delta(np.array([0.1])) - pair.delta(np.array([0.1])), 1e-5 - 1e-3)


def test_model_delta_leading_order(pair):
    r = np.geomspace(1e-4, 1e-2, 10)
    np.testing.assert_allclose(pair.delta(r), pair.model_delta(r), rtol=1e-4)
