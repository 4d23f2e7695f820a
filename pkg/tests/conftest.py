import numpy as np
import pytest
import sympy as sy

from insulated_gap.gap_solver import GridSpec, ModeProblem, solve_mode
from insulated_gap.geometry import InclusionPair, build_chart


def manufactured_case(d=3, m=2, eps=0.1, R0=0.3):
    """Source and boundary fluxes for u* = r (1 + s^2), derived symbolically in physical coordinates."""
    r, x, S = sy.symbols("r x S", positive=True)
    h1 = 1 - (1 - r ** m) ** sy.Rational(1, m)
    h2 = -h1
    delta = eps + h1 - h2
    u = r * (1 + ((x - h2 + sy.Rational(1, 2) * eps) / delta) ** 2)
    Lu = sy.diff(u, r, 2) + (d - 2) / r * sy.diff(u, r) - (d - 2) / r ** 2 * u + sy.diff(u, x, 2)
    w = r ** (d - 2)
    source = sy.lambdify((r, S), (-w * delta * Lu).subs(x, -eps / 2 + h2 + S * delta), "numpy")
    top = sy.lambdify(r, (w * (-sy.diff(h1, r) * sy.diff(u, r) + sy.diff(u, x))).subs(x, eps / 2 + h1), "numpy")
    bottom = sy.lambdify(r, (w * (sy.diff(h2, r) * sy.diff(u, r) - sy.diff(u, x))).subs(x, -eps / 2 + h2),
                         "numpy")
    chart = build_chart(InclusionPair.build(m, epsilon=eps, R0=R0))

    def problem(nr, ns, grading=1.0):
        return ModeProblem(chart, d=d, grid=GridSpec(nr, ns, grading),
                           lateral_profile=lambda s: R0 * (1 + s ** 2),
                           source=source, flux_top=top, flux_bottom=bottom)

    return problem


def manufactured_errors(grids, grading=1.0, **kw):
    make = manufactured_case(**kw)
    errs = []
    for nr, ns in grids:
        sol = solve_mode(make(nr, ns, grading))
        exact = sol.r[:, None] * (1 + sol.s[None, :] ** 2)
        errs.append(float(np.abs(sol.values - exact).max()))
    return np.array(errs)


@pytest.fixture(scope="session")
def mms():
    return manufactured_errors
