"""Singular radial ODE of the gap-averaged first mode, and its mode-k relatives.

    L_k f = f'' + ((d-2)/r + m*lam*r**(m-1)/(eps + lam*r**m)) f' - k(k+d-3)/r**2 f

The origin is a regular singular point. Near r = 0 the drift is dominated by
(d-2)/r, so the two local branches behave like r**k (bounded) and
r**-(k+d-3) (unbounded). ``solve_g`` shoots outward from the bounded branch,
which is the stable direction, and normalizes by linearity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp

from .exponents import alpha, alpha_k, beta_threshold


class ODESolveError(RuntimeError):
    pass


class GridResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class GapODEProblem:
    epsilon: float
    d: int
    m: float
    lam: float = 1.0
    k: int = 1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam!r}")
        if int(self.d) != self.d or self.d < 3:
            raise ValueError(f"d must be an integer >= 3, got {self.d!r}")
        if self.m < 2:
            raise ValueError(f"m must be >= 2, got {self.m!r}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be an integer >= 1, got {self.k!r}")

    @property
    def potential(self) -> float:
        return self.k * (self.k + self.d - 3)

    @property
    def transition_radius(self) -> float:
        """Radius where eps and lam*r**m balance."""
        return (self.epsilon / self.lam) ** (1.0 / self.m)

    def profile_fraction(self, r):
        """t(r) = lam r^m / (eps + lam r^m), in [0, 1)."""
        x = self.lam * np.asarray(r, dtype=float) ** self.m
        return x / (self.epsilon + x)

    def drift(self, r):
        r = np.asarray(r, dtype=float)
        return (self.d - 2) / r + self.m * self.profile_fraction(r) / r

    def green_weight(self, r, g):
        """G = g^2 r^(d-2) (eps + lam r^m)."""
        r = np.asarray(r, dtype=float)
        return g ** 2 * r ** (self.d - 2) * (self.epsilon + self.lam * r ** self.m)


# --- radial test functions -------------------------------------------------

@dataclass(frozen=True)
class RadialFunction:
    """A radial profile with (optionally) closed-form first and second derivatives."""
    f: Callable
    df: Callable | None = None
    d2f: Callable | None = None
    name: str = "f"

    def __call__(self, r):
        return self.f(r)


@dataclass(frozen=True)
class Monomial(RadialFunction):
    c: float = 1.0

    @classmethod
    def of(cls, c: float) -> "Monomial":
        return cls(
            f=lambda r: np.asarray(r, dtype=float) ** c,
            df=lambda r: c * np.asarray(r, dtype=float) ** (c - 1),
            d2f=lambda r: c * (c - 1) * np.asarray(r, dtype=float) ** (c - 2),
            name=f"r^{c:g}",
            c=c,
        )


def lower_envelope(prob: GapODEProblem, beta: float) -> RadialFunction:
    """lam^((beta-alpha)/m) r^beta (eps + lam r^m)^((alpha-beta)/m), with exact derivatives."""
    a = alpha(prob.d, prob.m)
    eps, lam, m = prob.epsilon, prob.lam, prob.m
    scale = lam ** ((beta - a) / m)

    def f(r):
        r = np.asarray(r, dtype=float)
        return scale * r ** beta * (eps + lam * r ** m) ** ((a - beta) / m)

    def dlog(r):
        r = np.asarray(r, dtype=float)
        den = eps + lam * r ** m
        u1 = beta / r + (a - beta) * lam * r ** (m - 1) / den
        u2 = -beta / r ** 2 + (a - beta) * lam * (
            (m - 1) * r ** (m - 2) * den - m * lam * r ** (2 * m - 2)) / den ** 2
        return u1, u2

    def df(r):
        return f(r) * dlog(r)[0]

    def d2f(r):
        u1, u2 = dlog(r)
        return f(r) * (u2 + u1 ** 2)

    return RadialFunction(f, df, d2f, name=f"envelope(beta={beta:g})")


def upper_linear(C0: float, a0: float, b0: float) -> RadialFunction:
    """C0 (r - a0 r^b0)."""
    return RadialFunction(
        f=lambda r: C0 * (np.asarray(r, float) - a0 * np.asarray(r, float) ** b0),
        df=lambda r: C0 * (1 - a0 * b0 * np.asarray(r, float) ** (b0 - 1)),
        d2f=lambda r: -C0 * a0 * b0 * (b0 - 1) * np.asarray(r, float) ** (b0 - 2),
        name="C0(r - a0 r^b0)",
    )


def _fd_derivatives(f, r):
    # 4th-order central differences, relative step
    h = 1e-3 * r
    fm2, fm1, f0, fp1, fp2 = (f(r + j * h) for j in (-2, -1, 0, 1, 2))
    d1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h)
    d2 = (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h ** 2)
    return f0, d1, d2


def apply_L(prob: GapODEProblem, f, r):
    """Residual L_k f at radius (or radii) ``r`` in (0, 1].

    Monomials use the closed form r^(c-2)[c^2 + (d-3 + m t)c - k(k+d-3)] with
    t = lam r^m/(eps + lam r^m). Other functions use their supplied
    derivatives, falling back to 4th-order finite differences.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("L is singular at r <= 0")
    if isinstance(f, Monomial):
        c = f.c
        t = prob.profile_fraction(r)
        return r ** (c - 2) * (c * c + (prob.d - 3 + prob.m * t) * c - prob.potential)
    if isinstance(f, RadialSolution):
        f0, d1, d2 = _fd_derivatives(lambda x: f.evaluate(x)[0], r)
        d1 = f.evaluate(r)[1]
    elif isinstance(f, RadialFunction) and f.df is not None and f.d2f is not None:
        f0, d1, d2 = f.f(r), f.df(r), f.d2f(r)
    else:
        f0, d1, d2 = _fd_derivatives(f, r)
    return d2 + prob.drift(r) * d1 - prob.potential / r ** 2 * f0


# --- shooting solver -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RadialSolution:
    problem: GapODEProblem
    grid: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    normalization: float
    r_min: float
    _dense: object = field(repr=False, default=None)
    _scale: float = field(repr=False, default=1.0)

    def evaluate(self, r):
        """Return (g, g') at arbitrary radii in [r_min, 1] from the dense interpolant."""
        r = np.asarray(r, dtype=float)
        y = self._dense(np.log(r))
        return y[0] * self._scale, y[1] * self._scale / r


def default_r_min(prob: GapODEProblem) -> float:
    return min(1e-6, prob.transition_radius / 100.0)


def default_grid(prob: GapODEProblem, r_min: float | None = None, per_decade: int = 40) -> np.ndarray:
    r_min = default_r_min(prob) if r_min is None else r_min
    n = max(int(math.ceil(-math.log10(r_min) * per_decade)) + 1, 2)
    return np.geomspace(r_min, 1.0, n)


def check_resolution(prob: GapODEProblem, grid: np.ndarray, per_decade: int = 8) -> None:
    """Require ``per_decade`` nodes per decade on each side of the transition radius."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0) or grid[0] <= 0 or grid[-1] > 1:
        raise GridResolutionError("grid must be strictly increasing in (0, 1]")
    rt = prob.transition_radius
    for lo, hi in ((rt / 10, rt), (rt, rt * 10)):
        lo, hi = max(lo, grid[0]), min(hi, grid[-1])
        if hi <= lo:
            continue
        span = math.log10(hi / lo)
        need = int(math.floor(per_decade * span))
        have = int(np.count_nonzero((grid >= lo) & (grid <= hi)))
        if have < need:
            raise GridResolutionError(
                f"{have} nodes in [{lo:.3g}, {hi:.3g}] around transition radius {rt:.3g}; need {need}")


def solve_g(prob: GapODEProblem, grid=None, *, r_min: float | None = None,
            boundary_value: float = 1.0, rtol: float = 1e-10) -> RadialSolution:
    """Bounded solution of L_k g = 0 on (0, 1] with g(1) = boundary_value.

    Integrates (g, r g') in t = ln r with an adaptive 8th-order Runge-Kutta
    method, starting on the bounded branch g ~ r**k at ``r_min``.
    """
    r_min = default_r_min(prob) if r_min is None else float(r_min)
    if grid is None:
        grid = default_grid(prob, r_min)
    grid = np.asarray(grid, dtype=float)
    check_resolution(prob, grid)
    if grid[0] < r_min:
        raise GridResolutionError(f"grid starts at {grid[0]:.3g}, below the shooting radius {r_min:.3g}")

    k, q = prob.k, prob.potential
    eps, lam, m, d = prob.epsilon, prob.lam, prob.m, prob.d

    def rhs(t, y):
        x = lam * math.exp(m * t)
        frac = x / (eps + x)
        return [y[1], y[1] * (3 - d - m * frac) + q * y[0]]

    t0, t1 = math.log(r_min), 0.0
    # g = (r/r_min)^k scaled to O(1) at the start
    sol = solve_ivp(rhs, (t0, t1), [1.0, float(k)], method="DOP853",
                    rtol=rtol, atol=1e-14, dense_output=True)
    if not sol.success:
        raise ODESolveError(f"radial integration failed: {sol.message}")
    end = sol.y[0, -1]
    if not np.isfinite(end) or end <= 0:
        raise ODESolveError("non-positive value at r = 1")
    scale = boundary_value / end
    y = sol.sol(np.log(grid))
    values = y[0] * scale
    derivative = y[1] * scale / grid
    if grid[-1] == 1.0:
        values[-1] = boundary_value
    for a in (grid, values, derivative):
        a.setflags(write=False)
    return RadialSolution(prob, grid, values, derivative, normalization=boundary_value,
                          r_min=r_min, _dense=sol.sol, _scale=scale)


def ode_residual(sol: RadialSolution, interior: slice = slice(2, -2)) -> np.ndarray:
    """Scaled residual r^2 |L g| / |g| at interior grid nodes, using a 4th-order check stencil."""
    r = sol.grid[interior]
    res = apply_L(sol.problem, sol, r)
    g = sol.evaluate(r)[0]
    return np.abs(res) * r ** 2 / np.abs(g)


# --- explicit constants and polynomials -----------------------------------

def r0_C0(epsilon: float, d: int, m: float, lam: float, a0: float = 1.0, b0: float = 2.0) -> tuple[float, float]:
    """Radius r0(eps) and constant C0(eps) of the linear supersolution C0 (r - a0 r^b0)."""
    if not a0 > 0:
        raise ValueError(f"a0 must be positive, got {a0!r}")
    if not 1 < b0 < m + 1:
        raise ValueError(f"b0 must lie in (1, m+1) = (1, {m + 1:g}), got {b0!r}")
    if not epsilon > 0 or not lam > 0:
        raise ValueError("epsilon and lambda must be positive")
    base = a0 * (b0 - 1) * (d + b0 - 2) / (m * lam * (1 + a0 * b0)) * epsilon
    r0 = base ** (1.0 / (m + 1 - b0))
    den = 1.0 - a0 * r0 ** (b0 - 1)
    if den <= 0:
        raise ValueError(f"C0 denominator 1 - a0 r0^(b0-1) = {den:.3g} <= 0; r0 = {r0:.3g} too large")
    C0 = r0 ** (alpha(d, m) - 1) / den
    return r0, C0


def p_poly(beta: float, d: int, m: float, t):
    """Subsolution polynomial: L(envelope) = envelope/r^2 * p(lam r^m/(eps + lam r^m))."""
    a = alpha(d, m)
    t = np.asarray(t, dtype=float)
    return ((beta - a) ** 2 * t ** 2
            + ((a - beta) * (d + m + 2 * beta - 3) + m * beta) * t
            + (d - 2 + beta) * (beta - 1))


def p_poly_prime(beta: float, d: int, m: float, t):
    a = alpha(d, m)
    return 2 * (beta - a) ** 2 * np.asarray(t, dtype=float) + (a - beta) * (d + m + 2 * beta - 3) + m * beta


def p_decreasing(beta: float, d: int, m: float, tol: float = 1e-12) -> bool:
    """True iff p' <= 0 on [0, 1] (p' is affine, so the endpoints decide).

    At the threshold p'(1) = 0 exactly; ``tol`` absorbs the rounding there.
    """
    scale = tol * (1 + abs(beta)) * (d + m)
    return bool(p_poly_prime(beta, d, m, 0.0) <= scale and p_poly_prime(beta, d, m, 1.0) <= scale)


def _supersolution_constants(prob, a0, b0):
    # (r0, C0), or None when r0 falls outside (0, 1) and the linear barrier says nothing
    try:
        r0, C0 = r0_C0(prob.epsilon, prob.d, prob.m, prob.lam, a0, b0)
    except ValueError:
        if not 1 < b0 < prob.m + 1:
            raise
        return None
    return (r0, C0) if r0 < 1 else None


# --- certificates ----------------------------------------------------------

@dataclass(frozen=True)
class SubSuperCertificate:
    kind: str  # "subsolution" | "supersolution"
    label: str
    parameters: dict
    residual_sign_violations: int
    max_violation: float
    nodes_checked: int

    @property
    def ok(self) -> bool:
        return self.residual_sign_violations == 0

    def as_dict(self) -> dict:
        return {"kind": self.kind, "label": self.label, "parameters": self.parameters,
                "violations": self.residual_sign_violations, "max_violation": self.max_violation,
                "nodes": self.nodes_checked}


@dataclass(frozen=True)
class BoundsCertificate:
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def violations(self) -> int:
        return sum(c.residual_sign_violations for c in self.checks)

    def __getitem__(self, label: str) -> SubSuperCertificate:
        for c in self.checks:
            if c.label == label:
                return c
        raise KeyError(label)

    def as_dict(self) -> dict:
        return {"ok": self.ok, "violations": self.violations,
                "checks": [c.as_dict() for c in self.checks]}


def _compare(label, kind, lower, upper, rtol, params):
    # violation when lower > upper * (1 + rtol)
    excess = (lower - upper * (1 + rtol)) / np.maximum(np.abs(upper), 1e-300)
    bad = excess > 0
    return SubSuperCertificate(kind, label, params, int(np.count_nonzero(bad)),
                               float(max(excess.max(initial=-np.inf), 0.0)) if excess.size else 0.0,
                               int(excess.size))


def certify_bounds(prob: GapODEProblem, sol: RadialSolution, beta: float | None = None,
                   a0: float = 1.0, b0: float = 2.0, rtol: float = 1e-6, values=None) -> BoundsCertificate:
    """Check the two-sided envelopes of the first-mode solution at every grid node.

    ``values`` overrides the solution values (used to feed corrupted profiles).
    """
    if sol.problem != prob:
        raise ValueError("solution was computed for a different problem")
    if prob.k != 1:
        raise ValueError("bounds are stated for the first mode (k = 1)")
    d, m = prob.d, prob.m
    a = alpha(d, m)
    beta = beta_threshold(d, m) if beta is None else beta
    r = sol.grid
    g = sol.values if values is None else np.asarray(values, dtype=float)
    inner = (r > 0) & (r < 1)
    r, g = r[inner], g[inner]

    env = lower_envelope(prob, beta)(r)
    checks = [
        _compare("r < g", "subsolution", r, g, rtol, {}),
        _compare("envelope < g", "subsolution", np.minimum(r, env), g, rtol, {"beta": beta}),
        _compare("g < r^alpha", "supersolution", g, r ** a, rtol, {"alpha": a}),
    ]
    consts = _supersolution_constants(prob, a0, b0)
    if consts is None:
        checks.append(_compare("g < C0 r", "supersolution", g[:0], r[:0], rtol,
                               {"a0": a0, "b0": b0, "r0": None, "C0": None}))
    else:
        r0, C0 = consts
        below = r < r0
        checks.append(_compare("g < C0 r", "supersolution", g[below], C0 * r[below], rtol,
                               {"a0": a0, "b0": b0, "r0": r0, "C0": C0}))
    return BoundsCertificate(tuple(checks))


# --- uniqueness mechanism and mode decay ----------------------------------

@dataclass(frozen=True, eq=False)
class UniquenessReport:
    grid: np.ndarray
    I: np.ndarray
    explicit_bound: np.ndarray  # nan where r >= r0
    threshold: float

    @property
    def I_min_radius(self) -> float:
        return float(self.I[0])

    @property
    def diverges(self) -> bool:
        return self.I_min_radius >= self.threshold


def uniqueness_diagnostic(prob: GapODEProblem, sol: RadialSolution, threshold: float = 1e3,
                          a0: float = 1.0, b0: float = 2.0) -> UniquenessReport:
    """I(r) = g(r) * integral_r^1 ds / G(s); its blow-up at 0 rules out a second bounded solution."""
    if sol.problem != prob:
        raise ValueError("solution was computed for a different problem")
    r, g = sol.grid, sol.values
    integrand = r / prob.green_weight(r, g)  # ds/G = (s/G) d ln s
    t = np.log(r)
    tail = cumulative_simpson(integrand[::-1], x=-t[::-1], initial=0.0)[::-1]
    # tail is integral from r to grid[-1]
    I = g * tail
    d, m = prob.d, prob.m
    bound = np.full_like(r, np.nan)
    consts = _supersolution_constants(prob, a0, b0)
    if consts is None:
        return UniquenessReport(r, I, bound, threshold)
    r0, C0 = consts
    below = r < r0
    bound[below] = (r[below] ** (2 - d) - r[below] * r0 ** (1 - d)) / (
        (d - 1) * C0 ** 2 * (prob.epsilon + prob.lam * r0 ** m))
    return UniquenessReport(r, I, bound, threshold)


@dataclass(frozen=True, eq=False)
class DecayReport:
    problem: GapODEProblem
    alpha_k: float
    solution: RadialSolution
    ratio: np.ndarray

    @property
    def sup_ratio(self) -> float:
        return float(self.ratio.max())


def mode_decay(prob: GapODEProblem, grid=None) -> DecayReport:
    """Solve L_k V = 0, V(1) = 1 and report V(r) / r^alpha_k (bounded by 1 in theory)."""
    ak = alpha_k(prob.d, prob.m, prob.k)
    sol = solve_g(prob, grid)
    ratio = sol.values / sol.grid ** ak
    return DecayReport(prob, ak, sol, ratio)
