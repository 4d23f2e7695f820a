"""Inclusion boundaries near the contact point and the gap-flattening chart.

The upper inclusion boundary is x_d = eps/2 + h1(r), the lower one
x_d = -eps/2 + h2(r), with r = |x'|. The chart

    s = (x_d - h2(r) + eps/2) / delta(r),   delta(r) = eps + h1(r) - h2(r)

sends the gap window {r <= R0} onto the rectangle [0, R0] x [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


class GeometryError(ValueError):
    pass


class HypothesisViolation(GeometryError):
    pass


def _cap(radius: float, m: float, r):
    """radius - (radius^m - r^m)^(1/m) and its first two derivatives, cancellation-free."""
    r = np.asarray(r, dtype=float)
    x = (r / radius) ** m
    if np.any(x >= 1):
        raise GeometryError(f"r = {r.max():.4g} reaches the semi-axis {radius:.4g}")
    rest = radius * (1 - x) ** (1 / m)  # (radius^m - r^m)^(1/m)
    h = -radius * np.expm1(np.log1p(-x) / m)
    hp = r ** (m - 1) * rest ** (1 - m)
    hpp = (m - 1) * r ** (m - 2) * radius ** m * rest ** (1 - 2 * m)
    return h, hp, hpp


@dataclass(frozen=True)
class GapPair:
    """Common interface: boundary graphs, gap width, leading profile coefficient."""
    epsilon: float
    R0: float
    m: float

    @property
    def lambda0(self) -> float:
        raise NotImplementedError

    def graphs(self, r):
        """Return (h1, h2, h1', h2', h1'', h2'') at r."""
        raise NotImplementedError

    def boundary_graphs(self, r):
        h1, h2, h1p, h2p, _, _ = self.graphs(r)
        return h1, h2, h1p, h2p

    def delta(self, r):
        h1, h2, *_ = self.graphs(r)
        return self.epsilon + h1 - h2

    def delta_prime(self, r):
        _, _, h1p, h2p, _, _ = self.graphs(r)
        return h1p - h2p

    def model_delta(self, r):
        """eps + lambda0 r^m, the leading-order gap width."""
        return self.epsilon + self.lambda0 * np.asarray(r, dtype=float) ** self.m

    def with_epsilon(self, epsilon: float) -> "GapPair":
        return replace(self, epsilon=epsilon)


@dataclass(frozen=True)
class InclusionPair(GapPair):
    """Two m-ellipsoids |x'|^m + |x_d -+ (eps/2 + r_i)|^m = r_i^m touching at the origin when eps = 0."""
    r1: float = 1.0
    r2: float = 1.0
    kappa1: float | None = None
    kappa2: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.m < 2:
            raise GeometryError(f"m must be >= 2, got {self.m}")
        if not (self.r1 > 0 and self.r2 > 0):
            raise GeometryError("semi-axes must be positive")
        if not self.epsilon > 0:
            raise GeometryError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.R0 < min(self.r1, self.r2):
            raise GeometryError(f"R0 = {self.R0} must lie in (0, min(r1, r2) = {min(self.r1, self.r2)})")
        if self.gamma is None:
            object.__setattr__(self, "gamma", float(self.m))

    @classmethod
    def build(cls, m: float, r1: float = 1.0, r2: float = 1.0, epsilon: float = 1e-3,
              R0: float | None = None, **kw) -> "InclusionPair":
        R0 = 0.3 * min(r1, r2) if R0 is None else R0
        return cls(epsilon=epsilon, R0=R0, m=m, r1=r1, r2=r2, **kw)

    @property
    def lambda0(self) -> float:
        m = self.m
        return (1 / self.r1 ** (m - 1) + 1 / self.r2 ** (m - 1)) / m

    def graphs(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(r > self.R0 * (1 + 1e-12)):
            raise GeometryError(f"r must lie in [0, R0 = {self.R0}]")
        h1, h1p, h1pp = _cap(self.r1, self.m, r)
        g2, g2p, g2pp = _cap(self.r2, self.m, r)
        return h1, -g2, h1p, -g2p, h1pp, -g2pp


@dataclass(frozen=True)
class FlatPlates(GapPair):
    """Parallel plates at distance eps; control geometry with an affine chart."""
    m: float = 2.0

    def __post_init__(self):
        if not (self.epsilon > 0 and self.R0 > 0):
            raise GeometryError("epsilon and R0 must be positive")

    @property
    def lambda0(self) -> float:
        return 0.0

    def graphs(self, r):
        z = np.zeros_like(np.asarray(r, dtype=float))
        return z, z, z, z, z, z


# --- hypothesis checks -----------------------------------------------------

@dataclass(frozen=True)
class HypothesisReport:
    tangency: bool
    ordering: bool
    h1_constant: float        # sup |h1 - h2 - lambda0 r^m| / r^(m + gamma)
    kappa1: float             # sup |h_i'| / r^(m-1)
    kappa2: float             # ||h1||_C2 + ||h2||_C2 from sampled second differences
    lambda0_fit: float
    ok: bool
    messages: tuple = ()

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("tangency", "ordering", "h1_constant", "kappa1", "kappa2", "lambda0_fit", "ok")} | {
            "messages": list(self.messages)}


def fit_lambda0(pair: GapPair, r_small: float | None = None) -> float:
    """(h1 - h2)(r) / r^m at a radius small enough that the r^(2m) remainder is below 1e-12."""
    r = r_small if r_small is not None else min(pair.R0, 1e-12 ** (1 / pair.m))
    h1, h2, *_ = pair.graphs(np.array([r]))
    return float((h1 - h2)[0] / r ** pair.m)


def validate_hypotheses(pair: GapPair, n: int = 10_000, raise_on_failure: bool = True) -> HypothesisReport:
    """Measure the profile, gradient and C^2 constants on a sampled grid over [0, R0]."""
    m = pair.m
    gamma = getattr(pair, "gamma", m) or m
    r = np.linspace(0.0, pair.R0, n + 1)
    h1, h2, h1p, h2p, _, _ = pair.graphs(r)
    msgs = []

    tangency = bool(h1[0] == 0 and h2[0] == 0)
    ordering = bool(np.all(h1 >= 0) and np.all(h2 <= 0))
    rp = r[1:]
    remainder = np.abs((h1 - h2)[1:] - pair.lambda0 * rp ** m) / rp ** (m + gamma)
    c_h1 = float(remainder.max())
    grad = np.maximum(np.abs(h1p), np.abs(h2p))[1:] / rp ** (m - 1)
    kappa1 = float(grad.max())

    dr = r[1] - r[0]

    def c2_norm(h):
        hd = np.abs(np.gradient(h, dr))
        second = np.abs(h[2:] - 2 * h[1:-1] + h[:-2]) / dr ** 2
        return np.abs(h).max() + hd.max() + second.max()

    kappa2 = float(c2_norm(h1) + c2_norm(h2))
    if not tangency:
        msgs.append("boundaries do not touch the origin")
    if not ordering:
        msgs.append("h1 >= 0 >= h2 violated")
    if not np.isfinite(c_h1):
        msgs.append("profile remainder unbounded")
    k1 = getattr(pair, "kappa1", None)
    k2 = getattr(pair, "kappa2", None)
    if k1 is not None and kappa1 > k1:
        msgs.append(f"gradient bound needs kappa1 >= {kappa1:.4g}, stored {k1}")
    if k2 is not None and kappa2 > k2:
        msgs.append(f"C2 bound needs kappa2 >= {kappa2:.4g}, stored {k2}")
    report = HypothesisReport(tangency, ordering, c_h1, kappa1, kappa2, fit_lambda0(pair),
                              ok=not msgs, messages=tuple(msgs))
    if msgs and raise_on_failure:
        raise HypothesisViolation("; ".join(msgs))
    return report


# --- flattening chart ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FlattenedChart:
    """Strip map of the gap window onto [0, R0] x [0, 1].

    In (r, s) the mode operator takes the divergence form

        d_i(r^(d-2) A_ij d_j u) - (d-2) r^(d-4) delta(r) u = 0,

    with A = [[delta, -(h2' + s delta')], [., ((h2' + s delta')^2 + 1)/delta]]
    and det A = 1. The insulating condition becomes the conormal condition
    A_sr u_r + A_ss u_s = 0 on s = 0 and s = 1.
    """
    pair: GapPair
    diagnostics: dict = field(default_factory=dict)

    @property
    def epsilon(self) -> float:
        return self.pair.epsilon

    @property
    def R0(self) -> float:
        return self.pair.R0

    def delta(self, r):
        return self.pair.delta(r)

    def to_rect(self, r, xd):
        h1, h2, *_ = self.pair.graphs(r)
        return np.asarray(r, dtype=float), (xd - h2 + self.epsilon / 2) / (self.epsilon + h1 - h2)

    def to_phys(self, r, s):
        h1, h2, *_ = self.pair.graphs(r)
        return np.asarray(r, dtype=float), -self.epsilon / 2 + h2 + s * (self.epsilon + h1 - h2)

    def tilt(self, r, s):
        """h2' + s delta', the x_d-slope of the s = const coordinate line."""
        _, _, h1p, h2p, _, _ = self.pair.graphs(r)
        return h2p + s * (h1p - h2p)

    def coefficients(self, r, s):
        """(A_rr, A_rs, A_ss) at chart points, without the r^(d-2) weight."""
        delta = self.delta(r)
        b = self.tilt(r, s)
        return delta, -b, (b * b + 1) / delta

    def ds_dr(self, r, s):
        return -self.tilt(r, s) / self.delta(r)

    def physical_gradient(self, r, s, u_r, u_s):
        """Map chart derivatives to (d/dr at fixed x_d, d/dx_d)."""
        return u_r + self.ds_dr(r, s) * u_s, u_s / self.delta(r)

    def cross_coefficient(self, r, s):
        """Cross coefficient in transverse units scaled to the local half-width, i.e. y_d in (-delta, delta)."""
        return -2 * self.delta(r) * self.tilt(r, s)


def build_chart(pair: GapPair, n_r: int = 400, n_s: int = 21) -> FlattenedChart:
    """Construct the chart and verify positivity, SPD and the cross-coefficient bound."""
    r = np.linspace(0.0, pair.R0, n_r + 1)
    s = np.linspace(0.0, 1.0, n_s)
    R, S = np.meshgrid(r, s, indexing="ij")
    chart = FlattenedChart(pair)
    delta = pair.delta(R)
    if np.any(delta <= 0):
        raise GeometryError("degenerate gap: delta <= 0")
    arr, ars, ass = chart.coefficients(R, S)
    min_eig = 0.5 * (arr + ass) - np.sqrt(0.25 * (arr - ass) ** 2 + ars ** 2)
    if np.any(min_eig <= 0):
        raise GeometryError("transformed coefficient matrix is not positive definite")
    rp = R[1:]
    if pair.lambda0 > 0:
        cross = np.abs(chart.cross_coefficient(R, S))[1:] / (rp ** (pair.m - 1) * delta[1:])
        cross_c = float(cross.max())
    else:
        cross_c = float(np.abs(ars).max())
    chart.diagnostics.update(
        min_delta=float(delta.min()),
        min_eigenvalue=float(min_eig.min()),
        det_error=float(np.abs(arr * ass - ars ** 2 - 1).max()),
        cross_constant=cross_c,
        jacobian_min=float(delta.min()),
    )
    return chart
