"""Closed-form blow-up exponents for two nearly touching m-convex insulators.

The mode-k indicial exponent is the positive root of

    c**2 + (d + m - 3) * c - k * (k + d - 3) = 0,

and the first mode (k = 1) sets the gradient rate eps**((alpha - 1) / m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class ExponentDomainError(ValueError):
    """Raised for dimension, convexity order or mode index outside the admissible range."""


@dataclass(frozen=True)
class ExponentParams:
    d: int
    m: float
    k: int = 1

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 3:
            raise ExponentDomainError(f"d must be an integer >= 3, got {self.d!r}")
        if not math.isfinite(self.m) or self.m < 2:
            raise ExponentDomainError(f"m must be a real >= 2, got {self.m!r}")
        if int(self.k) != self.k or self.k < 1:
            raise ExponentDomainError(f"k must be an integer >= 1, got {self.k!r}")


@dataclass(frozen=True)
class ExponentResult:
    alpha: float
    alpha_k: float
    rate_upper: float
    beta: float

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "alpha_k": self.alpha_k,
                "rate": self.rate_upper, "beta": self.beta}


def _params(d, m, k=1) -> ExponentParams:
    if isinstance(d, ExponentParams):
        return d
    return ExponentParams(d, m, k)


def _positive_root(b: float, c: float) -> float:
    # positive root of x^2 + b x - c (b >= 0, c > 0), conjugate form avoids cancellation
    return 2.0 * c / (b + math.sqrt(b * b + 4.0 * c))


def quadratic_residual(c: float, d: int, m: float, k: int = 1) -> float:
    """Relative residual of the indicial quadratic at ``c``."""
    b = d + m - 3
    q = k * (k + d - 3)
    return abs(c * c + b * c - q) / max(c * c, abs(b * c), q)


def alpha_k(d, m=None, k: int = 1) -> float:
    """Indicial exponent of the mode-k operator; increasing in k, equal to ``alpha`` at k=1."""
    p = _params(d, m, k)
    return _positive_root(p.d + p.m - 3, p.k * (p.k + p.d - 3))


def alpha(d, m=None) -> float:
    """First-mode exponent alpha(d, m), always in (0, 1)."""
    p = _params(d, m)
    return alpha_k(p.d, p.m, 1)


def blowup_rate(d, m=None) -> tuple[float, float]:
    """Return ``(rate, beta)`` with rate = (alpha - 1)/m = -1/m + beta."""
    p = _params(d, m)
    a = alpha(p.d, p.m)
    rate = (a - 1.0) / p.m
    beta = a / p.m
    assert math.isclose(rate, -1.0 / p.m + beta, rel_tol=1e-12, abs_tol=1e-15)
    return rate, beta


def beta_threshold(d: int, m: float) -> float:
    """Smallest exponent for which the power-law envelope is a subsolution of the radial ODE."""
    a = alpha(d, m)
    return (2 * a * a + a * (d + m - 3)) / (2 * a + d - 3)


def asymptotic_check(d, m=None) -> dict:
    """Scaled remainders of the large-d and large-m expansions of alpha.

    ``d_remainder`` = |alpha - (1 - m/d)| * d**2 and ``m_remainder`` =
    |alpha - (d - 2)/m| * m**2; both stay bounded along growing d (resp. m).
    """
    p = _params(d, m)
    a = alpha(p.d, p.m)
    return {
        "alpha": a,
        "d_remainder": abs(a - (1.0 - p.m / p.d)) * p.d ** 2,
        "m_remainder": abs(a - (p.d - 2) / p.m) * p.m ** 2,
    }


def exponent_summary(d: int, m: float, k: int = 1) -> ExponentResult:
    p = ExponentParams(d, m, k)
    rate, beta = blowup_rate(p.d, p.m)
    return ExponentResult(alpha=alpha(p.d, p.m), alpha_k=alpha_k(p), rate_upper=rate, beta=beta)
