"""Instantaneous transforms G(xi) and level-shift injection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.special import log_ndtr, ndtr

from core.errors import InvalidParameter
from core.state import ChangeSpec, LrdSpec, NoisePath, Series

__all__ = [
    "Transform",
    "GAUSSIAN",
    "PARETO31",
    "TRANSFORMS",
    "get_transform",
    "apply_transform",
    "inject_shift",
    "pareto_g",
    "pareto_cdf",
    "pareto_density",
    "normal_density",
]

SQRT_3_4 = math.sqrt(0.75)
PARETO_LOWER = -math.sqrt(1.0 / 3.0)
MOMENT_TOL = 1e-6

ArrayFn = Callable[[np.ndarray], np.ndarray]


# ============================
# Gaussian
# ============================
def _identity(t):
    return np.asarray(t, dtype=np.float64)


def normal_density(x):
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _normal_cdf(x):
    return ndtr(np.asarray(x, dtype=np.float64))


# ============================
# Standardized Pareto(3, 1)
# ============================
def pareto_g(t):
    """G(t) = (Phi(t)^(-1/3) - 3/2) / sqrt(3/4); strictly decreasing."""
    t = np.asarray(t, dtype=np.float64)
    return (np.exp(-log_ndtr(t) / 3.0) - 1.5) / SQRT_3_4


def pareto_cdf(x):
    x = np.asarray(x, dtype=np.float64)
    base = np.where(x >= PARETO_LOWER, SQRT_3_4 * x + 1.5, 1.0)
    return np.where(x >= PARETO_LOWER, 1.0 - base ** -3.0, 0.0)


def pareto_density(x):
    """3 sqrt(3/4) (sqrt(3/4) x + 3/2)^-4 on x >= -sqrt(1/3), else 0."""
    arr = np.asarray(x, dtype=np.float64)
    base = np.where(arr >= PARETO_LOWER, SQRT_3_4 * arr + 1.5, 1.0)
    out = np.where(arr >= PARETO_LOWER, 3.0 * SQRT_3_4 * base ** -4.0, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


# ============================
# Transform
# ============================
@dataclass(frozen=True)
class Transform:
    """G with the CDF F and density f of G(xi).

    direction is +1 when G is strictly increasing and -1 when strictly
    decreasing; then F(G(t)) = Phi(t) or 1 - Phi(t) respectively.
    Callables of built-in transforms are module-level so the value pickles
    into worker processes.
    """

    name: str
    g: ArrayFn
    cdf: ArrayFn
    pdf: ArrayFn
    support: Tuple[float, float]
    direction: int = 1

    def __post_init__(self) -> None:
        if self.direction not in (1, -1):
            raise InvalidParameter(f"direction must be +1 or -1, got {self.direction}")
        lo, hi = self.support
        if not lo < hi:
            raise InvalidParameter(f"empty support {self.support}")

    def __call__(self, t):
        return self.g(t)

    def moments(self) -> Tuple[float, float]:
        """(E[G(xi)], E[G(xi)^2]) by adaptive quadrature."""
        # phi underflows before G can overflow; skip G there
        def first(x):
            weight = float(normal_density(x))
            return float(self.g(x)) * weight if weight > 0.0 else 0.0

        def second(x):
            weight = float(normal_density(x))
            return float(self.g(x)) ** 2 * weight if weight > 0.0 else 0.0

        mean = integrate.quad(first, -np.inf, 0.0)[0] + integrate.quad(first, 0.0, np.inf)[0]
        var = integrate.quad(second, -np.inf, 0.0)[0] + integrate.quad(second, 0.0, np.inf)[0]
        return mean, var

    def self_check(self, tol: float = MOMENT_TOL) -> Tuple[float, float]:
        mean, second = self.moments()
        if abs(mean) > tol or abs(second - 1.0) > tol:
            raise InvalidParameter(
                f"transform {self.name} is not standardized: E[G]={mean:.3e} E[G^2]={second:.6f}"
            )
        return mean, second

    @classmethod
    def custom(
        cls,
        name: str,
        g: ArrayFn,
        cdf: ArrayFn,
        pdf: ArrayFn,
        support: Tuple[float, float] = (-math.inf, math.inf),
        direction: int = 1,
        check: bool = True,
    ) -> "Transform":
        t = cls(name=name, g=g, cdf=cdf, pdf=pdf, support=support, direction=direction)
        if check:
            t.self_check()
        return t


GAUSSIAN = Transform(
    name="gaussian",
    g=_identity,
    cdf=_normal_cdf,
    pdf=normal_density,
    support=(-math.inf, math.inf),
    direction=1,
)

PARETO31 = Transform(
    name="pareto31",
    g=pareto_g,
    cdf=pareto_cdf,
    pdf=pareto_density,
    support=(PARETO_LOWER, math.inf),
    direction=-1,
)

TRANSFORMS: Dict[str, Transform] = {GAUSSIAN.name: GAUSSIAN, PARETO31.name: PARETO31}


def get_transform(name: str) -> Transform:
    try:
        return TRANSFORMS[str(name).lower()]
    except KeyError:
        raise InvalidParameter(
            f"unknown transform {name!r}; expected one of {sorted(TRANSFORMS)}"
        ) from None


# ============================
# Operations
# ============================
def apply_transform(noise: NoisePath, t: Transform) -> Series:
    return Series(t.g(noise.values))


def inject_shift(series: Series, change: ChangeSpec, spec: Optional[LrdSpec] = None) -> Series:
    """Add h to X_i for i > floor(n * tau).

    spec resolves a shift constant with the n^(-D/2) rate; without it the
    i.i.d. rate n^(-1/2) applies.
    """
    n = series.n
    h = change.resolve_shift(n, spec)
    k = change.break_index(n)
    if h == 0.0 or k >= n:
        return series
    values = np.array(series.values, copy=True)
    values[k:] += h
    return Series(values)
