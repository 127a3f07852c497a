"""Hermite coefficients, density integrals and asymptotic relative efficiency.

For a transform G with F, f the law and density of G(xi):

    a1          = E[xi G(xi)]                 (Gauss-Hermite, probabilists')
    f_sq        = int f(x)^2 dx               (adaptive quadrature on the support)
    j1_integral = int J1 dF = -/+ 1/(2 sqrt(pi))  (increasing / decreasing G)
    shift_ratio = |a1| f_sq / |j1_integral|

ARE(W, C) = shift_ratio^(2/D) in the long-memory regime and 3/pi for
i.i.d. Gaussian data.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate
from scipy.special import roots_hermitenorm

from core.errors import (
    InvalidParameter,
    NumericError,
    QuadratureNonConvergence,
    UnsupportedOrder,
)
from core.state import Method, Mode
from core.stats import WILCOXON_IID_SCALE, WILCOXON_LRD_SCALE
from core.transform import Transform, normal_density

__all__ = [
    "MAX_ORDER",
    "J1_INTEGRAL",
    "QuadratureConfig",
    "HermiteSummary",
    "AreResult",
    "hermite_poly",
    "gauss_hermite_expectation",
    "first_hermite_coefficient",
    "density_square_integral",
    "j1_integral_by_quadrature",
    "compute_summary",
    "are_lrd",
    "are_iid",
    "detectable_shift",
]

_log = logging.getLogger("hermite")

MAX_ORDER = 10
J1_INTEGRAL = -WILCOXON_LRD_SCALE
SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class QuadratureConfig:
    nodes: int = 201
    tol: float = 1e-7
    f_sq_tol: float = 1e-10
    limit: int = 200


@dataclass(frozen=True)
class HermiteSummary:
    transform: str
    a1: float
    j1_integral: float
    f_sq_integral: float
    shift_ratio: float
    a1_error: float = 0.0
    f_sq_error: float = 0.0


@dataclass(frozen=True)
class AreResult:
    regime: Mode
    value: float
    b: float
    d: Optional[float] = None


# ============================
# Hermite polynomials
# ============================
def hermite_poly(q: int, x):
    """Probabilists' He_q via He_{q+1} = x He_q - q He_{q-1}."""
    q = int(q)
    if q < 0:
        raise InvalidParameter(f"order must be >= 0, got {q}")
    if q > MAX_ORDER:
        raise UnsupportedOrder(f"hermite order {q} exceeds {MAX_ORDER}")
    x = np.asarray(x, dtype=np.float64)
    prev, cur = np.ones_like(x), x
    if q == 0:
        out = prev
    else:
        for j in range(1, q):
            prev, cur = cur, x * cur - j * prev
        out = cur
    if out.ndim == 0:
        return float(out)
    return out


def gauss_hermite_expectation(func: Callable[[np.ndarray], np.ndarray], nodes: int) -> float:
    """E[func(xi)] for xi ~ N(0, 1) on an n-node rule."""
    x, w = roots_hermitenorm(int(nodes))
    with np.errstate(over="ignore", invalid="ignore"):
        values = func(x) * w
    values = np.where(w > 0.0, values, 0.0)
    return float(np.sum(values) / SQRT_2PI)


# ============================
# Integrals
# ============================
def first_hermite_coefficient(t: Transform, quad: QuadratureConfig = QuadratureConfig()) -> Tuple[float, float]:
    """(a1, |a1(2 nodes) - a1(nodes)|); raises when the refinement moves a1 by more than tol."""
    def integrand(x):
        return x * t.g(x)

    coarse = gauss_hermite_expectation(integrand, quad.nodes)
    fine = gauss_hermite_expectation(integrand, 2 * quad.nodes)
    err = abs(fine - coarse)
    if not math.isfinite(fine) or err > quad.tol:
        raise QuadratureNonConvergence(
            f"a1 for {t.name}: {coarse:.10f} vs {fine:.10f} at {quad.nodes}/{2 * quad.nodes} nodes"
        )
    return fine, err


def _support_pieces(lo: float, hi: float):
    if math.isinf(lo) and math.isinf(hi):
        return [(-math.inf, 0.0), (0.0, math.inf)]
    if math.isinf(lo):
        return [(-math.inf, hi - 1.0), (hi - 1.0, hi)]
    edges = [lo, lo + 1.0, lo + 10.0, lo + 1e3]
    edges = [e for e in edges if e < hi] + [hi]
    return list(zip(edges[:-1], edges[1:]))


def density_square_integral(t: Transform, quad: QuadratureConfig = QuadratureConfig()) -> Tuple[float, float]:
    """(int f^2, summed abserr) over the support, split where f changes scale."""
    def integrand(x):
        return float(t.pdf(x)) ** 2

    total, err = 0.0, 0.0
    for a, b in _support_pieces(*t.support):
        value, abserr = integrate.quad(integrand, a, b, limit=quad.limit, epsabs=1e-13, epsrel=1e-12)
        total += value
        err += abserr
    if err > quad.f_sq_tol:
        raise QuadratureNonConvergence(f"int f^2 for {t.name}: abserr {err:.3e} > {quad.f_sq_tol:.1e}")
    return total, err


def j1_integral_by_quadrature(t: Transform, grid_n: int = 200_001, half_width: float = 12.0) -> float:
    """Direct evaluation of int J1 dF with J1(x) = E[xi 1{G(xi) <= x}].

    Diagnostic only: on a fine grid the cumulative sum of y phi(y) dy in
    increasing-G order gives J1 at every G(y); integrating against the same
    weights gives int J1 dF.
    """
    y = np.linspace(-half_width, half_width, int(grid_n))
    w = normal_density(y) * (y[1] - y[0])
    with np.errstate(over="ignore"):
        g = t.g(y)
    order = np.argsort(g, kind="stable")
    j1 = np.cumsum((y * w)[order])
    return float(np.sum(j1 * w[order]))


# ============================
# Summary and ARE
# ============================
@lru_cache(maxsize=32)
def compute_summary(t: Transform, quad: QuadratureConfig = QuadratureConfig()) -> HermiteSummary:
    a1, a1_err = first_hermite_coefficient(t, quad)
    if a1 == 0.0 or int(math.copysign(1, a1)) != t.direction:
        raise NumericError(f"a1={a1:.6f} has the wrong sign for {t.name} (direction {t.direction})")
    f_sq, f_err = density_square_integral(t, quad)
    j1 = J1_INTEGRAL * t.direction
    ratio = abs(a1) * f_sq / abs(j1)
    _log.info("[HERMITE] SUMMARY transform=%s a1=%.7f f_sq=%.9f shift_ratio=%.6f", t.name, a1, f_sq, ratio)
    return HermiteSummary(
        transform=t.name,
        a1=a1,
        j1_integral=j1,
        f_sq_integral=f_sq,
        shift_ratio=ratio,
        a1_error=a1_err,
        f_sq_error=f_err,
    )


def are_lrd(summary: HermiteSummary, d: float) -> AreResult:
    d = float(d)
    if not 0.0 < d < 1.0:
        raise InvalidParameter(f"d must lie in (0, 1), got {d}")
    value = summary.shift_ratio ** (2.0 / d)
    return AreResult(regime=Mode.LRD, value=value, b=summary.shift_ratio ** (-2.0 / d), d=d)


def are_iid() -> AreResult:
    """(2 sigma sqrt(pi))^-2 with sigma^2 = 1/12, i.e. 3/pi."""
    value = (2.0 * WILCOXON_IID_SCALE * math.sqrt(math.pi)) ** -2
    return AreResult(regime=Mode.IID, value=value, b=1.0 / value)


def detectable_shift(n: int, psi_inv: float, summary: HermiteSummary, d: float, method: Method) -> float:
    """Smallest shift the test detects with the power psi_inv was solved for."""
    rate = float(n) ** (-float(d) / 2.0)
    if Method(method) is Method.CUSUM:
        return rate * abs(summary.a1) * psi_inv
    return rate * abs(summary.j1_integral) / summary.f_sq_integral * psi_inv
