"""CUSUM and Wilcoxon change-point paths, d_n, and the normalized test.

Paths are indexed by the split point k = 1..n-1 and are unnormalized:

    cusum_path[k]    = sum_{i<=k} sum_{j>k} (X_j - X_i)
    wilcoxon_path[k] = sum_{i<=k} sum_{j>k} (1{X_i <= X_j} - 1/2)
"""

from __future__ import annotations

import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.stats import kstwobign

from core.errors import InconsistentNormalization, InvalidLength, InvalidParameter
from core.fgn import fgn_autocovariance
from core.state import (
    ChangeSpec,
    LrdSpec,
    Method,
    Mode,
    Normalization,
    Series,
    Sidedness,
    TestReport,
)

__all__ = [
    "WILCOXON_LRD_SCALE",
    "WILCOXON_IID_SCALE",
    "cusum_path",
    "wilcoxon_path",
    "OrderStatisticIndex",
    "dn",
    "make_normalization",
    "extremum",
    "test_statistic",
    "drift_function",
    "expected_drift_path",
    "iid_critical_value",
]

# |int J1 dF| for every continuous monotone G
WILCOXON_LRD_SCALE = 1.0 / (2.0 * math.sqrt(math.pi))
WILCOXON_IID_SCALE = math.sqrt(1.0 / 12.0)


def _values(series) -> np.ndarray:
    values = series.values if isinstance(series, Series) else np.asarray(series, dtype=np.float64)
    if values.ndim != 1 or values.size < 2:
        raise InvalidLength(f"n must be >= 2, got {values.size}")
    return values


# ============================
# CUSUM
# ============================
def _compensated_cumsum(x: np.ndarray) -> np.ndarray:
    """Prefix sums with the rounding error of every step added back (TwoSum)."""
    c = np.cumsum(x)
    prev = np.empty_like(c)
    prev[0] = 0.0
    prev[1:] = c[:-1]
    bb = c - prev
    err = (prev - (c - bb)) + (x - bb)
    return c + np.cumsum(err)


def cusum_path(series) -> np.ndarray:
    x = _values(series)
    n = x.size
    # the path is invariant to a constant, so center first
    centered = x - math.fsum(x) / n
    s = _compensated_cumsum(centered)
    k = np.arange(1, n, dtype=np.float64)
    return k * s[-1] - n * s[:-1]


# ============================
# Wilcoxon
# ============================
class OrderStatisticIndex:
    """Binary indexed tree of counts over ranks 1..size."""

    def __init__(self, size: int):
        self._n = int(size)
        self._v = [0] * (self._n + 1)
        self.total = 0

    def __len__(self) -> int:
        return self._n

    def add(self, rank: int, delta: int = 1) -> None:
        self.total += delta
        idx = int(rank)
        while idx <= self._n:
            self._v[idx] += delta
            idx += idx & -idx

    def count_le(self, rank: int) -> int:
        """Number of stored values with rank <= rank."""
        s = 0
        idx = int(rank)
        while idx > 0:
            s += self._v[idx]
            idx &= idx - 1
        return s

    def count_ge(self, rank: int) -> int:
        return self.total - self.count_le(int(rank) - 1)

    @classmethod
    def from_ranks(cls, ranks, size: int) -> "OrderStatisticIndex":
        tree = cls(size)
        for r in ranks:
            tree.add(int(r))
        return tree


def _dense_ranks(x: np.ndarray) -> Tuple[np.ndarray, int]:
    uniq, inverse = np.unique(x, return_inverse=True)
    return inverse.astype(np.int64) + 1, int(uniq.size)


def _wilcoxon_counts_fenwick(x: np.ndarray) -> np.ndarray:
    """count_k for k = 1..n-1, moving the split one index at a time.

    count_{k+1} = count_k + #{j >= k+2 : X_{k+1} <= X_j} - #{i <= k : X_i <= X_{k+1}}
    """
    n = x.size
    ranks, size = _dense_ranks(x)
    left = OrderStatisticIndex(size)
    right = OrderStatisticIndex.from_ranks(ranks, size)
    counts = np.empty(n - 1, dtype=np.int64)
    count = 0
    for m in range(n - 1):
        r = int(ranks[m])
        right.add(r, -1)
        count += right.count_ge(r) - left.count_le(r)
        left.add(r, 1)
        counts[m] = count
    return counts


def _wilcoxon_counts_rank(x: np.ndarray) -> np.ndarray:
    """count_k = sum_{i<=k} T_i - k(k+1)/2 - ties_k, vectorized.

    T_i = #{j : X_i <= X_j}; ties_k is the number of tied pairs among the
    first k values, each counted once more because <= holds both ways.
    """
    n = x.size
    order = np.argsort(x, kind="stable")
    sorted_x = x[order]
    below = np.searchsorted(sorted_x, x, side="left")
    t = n - below

    # occurrence index of each value among earlier equal values
    starts = np.empty(n, dtype=bool)
    starts[0] = True
    starts[1:] = sorted_x[1:] != sorted_x[:-1]
    group_start = np.maximum.accumulate(np.where(starts, np.arange(n), 0))
    occurrence = np.empty(n, dtype=np.int64)
    occurrence[order] = np.arange(n) - group_start

    k = np.arange(1, n, dtype=np.int64)
    return np.cumsum(t)[:-1] - k * (k + 1) // 2 - np.cumsum(occurrence)[:-1]


def wilcoxon_path(series, engine: str = "rank") -> np.ndarray:
    x = _values(series)
    n = x.size
    if engine == "rank":
        counts = _wilcoxon_counts_rank(x)
    elif engine == "fenwick":
        counts = _wilcoxon_counts_fenwick(x)
    else:
        raise InvalidParameter(f"unknown wilcoxon engine {engine!r}")
    k = np.arange(1, n, dtype=np.int64)
    return (2 * counts - k * (n - k)).astype(np.float64) / 2.0


# ============================
# Normalization
# ============================
def dn(n: int, spec: LrdSpec, exact: bool = False) -> float:
    """n^(1 - D/2), or sqrt(Var(xi_1 + ... + xi_n)) when exact."""
    n = int(n)
    if n < 1:
        raise InvalidLength(f"n must be >= 1, got {n}")
    if not exact:
        return float(n) ** (1.0 - spec.d / 2.0)
    if n == 1:
        return 1.0
    lags = np.arange(1, n, dtype=np.float64)
    rho = fgn_autocovariance(spec, lags)
    var = n + 2.0 * math.fsum((n - lags) * rho)
    return math.sqrt(var)


def make_normalization(
    n: int,
    method: Method,
    mode: Mode,
    spec: Optional[LrdSpec] = None,
    a1: float = 1.0,
    exact: bool = False,
) -> Normalization:
    method = Method(method)
    mode = Mode(mode)
    if mode is Mode.IID:
        scale = 1.0 if method is Method.CUSUM else WILCOXON_IID_SCALE
        return Normalization(n=n, method=method, mode=mode, dn=math.sqrt(n), hermite_scale=scale)
    if spec is None:
        raise InvalidParameter("LRD normalization needs an LrdSpec")
    scale = abs(float(a1)) if method is Method.CUSUM else WILCOXON_LRD_SCALE
    return Normalization(
        n=n, method=method, mode=mode, dn=dn(n, spec, exact), hermite_scale=scale, exact=exact
    )


def _check_normalization(n: int, method: Method, mode: Mode, norm: Normalization) -> None:
    if norm.method is not method or norm.mode is not mode:
        raise InconsistentNormalization(
            f"normalization built for {norm.method.value}/{norm.mode.value}, "
            f"used with {method.value}/{mode.value}"
        )
    if norm.n != n:
        raise InconsistentNormalization(f"normalization built for n={norm.n}, series has n={n}")
    if mode is Mode.IID:
        expected = 1.0 if method is Method.CUSUM else WILCOXON_IID_SCALE
        if not math.isclose(norm.dn, math.sqrt(n), rel_tol=1e-12) or not math.isclose(
            norm.hermite_scale, expected, rel_tol=1e-12
        ):
            raise InconsistentNormalization(
                f"i.i.d. {method.value} needs dn=sqrt(n) and scale={expected:.6g}"
            )


# ============================
# Test
# ============================
def extremum(path: np.ndarray, sidedness: Sidedness) -> Tuple[float, int]:
    """(max of path or |path|, smallest 1-based k attaining it)."""
    values = path if Sidedness(sidedness) is Sidedness.ONE_SIDED else np.abs(path)
    idx = int(np.argmax(values))
    return float(values[idx]), idx + 1


def test_statistic(
    series: Series,
    method: Method,
    mode: Mode,
    sidedness: Sidedness,
    norm: Normalization,
    critical_value: float = math.inf,
    hurst: Optional[float] = None,
) -> TestReport:
    method, mode, sidedness = Method(method), Mode(mode), Sidedness(sidedness)
    _check_normalization(series.n, method, mode, norm)
    path = cusum_path(series) if method is Method.CUSUM else wilcoxon_path(series)
    peak, argmax_k = extremum(path, sidedness)
    statistic = peak / norm.divisor
    path.setflags(write=False)
    return TestReport(
        method=method,
        mode=mode,
        sidedness=sidedness,
        statistic=statistic,
        raw_path=path,
        argmax_k=argmax_k,
        critical_value=float(critical_value),
        reject=bool(statistic >= critical_value),
        normalization=norm,
        hurst=hurst,
    )


# ============================
# Drift and i.i.d. critical values
# ============================
def drift_function(tau: float, lam):
    """phi_tau(lambda): lambda(1 - tau) up to tau, then (1 - lambda) tau."""
    lam = np.asarray(lam, dtype=np.float64)
    out = np.where(lam <= tau, lam * (1.0 - tau), (1.0 - lam) * tau)
    if out.ndim == 0:
        return float(out)
    return out


def expected_drift_path(n: int, change: ChangeSpec, spec: Optional[LrdSpec] = None) -> np.ndarray:
    """Shift contribution to cusum_path: h k (n - m) for k <= m, h (n - k) m after."""
    h = change.resolve_shift(n, spec)
    m = change.break_index(n)
    k = np.arange(1, n, dtype=np.float64)
    return h * np.where(k <= m, k * (n - m), (n - k) * m)


def iid_critical_value(alpha: float, sidedness: Sidedness) -> float:
    """Upper-alpha quantile of sup B (one-sided) or sup |B| (two-sided), B a Brownian bridge."""
    if not 0.0 < alpha < 1.0:
        raise InvalidParameter(f"alpha must lie in (0, 1), got {alpha}")
    if Sidedness(sidedness) is Sidedness.TWO_SIDED:
        return float(kstwobign.ppf(1.0 - alpha))
    return math.sqrt(-math.log(alpha) / 2.0)


def brute_force_paths(x) -> List[np.ndarray]:
    """O(n^3) reference paths [cusum, wilcoxon] for small n."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    cusum = np.empty(n - 1)
    wil = np.empty(n - 1)
    for k in range(1, n):
        left, right = x[:k, None], x[None, k:]
        cusum[k - 1] = float((right - left).sum())
        wil[k - 1] = float((left <= right).sum()) - k * (n - k) / 2.0
    return [cusum, wil]
