"""Monte-Carlo critical values and power studies.

Every replication draws its own fGn path from a seed derived from
(base_seed, cell coordinates, replication index). Chunks of replications
are the unit of parallel work; results are concatenated in chunk order and
reduced to integer rejection counts, so the worker count never changes the
numbers.

Quantiles use the ascending order statistic at ceil((1 - alpha) * reps),
1-based.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from core.cluster import ReplicationCluster, chunk_ranges
from core.errors import InvalidParameter, MissingQuantile
from core.fgn import derive_seed, generate_fgn_values
from core.hermite import are_iid, are_lrd, compute_summary
from core.state import LrdSpec, Method, Mode, Sidedness
from core.stats import (
    WILCOXON_IID_SCALE,
    WILCOXON_LRD_SCALE,
    cusum_path,
    drift_function,
    extremum,
    iid_critical_value,
    make_normalization,
    wilcoxon_path,
)
from core.transform import GAUSSIAN, Transform, get_transform

__all__ = [
    "ESTIMATOR",
    "ANY",
    "QuantileKey",
    "QuantileEntry",
    "QuantileTable",
    "PowerStudyConfig",
    "PowerCell",
    "MatchedRow",
    "empirical_upper_quantile",
    "bridge_suprema",
    "asymptotic_quantile",
    "grid_doubling_check",
    "null_statistics",
    "finite_sample_quantile",
    "calibrate",
    "run_power_study",
    "power_matrix",
    "matched_are_study",
    "crossing_thresholds",
    "psi_curve",
    "psi_inverse",
]

_log = logging.getLogger("montecarlo")

ESTIMATOR = "order-statistic ceil((1-alpha)*reps)"
ANY = "*"
IID_HURST = 0.5
DEFAULT_GRID = 2 ** 13
DEFAULT_REPS = 10_000
MIN_GRID = 2 ** 10
MIN_REPS = 1_000

TransformLike = Union[Transform, str]


def _as_transform(t: TransformLike) -> Transform:
    return t if isinstance(t, Transform) else get_transform(t)


def _check_alpha(alpha: float, upper_closed: bool = False) -> float:
    alpha = float(alpha)
    ok = 0.0 < alpha <= 1.0 if upper_closed else 0.0 < alpha < 1.0
    if not ok:
        raise InvalidParameter(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


# ============================
# Quantile table
# ============================
@dataclass(frozen=True)
class QuantileKey:
    """sample_size None is the asymptotic (fBm bridge) entry; it has
    method and transform ANY since the limit is shared."""

    alpha: float
    hurst: float
    sample_size: Optional[int]
    sidedness: Sidedness
    method: str = ANY
    transform: str = ANY
    mode: Mode = Mode.LRD

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", round(float(self.alpha), 9))
        object.__setattr__(self, "hurst", round(float(self.hurst), 9))
        object.__setattr__(self, "sidedness", Sidedness(self.sidedness))
        object.__setattr__(self, "mode", Mode(self.mode))
        method = self.method.value if isinstance(self.method, Method) else str(self.method)
        object.__setattr__(self, "method", method)
        if self.sample_size is not None:
            object.__setattr__(self, "sample_size", int(self.sample_size))

    @property
    def asymptotic(self) -> bool:
        return self.sample_size is None

    def __str__(self) -> str:
        n = "inf" if self.sample_size is None else self.sample_size
        return (
            f"(alpha={self.alpha}, hurst={self.hurst}, n={n}, {self.sidedness.value}, "
            f"method={self.method}, transform={self.transform}, mode={self.mode.value})"
        )


@dataclass(frozen=True)
class QuantileEntry:
    value: float
    replications: int
    base_seed: int
    grid_n: Optional[int] = None
    # None: the canonical scale of the test (|a1| or |int J1 dF|)
    hermite_scale: Optional[float] = None
    estimator: str = ESTIMATOR


class QuantileTable:
    def __init__(self, entries: Optional[Dict[QuantileKey, QuantileEntry]] = None):
        self.entries: Dict[QuantileKey, QuantileEntry] = dict(entries or {})

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: QuantileKey) -> bool:
        return key in self.entries

    def items(self):
        return sorted(self.entries.items(), key=lambda kv: _key_order(kv[0]))

    def add(self, key: QuantileKey, entry: QuantileEntry) -> None:
        self.entries[key] = entry

    def get(self, key: QuantileKey) -> QuantileEntry:
        try:
            return self.entries[key]
        except KeyError:
            raise MissingQuantile(key) from None

    def lookup(
        self,
        method: Method,
        n: int,
        alpha: float,
        hurst: float,
        sidedness: Sidedness,
        transform: str,
        mode: Mode = Mode.LRD,
        allow_asymptotic: bool = True,
    ) -> Tuple[QuantileKey, QuantileEntry]:
        """Finite-sample entry for n, else the asymptotic entry when allowed."""
        finite = QuantileKey(alpha, hurst, n, sidedness, Method(method).value, transform, mode)
        if finite in self.entries:
            return finite, self.entries[finite]
        if allow_asymptotic:
            limit = QuantileKey(alpha, hurst, None, sidedness, ANY, ANY, mode)
            if limit in self.entries:
                return limit, self.entries[limit]
        raise MissingQuantile(finite)

    def validate(self) -> None:
        """Critical values strictly decrease in alpha for every fixed key remainder."""
        groups: Dict[tuple, List[Tuple[float, float]]] = {}
        for key, entry in self.entries.items():
            rest = (key.hurst, key.sample_size, key.sidedness, key.method, key.transform, key.mode)
            groups.setdefault(rest, []).append((key.alpha, entry.value))
        for rest, pairs in groups.items():
            pairs.sort()
            for (a0, v0), (a1, v1) in zip(pairs, pairs[1:]):
                if not v1 < v0:
                    raise InvalidParameter(
                        f"quantiles not decreasing in alpha for {rest}: q({a0})={v0} q({a1})={v1}"
                    )


def _key_order(key: QuantileKey):
    n = math.inf if key.sample_size is None else key.sample_size
    return (key.mode.value, key.method, key.transform, key.sidedness.value, key.hurst, n, key.alpha)


def empirical_upper_quantile(samples: np.ndarray, alpha: float) -> float:
    alpha = _check_alpha(alpha, upper_closed=True)
    ordered = np.sort(np.asarray(samples, dtype=np.float64))
    reps = ordered.size
    if reps == 0:
        raise InvalidParameter("no samples")
    idx = math.ceil(round((1.0 - alpha) * reps, 9))
    idx = min(max(idx, 1), reps)
    return float(ordered[idx - 1])


# ============================
# Fractional Brownian bridge
# ============================
@dataclass(frozen=True)
class BridgeTask:
    hurst: float
    grid_n: int
    sidedness: Sidedness
    base_seed: int
    start: int
    stop: int
    tau: Optional[float] = None
    level: Optional[float] = None


def _bridge(grid_n: int, hurst: float, seed: int) -> np.ndarray:
    """B_H(k/N) - (k/N) B_H(1) for k = 0..N."""
    increments = generate_fgn_values(grid_n, hurst, seed)
    path = np.empty(grid_n + 1)
    path[0] = 0.0
    np.cumsum(increments, out=path[1:])
    path *= float(grid_n) ** (-hurst)
    lam = np.arange(grid_n + 1, dtype=np.float64) / grid_n
    return path - lam * path[-1]


def _bridge_chunk(task: BridgeTask) -> np.ndarray:
    out = np.empty(task.stop - task.start)
    lam = np.arange(task.grid_n + 1, dtype=np.float64) / task.grid_n
    phi = drift_function(task.tau, lam) if task.tau is not None else None
    for i, r in enumerate(range(task.start, task.stop)):
        seed = derive_seed(task.base_seed, "bridge", task.hurst, task.grid_n, r)
        bridge = _bridge(task.grid_n, task.hurst, seed)
        if phi is None:
            out[i] = extremum(bridge, task.sidedness)[0]
            continue
        # smallest t >= 0 with max_k (bridge_k + t phi_k) >= level
        if bridge.max() >= task.level:
            out[i] = 0.0
            continue
        mask = phi > 0.0
        if not mask.any():
            out[i] = math.inf
            continue
        out[i] = float(np.min((task.level - bridge[mask]) / phi[mask]))
    return out


def _run_bridges(template: BridgeTask, reps: int, cluster: Optional[ReplicationCluster]) -> np.ndarray:
    tasks = [replace(template, start=lo, stop=hi) for lo, hi in chunk_ranges(reps)]
    runner = cluster or ReplicationCluster(threads=1)
    return np.concatenate(runner.map(_bridge_chunk, tasks))


def bridge_suprema(
    hurst: float,
    grid_n: int,
    reps: int,
    seed: int,
    sidedness: Sidedness = Sidedness.TWO_SIDED,
    cluster: Optional[ReplicationCluster] = None,
) -> np.ndarray:
    template = BridgeTask(float(hurst), int(grid_n), Sidedness(sidedness), int(seed), 0, 0)
    return _run_bridges(template, int(reps), cluster)


def asymptotic_quantile(
    hurst: float,
    alpha: float,
    sidedness: Sidedness = Sidedness.TWO_SIDED,
    grid_n: int = DEFAULT_GRID,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    cluster: Optional[ReplicationCluster] = None,
) -> float:
    """Upper-alpha quantile of sup (B_H(l) - l B_H(1)), or of sup |.| when two-sided."""
    alpha = _check_alpha(alpha, upper_closed=True)
    if grid_n < MIN_GRID:
        raise InvalidParameter(f"grid_n must be >= {MIN_GRID}, got {grid_n}")
    if reps < MIN_REPS:
        raise InvalidParameter(f"reps must be >= {MIN_REPS}, got {reps}")
    sups = bridge_suprema(hurst, grid_n, reps, seed, sidedness, cluster)
    q = empirical_upper_quantile(sups, alpha)
    _log.info("[MC] QUANTILE kind=asymptotic hurst=%s alpha=%s grid=%d reps=%d q=%.4f", hurst, alpha, grid_n, reps, q)
    return q


def _doubling_chunk(task: BridgeTask) -> np.ndarray:
    out = np.empty((task.stop - task.start, 2))
    for i, r in enumerate(range(task.start, task.stop)):
        seed = derive_seed(task.base_seed, "bridge", task.hurst, task.grid_n, r)
        fine = _bridge(task.grid_n, task.hurst, seed)
        # even points of the fine bridge are the coarse bridge
        out[i, 0] = extremum(fine[::2], task.sidedness)[0]
        out[i, 1] = extremum(fine, task.sidedness)[0]
    return out


def grid_doubling_check(
    hurst: float,
    alpha: float,
    sidedness: Sidedness = Sidedness.TWO_SIDED,
    grid_n: int = DEFAULT_GRID,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    cluster: Optional[ReplicationCluster] = None,
) -> Tuple[float, float]:
    """(q at grid_n, q at 2 grid_n) over the same simulated paths.

    The fine value equals asymptotic_quantile at 2 grid_n for this seed; the
    coarse one reads the same paths at every other point, so the difference
    is discretization error only.
    """
    alpha = _check_alpha(alpha, upper_closed=True)
    if grid_n < MIN_GRID:
        raise InvalidParameter(f"grid_n must be >= {MIN_GRID}, got {grid_n}")
    if reps < MIN_REPS:
        raise InvalidParameter(f"reps must be >= {MIN_REPS}, got {reps}")
    template = BridgeTask(float(hurst), 2 * int(grid_n), Sidedness(sidedness), int(seed), 0, 0)
    tasks = [replace(template, start=lo, stop=hi) for lo, hi in chunk_ranges(int(reps))]
    runner = cluster or ReplicationCluster(threads=1)
    sups = np.concatenate(runner.map(_doubling_chunk, tasks))
    coarse = empirical_upper_quantile(sups[:, 0], alpha)
    fine = empirical_upper_quantile(sups[:, 1], alpha)
    _log.info("[MC] GRID hurst=%s grid=%d q=%.4f grid=%d q=%.4f", hurst, grid_n, coarse, 2 * grid_n, fine)
    return coarse, fine


# ============================
# Series replications
# ============================
@dataclass(frozen=True)
class ReplicationTask:
    n: int
    noise_hurst: float
    transform: Transform
    methods: Tuple[Method, ...]
    sidedness: Sidedness
    divisors: Tuple[float, ...]
    base_seed: int
    cell: tuple
    shift: float = 0.0
    break_index: int = 0
    start: int = 0
    stop: int = 0


def _replication_chunk(task: ReplicationTask) -> np.ndarray:
    out = np.empty((len(task.methods), task.stop - task.start))
    for i, r in enumerate(range(task.start, task.stop)):
        seed = derive_seed(task.base_seed, *task.cell, r)
        x = task.transform.g(generate_fgn_values(task.n, task.noise_hurst, seed))
        if task.shift != 0.0 and task.break_index < task.n:
            x[task.break_index:] += task.shift
        for j, method in enumerate(task.methods):
            path = cusum_path(x) if method is Method.CUSUM else wilcoxon_path(x)
            out[j, i] = extremum(path, task.sidedness)[0] / task.divisors[j]
    return out


def _simulate(template: ReplicationTask, reps: int, cluster: Optional[ReplicationCluster]) -> np.ndarray:
    tasks = [replace(template, start=lo, stop=hi) for lo, hi in chunk_ranges(reps)]
    runner = cluster or ReplicationCluster(threads=1)
    return np.concatenate(runner.map(_replication_chunk, tasks), axis=1)


def _canonical_scale(method: Method, mode: Mode, transform: Transform) -> float:
    if mode is Mode.IID:
        return 1.0 if method is Method.CUSUM else WILCOXON_IID_SCALE
    if method is Method.CUSUM:
        return abs(compute_summary(transform).a1)
    return WILCOXON_LRD_SCALE


def _divisor(n: int, method: Method, mode: Mode, hurst: float, scale: float, exact_dn: bool = False) -> float:
    spec = LrdSpec(hurst) if mode is Mode.LRD else None
    norm = make_normalization(n, method, mode, spec=spec, exact=exact_dn)
    return n * norm.dn * scale


def null_statistics(
    n: int,
    transform: TransformLike,
    hurst: float,
    method: Method,
    reps: int,
    seed: int,
    sidedness: Sidedness = Sidedness.TWO_SIDED,
    mode: Mode = Mode.LRD,
    hermite_scale: Optional[float] = None,
    exact_dn: bool = False,
    cluster: Optional[ReplicationCluster] = None,
) -> np.ndarray:
    t = _as_transform(transform)
    method, mode, sidedness = Method(method), Mode(mode), Sidedness(sidedness)
    noise_hurst = IID_HURST if mode is Mode.IID else float(hurst)
    scale = _canonical_scale(method, mode, t) if hermite_scale is None else float(hermite_scale)
    template = ReplicationTask(
        n=int(n),
        noise_hurst=noise_hurst,
        transform=t,
        methods=(method,),
        sidedness=sidedness,
        divisors=(_divisor(int(n), method, mode, noise_hurst, scale, exact_dn),),
        base_seed=int(seed),
        # transform and method stay out of the cell: the same noise feeds every test
        cell=("null", int(n), noise_hurst),
    )
    return _simulate(template, int(reps), cluster)[0]


def finite_sample_quantile(
    n: int,
    transform: TransformLike,
    hurst: float,
    method: Method,
    alpha: float,
    reps: int,
    seed: int,
    sidedness: Sidedness = Sidedness.TWO_SIDED,
    mode: Mode = Mode.LRD,
    hermite_scale: Optional[float] = None,
    exact_dn: bool = False,
    cluster: Optional[ReplicationCluster] = None,
) -> float:
    """Upper-alpha quantile of the null statistic at sample size n.

    hermite_scale=None normalizes by n d_n times the canonical scale of the
    test; 1.0 gives the raw max|path| / (n d_n) scale.
    """
    alpha = _check_alpha(alpha, upper_closed=True)
    if reps < MIN_REPS:
        raise InvalidParameter(f"reps must be >= {MIN_REPS}, got {reps}")
    stats = null_statistics(
        n, transform, hurst, method, reps, seed, sidedness, mode, hermite_scale, exact_dn, cluster
    )
    q = empirical_upper_quantile(stats, alpha)
    _log.info(
        "[MC] QUANTILE kind=finite n=%d method=%s transform=%s alpha=%s reps=%d q=%.4f",
        n, Method(method).value, _as_transform(transform).name, alpha, reps, q,
    )
    return q


# ============================
# Power study
# ============================
@dataclass(frozen=True)
class PowerStudyConfig:
    sample_sizes: Tuple[int, ...]
    taus: Tuple[float, ...]
    shifts: Tuple[float, ...]
    shift_kind: str = "absolute"
    transform: str = "gaussian"
    hurst: float = 0.7
    replications: int = DEFAULT_REPS
    alpha: float = 0.05
    methods: Tuple[Method, ...] = (Method.CUSUM, Method.WILCOXON)
    sidedness: Sidedness = Sidedness.TWO_SIDED
    base_seed: int = 0
    mode: Mode = Mode.LRD

    def __post_init__(self) -> None:
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        object.__setattr__(self, "shifts", tuple(float(h) for h in self.shifts))
        object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))
        object.__setattr__(self, "sidedness", Sidedness(self.sidedness))
        object.__setattr__(self, "mode", Mode(self.mode))
        if not (self.sample_sizes and self.taus and self.shifts and self.methods):
            raise InvalidParameter("study grid needs at least one n, tau, shift and method")
        if any(n < 2 for n in self.sample_sizes):
            raise InvalidParameter("n must be >= 2")
        if any(not 0.0 <= t <= 1.0 for t in self.taus):
            raise InvalidParameter("all taus must lie in [0, 1]")
        if any(not math.isfinite(h) for h in self.shifts):
            raise InvalidParameter("shifts must be finite")
        if self.shift_kind not in ("absolute", "constant"):
            raise InvalidParameter(f"shift_kind must be 'absolute' or 'constant', got {self.shift_kind!r}")
        if self.replications < 1:
            raise InvalidParameter("replications must be >= 1")
        _check_alpha(self.alpha)
        get_transform(self.transform)
        if self.mode is Mode.LRD:
            LrdSpec(self.hurst)

    @property
    def noise_hurst(self) -> float:
        return IID_HURST if self.mode is Mode.IID else self.hurst

    def resolve_shift(self, n: int, shift: float) -> float:
        if self.shift_kind == "absolute":
            return shift
        exponent = 0.5 if self.mode is Mode.IID else LrdSpec(self.hurst).d / 2.0
        return shift * float(n) ** (-exponent)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["methods"] = [m.value for m in self.methods]
        out["sidedness"] = self.sidedness.value
        out["mode"] = self.mode.value
        for key in ("sample_sizes", "taus", "shifts"):
            out[key] = list(out[key])
        return out


@dataclass(frozen=True)
class PowerCell:
    method: Method
    mode: Mode
    transform: str
    hurst: float
    n: int
    tau: float
    shift: float
    resolved_shift: float
    alpha: float
    sidedness: Sidedness
    critical_value: float
    replications: int
    rejection_count: int
    base_seed: int
    shift_kind: str = "absolute"

    @property
    def power(self) -> float:
        return self.rejection_count / self.replications

    @property
    def std_error(self) -> float:
        p = self.power
        return math.sqrt(p * (1.0 - p) / self.replications)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["method"] = self.method.value
        out["mode"] = self.mode.value
        out["sidedness"] = self.sidedness.value
        out["power"] = self.power
        out["std_error"] = self.std_error
        return out


def _critical_value(
    table: Optional[QuantileTable],
    method: Method,
    n: int,
    config: PowerStudyConfig,
    allow_asymptotic: bool = True,
) -> Tuple[float, Optional[float]]:
    """(critical value, hermite_scale of the entry)."""
    if config.mode is Mode.IID:
        if table is not None:
            try:
                _, entry = table.lookup(
                    method, n, config.alpha, IID_HURST, config.sidedness,
                    config.transform, Mode.IID, allow_asymptotic=False,
                )
                return entry.value, entry.hermite_scale
            except MissingQuantile:
                pass
        return iid_critical_value(config.alpha, config.sidedness), None
    if table is None:
        raise MissingQuantile(
            QuantileKey(config.alpha, config.hurst, n, config.sidedness, method.value, config.transform)
        )
    _, entry = table.lookup(
        method, n, config.alpha, config.hurst, config.sidedness, config.transform,
        allow_asymptotic=allow_asymptotic,
    )
    return entry.value, entry.hermite_scale


def calibrate(
    config: PowerStudyConfig,
    table: Optional[QuantileTable] = None,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    grid_n: int = DEFAULT_GRID,
    cluster: Optional[ReplicationCluster] = None,
) -> QuantileTable:
    """Fill the entries a study needs: finite-sample for CUSUM, asymptotic for Wilcoxon."""
    table = table if table is not None else QuantileTable()
    if config.mode is Mode.IID:
        return table
    t = get_transform(config.transform)
    for method in config.methods:
        for n in config.sample_sizes:
            try:
                _critical_value(table, method, n, config, allow_asymptotic=method is Method.WILCOXON)
                continue
            except MissingQuantile:
                pass
            if method is Method.CUSUM:
                key = QuantileKey(config.alpha, config.hurst, n, config.sidedness, method.value, t.name)
                value = finite_sample_quantile(
                    n, t, config.hurst, method, config.alpha, reps, seed, config.sidedness, cluster=cluster
                )
                table.add(key, QuantileEntry(value=value, replications=reps, base_seed=seed))
            else:
                key = QuantileKey(config.alpha, config.hurst, None, config.sidedness)
                value = asymptotic_quantile(config.hurst, config.alpha, config.sidedness, grid_n, reps, seed, cluster)
                table.add(key, QuantileEntry(value=value, replications=reps, base_seed=seed, grid_n=grid_n))
    return table


def run_power_study(
    config: PowerStudyConfig,
    quantiles: Optional[QuantileTable] = None,
    cluster: Optional[ReplicationCluster] = None,
) -> List[PowerCell]:
    t = get_transform(config.transform)

    # resolve every critical value before simulating anything
    critical: Dict[Tuple[Method, int], Tuple[float, float]] = {}
    for method in config.methods:
        for n in config.sample_sizes:
            value, scale = _critical_value(quantiles, method, n, config)
            if scale is None:
                scale = _canonical_scale(method, config.mode, t)
            critical[(method, n)] = (value, _divisor(n, method, config.mode, config.noise_hurst, scale))

    cells: List[PowerCell] = []
    for n in config.sample_sizes:
        for tau in config.taus:
            for shift in config.shifts:
                cells.extend(_run_cell(config, t, n, tau, shift, critical, cluster))
    return cells


def _run_cell(
    config: PowerStudyConfig,
    t: Transform,
    n: int,
    tau: float,
    shift: float,
    critical: Dict[Tuple[Method, int], Tuple[float, float]],
    cluster: Optional[ReplicationCluster],
    methods: Optional[Sequence[Method]] = None,
) -> List[PowerCell]:
    methods = tuple(methods or config.methods)
    h = config.resolve_shift(n, shift)
    template = ReplicationTask(
        n=n,
        noise_hurst=config.noise_hurst,
        transform=t,
        methods=methods,
        sidedness=config.sidedness,
        divisors=tuple(critical[(m, n)][1] for m in methods),
        base_seed=config.base_seed,
        cell=("power", n, config.noise_hurst, tau, config.shift_kind, shift),
        shift=h,
        break_index=int(math.floor(n * tau)),
    )
    stats = _simulate(template, config.replications, cluster)
    cells = []
    for j, method in enumerate(methods):
        crit = critical[(method, n)][0]
        count = int(np.count_nonzero(stats[j] >= crit))
        cell = PowerCell(
            method=method,
            mode=config.mode,
            transform=t.name,
            hurst=config.hurst,
            n=n,
            tau=tau,
            shift=shift,
            resolved_shift=h,
            alpha=config.alpha,
            sidedness=config.sidedness,
            critical_value=crit,
            replications=config.replications,
            rejection_count=count,
            base_seed=config.base_seed,
            shift_kind=config.shift_kind,
        )
        _log.info(
            "[MC] CELL n=%d tau=%s h=%.4g method=%s rejects=%d/%d",
            n, tau, h, method.value, count, config.replications,
        )
        cells.append(cell)
    return cells


def power_matrix(cells: Iterable[PowerCell], method: Method) -> pd.DataFrame:
    """Power by (n, shift) rows and tau columns for one method."""
    method = Method(method)
    rows = [c.to_dict() for c in cells if c.method is method]
    if not rows:
        return pd.DataFrame()
    frame = pd.DataFrame(rows)
    return frame.pivot_table(index=["n", "shift"], columns="tau", values="power", aggfunc="first")


# ============================
# Matched sample sizes
# ============================
@dataclass(frozen=True)
class MatchedRow:
    tau: float
    n_w: int
    n_c: int
    c_w: float
    c_c: float
    wilcoxon: PowerCell
    cusum: PowerCell

    @property
    def h_w(self) -> float:
        return self.wilcoxon.resolved_shift

    @property
    def h_c(self) -> float:
        return self.cusum.resolved_shift

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "n_w": self.n_w,
            "n_c": self.n_c,
            "c_w": self.c_w,
            "c_c": self.c_c,
            "h_w": self.h_w,
            "h_c": self.h_c,
            "power_w": self.wilcoxon.power,
            "power_c": self.cusum.power,
            "std_error_w": self.wilcoxon.std_error,
            "std_error_c": self.cusum.std_error,
            "critical_w": self.wilcoxon.critical_value,
            "critical_c": self.cusum.critical_value,
        }


def matched_are_study(
    c_w: float,
    taus: Sequence[float],
    n_w: Sequence[int],
    hurst: float,
    transform: TransformLike,
    reps: int,
    seed: int,
    alpha: float = 0.05,
    n_c: Optional[Sequence[int]] = None,
    sidedness: Sidedness = Sidedness.TWO_SIDED,
    mode: Mode = Mode.LRD,
    quantiles: Optional[QuantileTable] = None,
    quantile_reps: int = DEFAULT_REPS,
    grid_n: int = DEFAULT_GRID,
    cluster: Optional[ReplicationCluster] = None,
) -> List[MatchedRow]:
    """Wilcoxon at n_W against CUSUM at n_C = ARE * n_W with equal absolute shifts.

    c_C = ratio * c_W where ratio is the shift ratio of the transform in the
    long-memory regime and 1/(2 sigma sqrt(pi)) for i.i.d. data.
    """
    t = _as_transform(transform)
    mode, sidedness = Mode(mode), Sidedness(sidedness)
    if mode is Mode.IID:
        t = GAUSSIAN
        ratio = 1.0 / (2.0 * WILCOXON_IID_SCALE * math.sqrt(math.pi))
        are = are_iid().value
    else:
        spec = LrdSpec(hurst)
        ratio = compute_summary(t).shift_ratio
        are = are_lrd(compute_summary(t), spec.d).value
    n_w = [int(n) for n in n_w]
    if n_c is None:
        n_c = [int(round(are * n)) for n in n_w]
    n_c = [int(n) for n in n_c]
    if len(n_c) != len(n_w):
        raise InvalidParameter("n_c and n_w must have the same length")
    c_c = ratio * float(c_w)
    table = quantiles if quantiles is not None else QuantileTable()

    def study(method: Method, sizes: List[int], constant: float) -> PowerStudyConfig:
        return PowerStudyConfig(
            sample_sizes=tuple(sizes), taus=tuple(taus), shifts=(constant,), shift_kind="constant",
            transform=t.name, hurst=hurst, replications=reps, alpha=alpha, methods=(method,),
            sidedness=sidedness, base_seed=seed, mode=mode,
        )

    wil_cfg = study(Method.WILCOXON, n_w, float(c_w))
    cus_cfg = study(Method.CUSUM, n_c, c_c)
    if mode is Mode.LRD:
        calibrate(cus_cfg, table, quantile_reps, derive_seed(seed, "calibrate"), grid_n, cluster)
        limit = QuantileKey(alpha, hurst, None, sidedness)
        if limit not in table:
            value = asymptotic_quantile(hurst, alpha, sidedness, grid_n, quantile_reps, derive_seed(seed, "calibrate"), cluster)
            table.add(limit, QuantileEntry(value=value, replications=quantile_reps, base_seed=seed, grid_n=grid_n))

    def critical_for(cfg: PowerStudyConfig, method: Method, n: int):
        if mode is Mode.LRD and method is Method.WILCOXON:
            entry = table.get(QuantileKey(alpha, hurst, None, sidedness))
            value, scale = entry.value, None
        else:
            value, scale = _critical_value(table, method, n, cfg, allow_asymptotic=False)
        if scale is None:
            scale = _canonical_scale(method, mode, t)
        return value, _divisor(n, method, mode, cfg.noise_hurst, scale)

    rows: List[MatchedRow] = []
    for nw, nc in zip(n_w, n_c):
        crit = {
            (Method.WILCOXON, nw): critical_for(wil_cfg, Method.WILCOXON, nw),
            (Method.CUSUM, nc): critical_for(cus_cfg, Method.CUSUM, nc),
        }
        for tau in taus:
            wil = _run_cell(wil_cfg, t, nw, float(tau), float(c_w), crit, cluster)[0]
            cus = _run_cell(cus_cfg, t, nc, float(tau), c_c, crit, cluster)[0]
            rows.append(MatchedRow(float(tau), nw, nc, float(c_w), c_c, wil, cus))
            _log.info(
                "[MC] MATCHED tau=%s n_w=%d n_c=%d power_w=%.3f power_c=%.3f",
                tau, nw, nc, wil.power, cus.power,
            )
    return rows


# ============================
# Asymptotic power curve (diagnostic)
# ============================
def crossing_thresholds(
    tau: float,
    hurst: float,
    level: float,
    grid_n: int = DEFAULT_GRID,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    cluster: Optional[ReplicationCluster] = None,
) -> np.ndarray:
    """Per bridge path, the smallest t >= 0 with sup(B + t phi_tau) >= level (one-sided)."""
    if not 0.0 <= tau <= 1.0:
        raise InvalidParameter(f"tau must lie in [0, 1], got {tau}")
    template = BridgeTask(
        float(hurst), int(grid_n), Sidedness.ONE_SIDED, int(seed), 0, 0, tau=float(tau), level=float(level)
    )
    return np.sort(_run_bridges(template, int(reps), cluster))


def psi_curve(ts: Sequence[float], thresholds: np.ndarray) -> np.ndarray:
    """psi(t) = P(sup(B + t phi_tau) >= q_alpha), estimated from crossing thresholds."""
    ordered = np.sort(np.asarray(thresholds, dtype=np.float64))
    return np.searchsorted(ordered, np.asarray(ts, dtype=np.float64), side="right") / ordered.size


def psi_inverse(beta: float, thresholds: np.ndarray) -> float:
    """Generalized inverse inf{t >= 0 : psi(t) >= beta}."""
    if not 0.0 < beta <= 1.0:
        raise InvalidParameter(f"beta must lie in (0, 1], got {beta}")
    ordered = np.sort(np.asarray(thresholds, dtype=np.float64))
    idx = min(max(math.ceil(round(beta * ordered.size, 9)), 1), ordered.size)
    return float(ordered[idx - 1])
