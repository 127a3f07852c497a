from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from core.errors import InputError, InvalidLength, InvalidParameter


class Method(str, Enum):
    CUSUM = "cusum"
    WILCOXON = "wilcoxon"


class Mode(str, Enum):
    LRD = "lrd"
    IID = "iid"


class Sidedness(str, Enum):
    ONE_SIDED = "one-sided"
    TWO_SIDED = "two-sided"


def _frozen_array(values: Any) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LrdSpec:
    hurst: float
    hermite_rank: int = 1

    def __post_init__(self) -> None:
        h = float(self.hurst)
        if not (0.5 < h < 1.0):
            raise InvalidParameter(f"hurst must lie in (0.5, 1), got {self.hurst}")
        if self.hermite_rank != 1:
            raise InvalidParameter(f"only hermite_rank=1 is supported, got {self.hermite_rank}")
        object.__setattr__(self, "hurst", h)

    @classmethod
    def from_d(cls, d: float) -> "LrdSpec":
        if not (0.0 < d < 1.0):
            raise InvalidParameter(f"d must lie in (0, 1), got {d}")
        return cls(hurst=1.0 - d / 2.0)

    @property
    def d(self) -> float:
        return 2.0 - 2.0 * self.hurst


@dataclass(frozen=True)
class NoisePath:
    """One fGn draw. hurst == 0.5 is white noise and has no LrdSpec."""

    values: np.ndarray
    hurst: float
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen_array(self.values))
        if self.values.ndim != 1 or self.values.size < 2:
            raise InvalidLength(f"n must be >= 2, got {self.values.size}")

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def spec(self) -> Optional[LrdSpec]:
        return LrdSpec(self.hurst) if self.hurst > 0.5 else None


@dataclass(frozen=True)
class Series:
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = _frozen_array(self.values)
        if arr.ndim != 1:
            raise InputError(f"series must be one-dimensional, got shape {arr.shape}")
        if arr.size < 2:
            raise InvalidLength(f"n must be >= 2, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise InputError("series contains non-finite values")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def n(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class ChangeSpec:
    """Level shift after index floor(n * tau).

    Exactly one of shift (absolute h) or shift_constant (c, with
    h = c * n^(-D/2), or c * n^(-1/2) for i.i.d. data) is set.
    """

    tau: float
    shift: Optional[float] = None
    shift_constant: Optional[float] = None

    def __post_init__(self) -> None:
        if not (0.0 <= float(self.tau) <= 1.0):
            raise InvalidParameter(f"tau must lie in [0, 1], got {self.tau}")
        if (self.shift is None) == (self.shift_constant is None):
            raise InvalidParameter("exactly one of shift / shift_constant must be given")
        value = self.shift if self.shift is not None else self.shift_constant
        if not math.isfinite(float(value)):
            raise InvalidParameter(f"shift must be finite, got {value}")

    def break_index(self, n: int) -> int:
        return int(math.floor(n * self.tau))

    def resolve_shift(self, n: int, spec: Optional[LrdSpec] = None) -> float:
        if self.shift is not None:
            return float(self.shift)
        exponent = spec.d / 2.0 if spec is not None else 0.5
        return float(self.shift_constant) * float(n) ** (-exponent)


@dataclass(frozen=True)
class Normalization:
    """Denominator of the test statistic: n * dn * hermite_scale.

    In LRD mode hermite_scale is |a1| (CUSUM) or |int J1 dF| (Wilcoxon).
    In IID mode dn = sqrt(n) and hermite_scale is the sigma-scale
    (1 for CUSUM on unit-variance data, sqrt(1/12) for Wilcoxon).
    """

    n: int
    method: Method
    mode: Mode
    dn: float
    hermite_scale: float
    exact: bool = False

    def __post_init__(self) -> None:
        if not (self.dn > 0 and math.isfinite(self.dn)):
            raise InvalidParameter(f"dn must be positive, got {self.dn}")
        if not (self.hermite_scale > 0 and math.isfinite(self.hermite_scale)):
            raise InvalidParameter(f"hermite_scale must be positive, got {self.hermite_scale}")

    @property
    def divisor(self) -> float:
        return float(self.n) * self.dn * self.hermite_scale


@dataclass(frozen=True)
class TestReport:
    __test__ = False

    method: Method
    mode: Mode
    sidedness: Sidedness
    statistic: float
    raw_path: np.ndarray = field(repr=False)
    argmax_k: int
    critical_value: float
    reject: bool
    normalization: Normalization
    hurst: Optional[float] = None

    @property
    def n(self) -> int:
        return self.normalization.n

    def to_dict(self, include_path: bool = False) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "method": self.method.value,
            "mode": self.mode.value,
            "sidedness": self.sidedness.value,
            "hurst": self.hurst,
            "n": self.n,
            "statistic": self.statistic,
            "argmax_k": self.argmax_k,
            "critical_value": self.critical_value,
            "reject": self.reject,
            "dn": self.normalization.dn,
            "hermite_scale": self.normalization.hermite_scale,
            "exact_dn": self.normalization.exact,
        }
        if include_path:
            out["path"] = [float(v) for v in self.raw_path]
        return out
