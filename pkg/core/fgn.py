"""Exact fractional Gaussian noise by circulant embedding.

The covariance sequence rho(0..n-1) is embedded in a circulant of size
2(n-1) whose eigenvalues come from one real FFT. Samples are drawn in the
frequency domain and mapped back with irfft, so each path costs
O(n log n).

Random streams: every path is driven by its own Philox counter-based
generator keyed by a 64-bit seed. Gaussian variates are numpy's
`Generator.standard_normal` (ziggurat), which is bit-reproducible for a
fixed seed and numpy version. Replication seeds come from `derive_seed`.
"""

from __future__ import annotations

import hashlib
import logging
from functools import lru_cache
from typing import Union

import numpy as np

from core.errors import EmbeddingNotPSD, InvalidLength, InvalidParameter
from core.state import LrdSpec, NoisePath

__all__ = [
    "EIGENVALUE_FLOOR",
    "fgn_autocovariance",
    "autocovariance_sequence",
    "circulant_sqrt_eigenvalues",
    "make_rng",
    "derive_seed",
    "generate_fgn",
    "generate_fgn_values",
]

_log = logging.getLogger("fgn")

EIGENVALUE_FLOOR = 1e-9
SEED_MASK = (1 << 64) - 1

HurstLike = Union[LrdSpec, float]


def _hurst_of(spec: HurstLike) -> float:
    hurst = spec.hurst if isinstance(spec, LrdSpec) else float(spec)
    if not (0.0 < hurst < 1.0):
        raise InvalidParameter(f"hurst must lie in (0, 1), got {hurst}")
    return hurst


# ============================
# Covariance
# ============================
def fgn_autocovariance(spec: HurstLike, lag):
    """rho(k) = (|k+1|^2H - 2|k|^2H + |k-1|^2H) / 2, with rho(0) = 1."""
    hurst = _hurst_of(spec)
    k = np.abs(np.asarray(lag, dtype=np.float64))
    if np.any(np.asarray(lag) < 0):
        raise InvalidParameter("lag must be >= 0")
    two_h = 2.0 * hurst
    rho = 0.5 * ((k + 1.0) ** two_h - 2.0 * k ** two_h + np.abs(k - 1.0) ** two_h)
    rho = np.where(k == 0, 1.0, rho)
    if rho.ndim == 0:
        return float(rho)
    return rho


def autocovariance_sequence(spec: HurstLike, n: int) -> np.ndarray:
    return fgn_autocovariance(spec, np.arange(int(n)))


@lru_cache(maxsize=64)
def circulant_sqrt_eigenvalues(hurst: float, n: int) -> np.ndarray:
    """sqrt(m * lambda_j), j = 0..n-1, for the circulant of size m = 2(n-1).

    Eigenvalues in [-EIGENVALUE_FLOOR, 0) are clamped to zero; anything
    lower raises EmbeddingNotPSD.
    """
    m = 2 * (n - 1)
    rho = autocovariance_sequence(hurst, n)
    row = np.concatenate([rho, rho[-2:0:-1]])
    eig = np.fft.rfft(row).real
    lowest = float(eig.min())
    if lowest < -EIGENVALUE_FLOOR:
        raise EmbeddingNotPSD(
            f"circulant embedding has eigenvalue {lowest:.3e} for hurst={hurst} n={n}"
        )
    if lowest < 0.0:
        _log.debug("[FGN] CLAMP n=%d hurst=%s min_eig=%.3e", n, hurst, lowest)
    scale = np.sqrt(np.maximum(eig, 0.0) * m)
    scale.setflags(write=False)
    return scale


# ============================
# Seeds
# ============================
def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed) & SEED_MASK))


def derive_seed(base_seed: int, *key) -> int:
    """base_seed XOR a 64-bit digest of the key (cell coordinates, replication)."""
    payload = "|".join(repr(k) for k in key).encode("utf-8")
    digest = int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
    return (int(base_seed) & SEED_MASK) ^ digest


# ============================
# Sampling
# ============================
def generate_fgn_values(n: int, hurst: float, seed: int) -> np.ndarray:
    n = int(n)
    if n < 2:
        raise InvalidLength(f"n must be >= 2, got {n}")
    hurst = _hurst_of(hurst)
    rng = make_rng(seed)
    if hurst == 0.5:
        return rng.standard_normal(n)

    scale = circulant_sqrt_eigenvalues(hurst, n)
    m = 2 * (n - 1)
    z = rng.standard_normal(2 * n)
    spectrum = np.empty(n, dtype=np.complex128)
    spectrum.real = z[:n]
    spectrum.imag = 0.0
    # interior frequencies carry a complex Gaussian of unit total variance
    if n > 2:
        spectrum[1:-1] = (z[1:n - 1] + 1j * z[n + 1:2 * n - 1]) / np.sqrt(2.0)
    spectrum *= scale
    return np.fft.irfft(spectrum, n=m)[:n]


def generate_fgn(n: int, spec: HurstLike, seed: int) -> NoisePath:
    hurst = _hurst_of(spec)
    values = generate_fgn_values(n, hurst, seed)
    return NoisePath(values=values, hurst=hurst, seed=int(seed))
