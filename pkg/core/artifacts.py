"""Files in and out: series, quantile tables, power tables, study files.

Every artifact carries schema=1, the package version, the seed and the
resolved flags. Series files put them in leading '#' lines, CSV tables in
columns, JSON documents at the top level.
"""

from __future__ import annotations

import io
import json
import math
from typing import Any, Dict, Iterable, List, Optional, TextIO

import numpy as np
import pandas as pd

from core import __version__
from core.errors import InputError, InvalidLength, StudyFileError
from core.montecarlo import (
    ANY,
    PowerCell,
    PowerStudyConfig,
    QuantileEntry,
    QuantileKey,
    QuantileTable,
)
from core.state import Method, Mode, Series, Sidedness

SCHEMA = 1

QUANTILE_COLUMNS = [
    "schema",
    "alpha",
    "hurst",
    "sample_size",
    "sidedness",
    "method",
    "transform",
    "mode",
    "critical_value",
    "replications",
    "grid_n",
    "base_seed",
    "hermite_scale",
    "estimator",
    "version",
]

POWER_COLUMNS = [
    "schema",
    "version",
    "method",
    "mode",
    "transform",
    "hurst",
    "n",
    "tau",
    "shift",
    "shift_kind",
    "resolved_shift",
    "alpha",
    "sidedness",
    "critical_value",
    "replications",
    "rejection_count",
    "power",
    "std_error",
    "base_seed",
]


def stamp(metadata: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    out: Dict[str, Any] = {"schema": SCHEMA, "version": __version__}
    out.update(metadata or {})
    return out


# ============================
# Series
# ============================
def write_series(values: Iterable[float], out: TextIO, metadata: Optional[Dict[str, Any]] = None) -> None:
    for key, value in stamp(metadata).items():
        out.write(f"# {key}={value}\n")
    for v in np.asarray(values, dtype=np.float64):
        out.write(f"{float(v):.17g}\n")


def read_series(path: str) -> Series:
    """One value per line, or a single-column CSV with an optional header row."""
    try:
        frame = pd.read_csv(path, header=None, comment="#", dtype=str, skip_blank_lines=True)
    except (OSError, UnicodeDecodeError, pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise InputError(f"cannot read series from {path}: {e}") from e
    if frame.shape[1] != 1:
        raise InputError(f"expected a single column in {path}, found {frame.shape[1]}")
    text = frame.iloc[:, 0].astype(str).str.strip()
    numeric = pd.to_numeric(text, errors="coerce")
    if len(text) and math.isnan(numeric.iloc[0]) and text.iloc[0].lower() != "nan":
        text, numeric = text.iloc[1:], numeric.iloc[1:]
    if numeric.isna().any():
        bad = text[numeric.isna()].iloc[0]
        raise InputError(f"non-numeric or NaN value {bad!r} in {path}")
    # numpy's parser round-trips %.17g exactly
    values = text.to_numpy(dtype=str).astype(np.float64)
    try:
        return Series(values)
    except InvalidLength as e:
        raise InputError(f"{path}: {e}") from e


# ============================
# Quantile tables
# ============================
def quantile_frame(table: QuantileTable) -> pd.DataFrame:
    rows = []
    for key, entry in table.items():
        rows.append(
            {
                "schema": SCHEMA,
                "alpha": key.alpha,
                "hurst": key.hurst,
                "sample_size": "inf" if key.sample_size is None else key.sample_size,
                "sidedness": key.sidedness.value,
                "method": key.method,
                "transform": key.transform,
                "mode": key.mode.value,
                "critical_value": entry.value,
                "replications": entry.replications,
                "grid_n": "" if entry.grid_n is None else entry.grid_n,
                "base_seed": entry.base_seed,
                "hermite_scale": "" if entry.hermite_scale is None else entry.hermite_scale,
                "estimator": entry.estimator,
                "version": __version__,
            }
        )
    return pd.DataFrame(rows, columns=QUANTILE_COLUMNS)


def with_flags(frame: pd.DataFrame, metadata: Optional[Dict[str, Any]]) -> pd.DataFrame:
    """Append scalar flags as constant columns; existing columns win."""
    extra = {
        k: v for k, v in (metadata or {}).items()
        if k not in frame.columns and not isinstance(v, (list, tuple, dict))
    }
    return frame.assign(**{k: [v] * len(frame) for k, v in extra.items()})


def write_quantile_table(table: QuantileTable, out: TextIO, metadata: Optional[Dict[str, Any]] = None) -> None:
    with_flags(quantile_frame(table), metadata).to_csv(out, index=False, float_format="%.17g")


def load_quantile_table(path: str) -> QuantileTable:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise InputError(f"cannot read quantile table {path}: {e}") from e
    missing = [c for c in QUANTILE_COLUMNS if c not in frame.columns]
    if missing:
        raise InputError(f"quantile table {path} lacks columns {missing}")
    table = QuantileTable()
    for _, row in frame.iterrows():
        if int(row["schema"]) != SCHEMA:
            raise InputError(f"unsupported quantile table schema {row['schema']}")
        try:
            key = QuantileKey(
                alpha=float(row["alpha"]),
                hurst=float(row["hurst"]),
                sample_size=None if row["sample_size"] == "inf" else int(row["sample_size"]),
                sidedness=Sidedness(row["sidedness"]),
                method=row["method"] or ANY,
                transform=row["transform"] or ANY,
                mode=Mode(row["mode"]),
            )
            entry = QuantileEntry(
                value=float(row["critical_value"]),
                replications=int(row["replications"]),
                base_seed=int(row["base_seed"]),
                grid_n=int(row["grid_n"]) if row["grid_n"] else None,
                hermite_scale=float(row["hermite_scale"]) if row["hermite_scale"] else None,
                estimator=row["estimator"],
            )
        except ValueError as e:
            raise InputError(f"bad quantile table row in {path}: {e}") from e
        table.add(key, entry)
    return table


# ============================
# Power tables and documents
# ============================
def power_frame(cells: Iterable[PowerCell]) -> pd.DataFrame:
    rows = []
    for cell in cells:
        row = cell.to_dict()
        row.update(schema=SCHEMA, version=__version__)
        rows.append(row)
    return pd.DataFrame(rows, columns=POWER_COLUMNS)


def write_power(cells: List[PowerCell], fmt: str, out: TextIO, config: Dict[str, Any]) -> None:
    if fmt == "json":
        write_json(stamp({"config": config, "cells": [c.to_dict() for c in cells]}), out)
    else:
        with_flags(power_frame(cells), config).to_csv(out, index=False, float_format="%.17g")


def write_records(records: List[Dict[str, Any]], fmt: str, out: TextIO, metadata: Dict[str, Any]) -> None:
    """Flat rows as CSV (metadata repeated as columns) or one JSON document."""
    if fmt == "json":
        write_json(stamp({"config": metadata, "rows": records}), out)
        return
    head = stamp({k: v for k, v in metadata.items() if not isinstance(v, (list, dict))})
    frame = pd.DataFrame([{**head, **r} for r in records])
    frame.to_csv(out, index=False, float_format="%.17g")


def write_json(payload: Dict[str, Any], out: TextIO) -> None:
    json.dump(payload, out, indent=2, sort_keys=False, default=_json_default)
    out.write("\n")


def _json_default(obj: Any):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "value"):
        return obj.value
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


# ============================
# Study files
# ============================
GRID_KEYS = ("n", "tau", "h", "c", "method")
SCALAR_KEYS = ("transform", "hurst", "reps", "alpha", "sidedness", "seed", "mode")


def parse_study(text: str) -> PowerStudyConfig:
    """key = value[, value ...] lines; '#' comments; repeated grid keys append."""
    grid: Dict[str, List[str]] = {k: [] for k in GRID_KEYS}
    scalars: Dict[str, str] = {}
    for line_no, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise StudyFileError(f"expected 'key = value', got {line!r}", line_no)
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        values = [v.strip() for v in value.split(",") if v.strip()]
        if not values:
            raise StudyFileError(f"no value for {key!r}", line_no)
        if key in grid:
            grid[key].extend(values)
        elif key in SCALAR_KEYS:
            if key in scalars or len(values) != 1:
                raise StudyFileError(f"{key!r} takes a single value", line_no)
            scalars[key] = values[0]
        else:
            raise StudyFileError(f"unknown key {key!r}", line_no)

    for required in ("n", "tau"):
        if not grid[required]:
            raise StudyFileError(f"missing required key {required!r}")
    if bool(grid["h"]) == bool(grid["c"]):
        raise StudyFileError("give exactly one of 'h' (absolute shift) or 'c' (shift constant)")

    try:
        return PowerStudyConfig(
            sample_sizes=tuple(int(v) for v in grid["n"]),
            taus=tuple(float(v) for v in grid["tau"]),
            shifts=tuple(float(v) for v in (grid["h"] or grid["c"])),
            shift_kind="absolute" if grid["h"] else "constant",
            transform=scalars.get("transform", "gaussian"),
            hurst=float(scalars.get("hurst", 0.7)),
            replications=int(scalars.get("reps", 10_000)),
            alpha=float(scalars.get("alpha", 0.05)),
            methods=tuple(Method(m.lower()) for m in grid["method"]) or (Method.CUSUM, Method.WILCOXON),
            sidedness=Sidedness(scalars.get("sidedness", Sidedness.TWO_SIDED.value)),
            base_seed=int(scalars.get("seed", 0)),
            mode=Mode(scalars.get("mode", Mode.LRD.value)),
        )
    except StudyFileError:
        raise
    except ValueError as e:
        raise StudyFileError(str(e)) from e


def load_study(path: str) -> PowerStudyConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise InputError(f"cannot read study file {path}: {e}") from e
    return parse_study(text)
