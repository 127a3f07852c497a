"""Command-line entry point.

    python changepoint.py simulate 2000 --hurst 0.7 --transform pareto31 --tau 0.5 --shift-constant 1
    python changepoint.py test --input x.txt --method wilcoxon --hurst 0.7 --critical-value 0.87
    python changepoint.py quantiles --kind finite --n 266 --n 1332 --transform pareto31
    python changepoint.py power --study study.txt --calibrate --threads 0
    python changepoint.py matched --c-w 1 --tau 0.5 --n-w 10 --n-w 50
    python changepoint.py are --transform pareto31 --d 0.6

Exit codes: 0 ok, 2 flag error, 3 input error, 4 missing critical value,
5 numeric failure.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from typing import Any, Dict, Iterator, List, Optional, TextIO

from core import __version__
from core.artifacts import (
    load_quantile_table,
    quantile_frame,
    read_series,
    load_study,
    stamp,
    write_json,
    write_power,
    write_quantile_table,
    write_records,
    write_series,
)
from core.cluster import ReplicationCluster
from core.errors import ChangePointError, InvalidLength, InvalidParameter, MissingQuantile
from core.fgn import generate_fgn
from core.hermite import QuadratureConfig, are_iid, are_lrd, compute_summary
from core.montecarlo import (
    DEFAULT_GRID,
    DEFAULT_REPS,
    QuantileEntry,
    QuantileKey,
    QuantileTable,
    asymptotic_quantile,
    calibrate,
    finite_sample_quantile,
    grid_doubling_check,
    matched_are_study,
    run_power_study,
)
from core.state import ChangeSpec, LrdSpec, Method, Mode, Sidedness
from core.stats import iid_critical_value, make_normalization, test_statistic
from core.transform import TRANSFORMS, apply_transform, get_transform, inject_shift

_log = logging.getLogger("cli")

SIDES = [s.value for s in Sidedness]
METHODS = [m.value for m in Method]
MODES = [m.value for m in Mode]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


# ============================
# OUTPUT
# ============================
@contextlib.contextmanager
def _output(path: Optional[str]) -> Iterator[TextIO]:
    if not path or path == "-":
        yield sys.stdout
        return
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        yield f


def _resolved_flags(args: argparse.Namespace) -> Dict[str, Any]:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "output", "verbose")}


# ============================
# SUBCOMMANDS
# ============================
def cmd_simulate(args: argparse.Namespace, cluster: ReplicationCluster) -> int:
    if args.n < 2:
        raise InvalidLength("n must be >= 2")
    mode = Mode(args.mode)
    spec = LrdSpec(args.hurst) if mode is Mode.LRD else None
    hurst = args.hurst if mode is Mode.LRD else 0.5
    t = get_transform(args.transform)
    if args.shift_constant is not None:
        change = ChangeSpec(tau=args.tau, shift_constant=args.shift_constant)
    else:
        change = ChangeSpec(tau=args.tau, shift=args.shift)

    noise = generate_fgn(args.n, hurst, args.seed)
    series = inject_shift(apply_transform(noise, t), change, spec)
    h = change.resolve_shift(args.n, spec)
    if args.shift_constant is not None:
        print(f"resolved shift h={h:.10g}", file=sys.stderr)

    meta = _resolved_flags(args)
    meta["resolved_shift"] = h
    with _output(args.output) as out:
        write_series(series.values, out, meta)
    return 0


def cmd_test(args: argparse.Namespace, cluster: ReplicationCluster) -> int:
    series = read_series(args.input)
    method, mode, sidedness = Method(args.method), Mode(args.mode), Sidedness(args.sidedness)
    n = series.n
    spec = LrdSpec(args.hurst) if mode is Mode.LRD else None
    t = get_transform(args.transform)
    a1 = compute_summary(t).a1 if (mode is Mode.LRD and method is Method.CUSUM) else 1.0
    norm = make_normalization(n, method, mode, spec=spec, a1=a1, exact=args.exact_dn)

    if args.critical_value is not None:
        critical = args.critical_value
    elif args.quantile_table:
        table = load_quantile_table(args.quantile_table)
        key_hurst = args.hurst if mode is Mode.LRD else 0.5
        _, entry = table.lookup(method, n, args.alpha, key_hurst, sidedness, t.name, mode)
        critical = entry.value
        if entry.hermite_scale is not None:
            # entry tabulated on another scale; move it onto norm's
            critical = entry.value * entry.hermite_scale / norm.hermite_scale
    elif mode is Mode.IID:
        critical = iid_critical_value(args.alpha, sidedness)
    else:
        raise MissingQuantile(QuantileKey(args.alpha, args.hurst, n, sidedness, method.value, t.name))

    report = test_statistic(series, method, mode, sidedness, norm, critical, hurst=args.hurst if spec else None)
    _log.info("[TEST] %s n=%d statistic=%.6f critical=%.6f reject=%s",
              method.value, n, report.statistic, critical, report.reject)

    record = report.to_dict(include_path=args.emit_path)
    with _output(args.output) as out:
        if args.format == "json":
            write_json(stamp({"config": _resolved_flags(args), "report": record}), out)
        else:
            if "path" in record:
                record["path"] = ";".join(f"{v:.17g}" for v in record["path"])
            write_records([record], "csv", out, _resolved_flags(args))
    return 0


def cmd_quantiles(args: argparse.Namespace, cluster: ReplicationCluster) -> int:
    sidedness, mode = Sidedness(args.sidedness), Mode(args.mode)
    alphas = args.alpha or [0.05]

    if args.check_grid:
        coarse, fine = grid_doubling_check(args.hurst, alphas[0], sidedness, args.grid_n, args.reps, args.seed, cluster)
        record = {
            "hurst": args.hurst, "alpha": alphas[0], "grid_n": args.grid_n,
            "q_coarse": coarse, "q_fine": fine, "difference": abs(fine - coarse),
            "stable": abs(fine - coarse) < 0.01,
        }
        with _output(args.output) as out:
            write_records([record], args.format, out, _resolved_flags(args))
        return 0

    table = QuantileTable()
    if args.kind == "asymptotic":
        for alpha in alphas:
            q = asymptotic_quantile(args.hurst, alpha, sidedness, args.grid_n, args.reps, args.seed, cluster)
            key = QuantileKey(alpha, args.hurst, None, sidedness, mode=mode)
            table.add(key, QuantileEntry(value=q, replications=args.reps, base_seed=args.seed, grid_n=args.grid_n))
    else:
        if not args.n:
            raise InvalidParameter("--n is required for finite-sample quantiles")
        method = Method(args.method)
        t = get_transform(args.transform)
        hurst = args.hurst if mode is Mode.LRD else 0.5
        for n in args.n:
            for alpha in alphas:
                q = finite_sample_quantile(
                    n, t, hurst, method, alpha, args.reps, args.seed, sidedness, mode,
                    hermite_scale=args.hermite_scale, cluster=cluster,
                )
                key = QuantileKey(alpha, hurst, n, sidedness, method.value, t.name, mode)
                table.add(key, QuantileEntry(
                    value=q, replications=args.reps, base_seed=args.seed, hermite_scale=args.hermite_scale,
                ))
    table.validate()
    with _output(args.output) as out:
        if args.format == "json":
            rows = quantile_frame(table).to_dict(orient="records")
            write_json(stamp({"config": _resolved_flags(args), "entries": rows}), out)
        else:
            write_quantile_table(table, out, _resolved_flags(args))
    return 0


def cmd_power(args: argparse.Namespace, cluster: ReplicationCluster) -> int:
    config = load_study(args.study)
    table = load_quantile_table(args.quantile_table) if args.quantile_table else QuantileTable()
    if args.calibrate:
        table = calibrate(config, table, args.calibration_reps, args.seed, args.grid_n, cluster)
    cells = run_power_study(config, table, cluster)
    meta = {**config.to_dict(), **_resolved_flags(args)}
    with _output(args.output) as out:
        write_power(cells, args.format, out, meta)
    return 0


def cmd_matched(args: argparse.Namespace, cluster: ReplicationCluster) -> int:
    table = load_quantile_table(args.quantile_table) if args.quantile_table else None
    rows = matched_are_study(
        c_w=args.c_w,
        taus=args.tau or [0.05, 0.1, 0.3, 0.5],
        n_w=args.n_w or [10, 50, 100, 200],
        hurst=args.hurst,
        transform=args.transform,
        reps=args.reps,
        seed=args.seed,
        alpha=args.alpha,
        n_c=args.n_c,
        sidedness=Sidedness(args.sidedness),
        mode=Mode(args.mode),
        quantiles=table,
        quantile_reps=args.quantile_reps,
        grid_n=args.grid_n,
        cluster=cluster,
    )
    with _output(args.output) as out:
        write_records([r.to_dict() for r in rows], args.format, out, _resolved_flags(args))
    return 0


def cmd_are(args: argparse.Namespace, cluster: ReplicationCluster) -> int:
    if args.iid:
        result = are_iid()
        record: Dict[str, Any] = {"regime": result.regime.value, "value": result.value, "b": result.b}
    else:
        if args.d is None:
            raise InvalidParameter("--d is required unless --iid is given")
        summary = compute_summary(get_transform(args.transform), QuadratureConfig(nodes=args.nodes))
        result = are_lrd(summary, args.d)
        record = {
            "regime": result.regime.value,
            "d": result.d,
            "value": result.value,
            "b": result.b,
            "transform": summary.transform,
            "a1": summary.a1,
            "j1_integral": summary.j1_integral,
            "f_sq_integral": summary.f_sq_integral,
            "shift_ratio": summary.shift_ratio,
            "a1_error": summary.a1_error,
            "f_sq_error": summary.f_sq_error,
        }
    with _output(args.output) as out:
        write_records([record], args.format, out, _resolved_flags(args))
    return 0


# ============================
# PARSER
# ============================
def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="64-bit base seed")
    common.add_argument("--threads", type=int, default=1, help="worker count, 0 = all CPUs")
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--output", type=str, default=None, help="output path (default stdout)")
    common.add_argument("--verbose", action="store_true")

    parser = _Parser(prog="changepoint", description="Change-point tests for long-memory series")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="fGn -> transform -> level shift")
    p.add_argument("n", type=int)
    p.add_argument("--hurst", type=float, default=0.7)
    p.add_argument("--mode", choices=MODES, default=Mode.LRD.value)
    p.add_argument("--transform", choices=sorted(TRANSFORMS), default="gaussian")
    p.add_argument("--tau", type=float, default=1.0)
    shift = p.add_mutually_exclusive_group()
    shift.add_argument("--shift", type=float, default=0.0, help="absolute shift h")
    shift.add_argument("--shift-constant", type=float, default=None, help="c in h = c n^(-D/2)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("test", parents=[common], help="run one test on a series file")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=METHODS, default=Method.CUSUM.value)
    p.add_argument("--mode", choices=MODES, default=Mode.LRD.value)
    p.add_argument("--hurst", type=float, default=0.7)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--sidedness", choices=SIDES, default=Sidedness.TWO_SIDED.value)
    p.add_argument("--transform", choices=sorted(TRANSFORMS), default="gaussian",
                   help="marginal used for the CUSUM |a1| scale")
    p.add_argument("--exact-dn", action="store_true")
    p.add_argument("--emit-path", action="store_true")
    crit = p.add_mutually_exclusive_group()
    crit.add_argument("--critical-value", type=float, default=None)
    crit.add_argument("--quantile-table", type=str, default=None)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("quantiles", parents=[common], help="tabulate critical values")
    p.add_argument("--kind", choices=["asymptotic", "finite"], default="asymptotic")
    p.add_argument("--hurst", type=float, default=0.7)
    p.add_argument("--alpha", type=float, action="append")
    p.add_argument("--n", type=int, action="append")
    p.add_argument("--method", choices=METHODS, default=Method.CUSUM.value)
    p.add_argument("--mode", choices=MODES, default=Mode.LRD.value)
    p.add_argument("--transform", choices=sorted(TRANSFORMS), default="gaussian")
    p.add_argument("--sidedness", choices=SIDES, default=Sidedness.TWO_SIDED.value)
    p.add_argument("--reps", type=int, default=DEFAULT_REPS)
    p.add_argument("--grid-n", type=int, default=DEFAULT_GRID)
    p.add_argument("--hermite-scale", type=float, default=None,
                   help="divide by n d_n times this instead of the canonical scale")
    p.add_argument("--check-grid", action="store_true", help="compare grid_n against 2 grid_n")
    p.set_defaults(func=cmd_quantiles)

    p = sub.add_parser("power", parents=[common], help="run a power study file")
    p.add_argument("--study", required=True)
    p.add_argument("--quantile-table", type=str, default=None)
    p.add_argument("--calibrate", action="store_true", help="simulate missing critical values")
    p.add_argument("--calibration-reps", type=int, default=DEFAULT_REPS)
    p.add_argument("--grid-n", type=int, default=DEFAULT_GRID)
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("matched", parents=[common], help="matched-sample-size power comparison")
    p.add_argument("--c-w", type=float, default=1.0)
    p.add_argument("--tau", type=float, action="append")
    p.add_argument("--n-w", type=int, action="append")
    p.add_argument("--n-c", type=int, action="append")
    p.add_argument("--hurst", type=float, default=0.7)
    p.add_argument("--transform", choices=sorted(TRANSFORMS), default="pareto31")
    p.add_argument("--mode", choices=MODES, default=Mode.LRD.value)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--sidedness", choices=SIDES, default=Sidedness.TWO_SIDED.value)
    p.add_argument("--reps", type=int, default=DEFAULT_REPS)
    p.add_argument("--quantile-table", type=str, default=None)
    p.add_argument("--quantile-reps", type=int, default=DEFAULT_REPS)
    p.add_argument("--grid-n", type=int, default=DEFAULT_GRID)
    p.set_defaults(func=cmd_matched)

    p = sub.add_parser("are", parents=[common], help="asymptotic relative efficiency")
    p.add_argument("--transform", choices=sorted(TRANSFORMS), default="gaussian")
    p.add_argument("--d", type=float, default=None)
    p.add_argument("--iid", action="store_true")
    p.add_argument("--nodes", type=int, default=QuadratureConfig.nodes)
    p.set_defaults(func=cmd_are)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="[%(name)s] %(message)s",
    )

    try:
        with ReplicationCluster(threads=args.threads) as cluster:
            return args.func(args, cluster)
    except ChangePointError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        # enum conversions of validated choices and similar flag errors
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
