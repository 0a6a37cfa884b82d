"""Command-line interface: calibrate, mc, curves and report subcommands.

Exit codes: 0 success, 2 configuration error, 3 numerical-failure rate
above the configured threshold.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import build_study_config, load_config, parse_strategy
from .errors import CalibrationError, ConfigError
from .figures import render_curve_figures, render_report_figures
from .harness import failure_rate, run_calibration, run_monte_carlo
from .model import ItemParams
from .reporting import (
    CURVES_COLUMNS,
    emit_curves,
    format_tables,
    read_full_csv,
    write_comparison_csv,
    write_csv,
    write_manifest,
    write_summary_tables,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _parse_items(spec: str) -> list[ItemParams]:
    """Item list syntax: 'a,b,c;a,b,c;...'."""
    items = []
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        fields = [s.strip() for s in part.split(",")]
        if len(fields) != 3:
            raise ConfigError(f"item {part!r} must have exactly a,b,c")
        try:
            items.append(ItemParams(float(fields[0]), float(fields[1]), float(fields[2])))
        except ValueError as exc:
            raise ConfigError(f"invalid item {part!r}: {exc}") from exc
    if not items:
        raise ConfigError("no items given")
    return items


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="itemcal",
        description="Sequential calibration of 3PL items with a precision stopping rule.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="run a single seeded calibration")
    cal.add_argument("--a", type=float, required=True)
    cal.add_argument("--b", type=float, required=True)
    cal.add_argument("--c", type=float, default=0.1)
    cal.add_argument("--strategy", default="TWO_STAGE")
    cal.add_argument("--d", type=float, default=0.5)
    cal.add_argument("--alpha", type=float, default=0.05)
    cal.add_argument("--seed", type=int, default=1)
    cal.add_argument("--max-n", type=int, default=50_000)

    mc = sub.add_parser("mc", help="run a Monte Carlo study and write CSV tables")
    mc.add_argument("--config", help="key=value config file")
    mc.add_argument("--reps", type=int, help="override replication count")
    mc.add_argument("--strategy", help="override strategy")
    mc.add_argument("--out", required=True, help="output directory")
    mc.add_argument("--master-seed", type=int, help="override master seed")
    mc.add_argument("--threads", type=int, help="override worker count")

    cur = sub.add_parser("curves", help="tabulate ICC and information curves")
    cur.add_argument("--items", required=True, help="semicolon-separated a,b,c triples")
    cur.add_argument("--theta-min", type=float, default=-4.0)
    cur.add_argument("--theta-max", type=float, default=4.0)
    cur.add_argument("--step", type=float, default=0.05)
    cur.add_argument("--out", required=True, help="output directory")

    rep = sub.add_parser("report", help="format tables and figures from mc output")
    rep.add_argument("--in", dest="in_dir", required=True, help="mc output directory")
    rep.add_argument("--baseline", help="mc output directory of the comparison strategy")
    rep.add_argument("--out", required=True, help="output directory")
    return parser


def _cmd_calibrate(args) -> int:
    options = {"strategy": parse_strategy(args.strategy), "d": args.d,
               "alpha": args.alpha, "max_examinees": args.max_n}
    cfg = build_study_config(options)
    item = ItemParams(args.a, args.b, args.c)
    try:
        res = run_calibration(item, cfg, args.seed)
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"strategy = {cfg.strategy.value}")
    print(f"seed = {res.seed}")
    print(f"n_used = {res.n_used}")
    print(f"stopped = {res.stopped}")
    print(f"iterations = {res.n_iterations}")
    print(f"lambda_min = {res.lambda_min:.6g}")
    print(f"threshold = {cfg.stopping.threshold:.6g}")
    print(f"a_hat = {res.estimates.a:.6g}")
    print(f"b_hat = {res.estimates.b:.6g}")
    print(f"c_hat = {res.estimates.c:.6g}")
    print(f"joint_covered = {res.joint_covered}")
    print(f"covered_a, covered_b, covered_c = {res.marginal_covered}")
    return EXIT_OK


def _cmd_mc(args) -> int:
    options = load_config(args.config) if args.config else {}
    if args.reps is not None:
        options["replications"] = args.reps
    if args.strategy is not None:
        options["strategy"] = parse_strategy(args.strategy)
    if args.master_seed is not None:
        options["master_seed"] = args.master_seed
    if args.threads is not None:
        options["threads"] = args.threads
    cfg = build_study_config(options)

    summaries = run_monte_carlo(cfg)
    os.makedirs(args.out, exist_ok=True)
    written = write_summary_tables(summaries, args.out)
    rate = failure_rate(summaries)
    write_manifest(os.path.join(args.out, "manifest.txt"), cfg,
                   extra={"nonconvergence_rate": f"{rate:.6g}"})
    for path in written:
        print(f"wrote {path}")
    if rate > cfg.max_failure_rate:
        print(
            f"nonconvergence rate {rate:.3g} exceeds limit {cfg.max_failure_rate:.3g}",
            file=sys.stderr,
        )
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_curves(args) -> int:
    items = _parse_items(args.items)
    if args.step <= 0 or args.theta_max <= args.theta_min:
        raise ConfigError("need theta_min < theta_max and step > 0")
    rows, metadata = emit_curves(items, args.theta_min, args.theta_max, args.step)
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "curves.csv")
    write_csv(csv_path, CURVES_COLUMNS, rows)
    with open(os.path.join(args.out, "curves_metadata.txt"), "w") as fh:
        fh.write(metadata + "\n")
    print(f"wrote {csv_path}")
    for path in render_curve_figures(rows, args.out):
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_report(args) -> int:
    summaries = []
    for name in sorted(os.listdir(args.in_dir)):
        if name.startswith("full_") and name.endswith(".csv"):
            summaries.extend(read_full_csv(os.path.join(args.in_dir, name)))
    if not summaries:
        raise ConfigError(f"no full_<strategy>.csv files found in {args.in_dir}")
    baseline = None
    if args.baseline:
        baseline = []
        for name in sorted(os.listdir(args.baseline)):
            if name.startswith("full_") and name.endswith(".csv"):
                baseline.extend(read_full_csv(os.path.join(args.baseline, name)))
        if not baseline:
            raise ConfigError(f"no full_<strategy>.csv files found in {args.baseline}")

    os.makedirs(args.out, exist_ok=True)
    for path in write_summary_tables(summaries, args.out):
        print(f"wrote {path}")
    text = format_tables(summaries, baseline=baseline)
    tables_path = os.path.join(args.out, "tables.txt")
    with open(tables_path, "w") as fh:
        fh.write(text)
    print(f"wrote {tables_path}")
    if baseline:
        cmp_path = os.path.join(args.out, "comparison.csv")
        write_comparison_csv(summaries, baseline, cmp_path)
        print(f"wrote {cmp_path}")
    for path in render_report_figures(summaries, args.out, baseline=baseline):
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "calibrate": _cmd_calibrate,
        "mc": _cmd_mc,
        "curves": _cmd_curves,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
