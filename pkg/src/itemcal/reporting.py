"""Tabular outputs: curve data, per-strategy summary tables and CSV files.

All floating-point output is written with six significant digits so that
identical studies produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import math
import os

import numpy as np

from . import __version__
from .errors import ConfigError
from .harness import McSummary, Strategy
from .model import ItemParams, fisher_information_point, icc, to_gamma

ESTIMATES_COLUMNS = ["a", "b", "a_hat", "b_hat", "c_hat", "mse_a", "mse_b", "mse_c"]
STOPPING_COLUMNS = [
    "a", "b", "n_mean", "n_sd", "cov_a", "cov_b", "cov_c", "cov_joint", "n_nonconverged",
]
FULL_COLUMNS = [
    "strategy", "a", "b", "c", "replications", "n_converged", "n_nonconverged",
    "mean_a", "sd_a", "mse_a", "mean_b", "sd_b", "mse_b", "mean_c", "sd_c", "mse_c",
    "n_mean", "n_sd", "cov_a", "cov_b", "cov_c", "cov_joint", "stop_rate",
    "c_fallback_rate",
]
CURVES_COLUMNS = ["item", "a", "b", "c", "theta", "icc", "info_det_2pt", "info_c"]

# The determinant column of the information curves uses the symmetric
# two-point design {theta, 2b - theta}: a single point is rank-1 with zero
# determinant, so the two-point reconstruction is what traces the familiar
# two-peak shape.
CURVES_METADATA = (
    "det column: determinant of the summed information of the symmetric "
    "two-point design {theta, 2b - theta}; single-point matrices are rank-1."
)


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return format(float(x), ".6g")


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def emit_curves(items, theta_min: float, theta_max: float, step: float):
    """Tabulate ICC and information curves for a list of items.

    Rows carry (item id, theta, icc, two-point information determinant,
    guessing-parameter information); returns (rows, metadata note).
    """
    if step <= 0:
        raise ValueError("theta grid step must be > 0")
    thetas = np.arange(theta_min, theta_max + step / 2, step)
    rows = []
    for idx, item in enumerate(items):
        gamma = to_gamma(item)
        for th in thetas:
            th = float(th)
            m_here = fisher_information_point(gamma, th)
            m_mirror = fisher_information_point(gamma, 2 * item.b - th)
            rows.append(
                (
                    f"item{idx}",
                    item.a,
                    item.b,
                    item.c,
                    th,
                    icc(th, item),
                    float(np.linalg.det(m_here + m_mirror)),
                    float(m_here[2, 2]),
                )
            )
    return rows, CURVES_METADATA


def summary_row_estimates(s: McSummary):
    return (s.item_true.a, s.item_true.b, s.mean_a, s.mean_b, s.mean_c,
            s.mse_a, s.mse_b, s.mse_c)


def summary_row_stopping(s: McSummary):
    return (s.item_true.a, s.item_true.b, s.mean_n, s.sd_n, s.coverage_a,
            s.coverage_b, s.coverage_c, s.coverage_joint, s.n_nonconverged)


def summary_row_full(s: McSummary):
    return (s.strategy.value, s.item_true.a, s.item_true.b, s.item_true.c,
            s.replications, s.n_converged, s.n_nonconverged,
            s.mean_a, s.sd_a, s.mse_a, s.mean_b, s.sd_b, s.mse_b,
            s.mean_c, s.sd_c, s.mse_c, s.mean_n, s.sd_n,
            s.coverage_a, s.coverage_b, s.coverage_c, s.coverage_joint,
            s.stop_rate, s.c_fallback_rate)


def write_summary_tables(summaries, out_dir) -> list[str]:
    """One CSV per (strategy, table kind); returns the files written."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    by_strategy: dict[Strategy, list[McSummary]] = {}
    for s in summaries:
        by_strategy.setdefault(s.strategy, []).append(s)
    for strat, rows in sorted(by_strategy.items(), key=lambda kv: kv[0].value):
        for kind, columns, to_row in (
            ("estimates", ESTIMATES_COLUMNS, summary_row_estimates),
            ("stopping", STOPPING_COLUMNS, summary_row_stopping),
            ("full", FULL_COLUMNS, summary_row_full),
        ):
            path = os.path.join(out_dir, f"{kind}_{strat.value}.csv")
            write_csv(path, columns, [to_row(s) for s in rows])
            written.append(path)
    return written


def read_full_csv(path) -> list[McSummary]:
    """Load aggregated summaries back from a full_<strategy>.csv file."""
    summaries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != FULL_COLUMNS:
            raise ConfigError(f"{path}: unexpected columns {reader.fieldnames}")
        for rec in reader:
            summaries.append(
                McSummary(
                    strategy=Strategy(rec["strategy"]),
                    item_true=ItemParams(float(rec["a"]), float(rec["b"]), float(rec["c"])),
                    replications=int(rec["replications"]),
                    n_converged=int(rec["n_converged"]),
                    n_nonconverged=int(rec["n_nonconverged"]),
                    mean_a=float(rec["mean_a"]), sd_a=float(rec["sd_a"]),
                    mse_a=float(rec["mse_a"]),
                    mean_b=float(rec["mean_b"]), sd_b=float(rec["sd_b"]),
                    mse_b=float(rec["mse_b"]),
                    mean_c=float(rec["mean_c"]), sd_c=float(rec["sd_c"]),
                    mse_c=float(rec["mse_c"]),
                    mean_n=float(rec["n_mean"]), sd_n=float(rec["n_sd"]),
                    coverage_a=float(rec["cov_a"]), coverage_b=float(rec["cov_b"]),
                    coverage_c=float(rec["cov_c"]),
                    coverage_joint=float(rec["cov_joint"]),
                    stop_rate=float(rec["stop_rate"]),
                    c_fallback_rate=float(rec["c_fallback_rate"]),
                )
            )
    return summaries


def _est_sd(mean, sd):
    return f"{_fmt(mean)} ({_fmt(sd)})"


def format_tables(summaries, baseline=None) -> str:
    """Human-readable estimate and sample-size tables per strategy."""
    out = io.StringIO()
    by_strategy: dict[Strategy, list[McSummary]] = {}
    for s in summaries:
        by_strategy.setdefault(s.strategy, []).append(s)
    base_by_cell = {}
    if baseline:
        for s in baseline:
            base_by_cell[(s.item_true.a, s.item_true.b)] = s

    for strat, rows in sorted(by_strategy.items(), key=lambda kv: kv[0].value):
        out.write(f"== {strat.value}: parameter estimates ==\n")
        out.write(f"{'a':>5} {'b':>5} {'a_hat (sd)':>18} {'b_hat (sd)':>18} "
                  f"{'c_hat (sd)':>18} {'mse_a':>9} {'mse_b':>9} {'mse_c':>9}\n")
        for s in rows:
            out.write(
                f"{_fmt(s.item_true.a):>5} {_fmt(s.item_true.b):>5} "
                f"{_est_sd(s.mean_a, s.sd_a):>18} {_est_sd(s.mean_b, s.sd_b):>18} "
                f"{_est_sd(s.mean_c, s.sd_c):>18} {_fmt(s.mse_a):>9} "
                f"{_fmt(s.mse_b):>9} {_fmt(s.mse_c):>9}\n"
            )
        out.write(f"\n== {strat.value}: sample sizes and coverage ==\n")
        header = (f"{'a':>5} {'b':>5} {'n (sd)':>22} {'cov_a':>7} {'cov_b':>7} "
                  f"{'cov_c':>7} {'joint':>7} {'nonconv':>8}")
        if base_by_cell:
            header += f" {'n_base':>10} {'ratio':>7}"
        out.write(header + "\n")
        for s in rows:
            line = (
                f"{_fmt(s.item_true.a):>5} {_fmt(s.item_true.b):>5} "
                f"{_est_sd(s.mean_n, s.sd_n):>22} {_fmt(s.coverage_a):>7} "
                f"{_fmt(s.coverage_b):>7} {_fmt(s.coverage_c):>7} "
                f"{_fmt(s.coverage_joint):>7} {s.n_nonconverged:>8}"
            )
            base = base_by_cell.get((s.item_true.a, s.item_true.b))
            if base_by_cell:
                if base and s.mean_n:
                    line += f" {_fmt(base.mean_n):>10} {_fmt(base.mean_n / s.mean_n):>7}"
                else:
                    line += f" {'nan':>10} {'nan':>7}"
            out.write(line + "\n")
        out.write("\n")
    return out.getvalue()


def write_comparison_csv(summaries, baseline, path) -> None:
    """Sample-size ratio table: baseline mean n over strategy mean n."""
    base_by_cell = {(s.item_true.a, s.item_true.b): s for s in baseline}
    rows = []
    for s in summaries:
        base = base_by_cell.get((s.item_true.a, s.item_true.b))
        if base is None:
            continue
        ratio = base.mean_n / s.mean_n if s.mean_n else float("nan")
        rows.append((s.item_true.a, s.item_true.b, s.mean_n, base.mean_n, ratio))
    write_csv(path, ["a", "b", "n_mean", "baseline_n_mean", "n_ratio"], rows)


def write_manifest(path, cfg, extra=None) -> None:
    """Record the configuration, master seed and code version of a run."""
    lines = [f"itemcal_version = {__version__}"]
    lines.append(f"strategy = {cfg.strategy.value}")
    lines.append(f"replications = {cfg.replications}")
    lines.append(f"master_seed = {cfg.master_seed}")
    lines.append(f"threads = {cfg.threads}")
    lines.append(f"max_examinees = {cfg.max_examinees}")
    lines.append(f"max_failure_rate = {_fmt(cfg.max_failure_rate)}")
    lines.append(f"d = {_fmt(cfg.stopping.d)}")
    lines.append(f"alpha = {_fmt(cfg.stopping.alpha)}")
    lines.append(f"n0 = {cfg.stopping.n0}")
    for name in ("p0", "theta_c", "pool_min", "pool_max", "n_init_ab", "n_init_c",
                 "batch_ab", "batch_c", "dopt_batch", "random_sd"):
        lines.append(f"{name} = {_fmt(getattr(cfg.design, name))}")
    for name in ("error_scale", "error_log_exponent"):
        lines.append(f"{name} = {_fmt(getattr(cfg.pool, name))}")
    grid = ";".join(f"{_fmt(i.a)},{_fmt(i.b)},{_fmt(i.c)}" for i in cfg.grid)
    lines.append(f"grid = {grid}")
    if extra:
        for k in sorted(extra):
            lines.append(f"{k} = {extra[k]}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
