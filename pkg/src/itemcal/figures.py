"""Matplotlib figure rendering for curve data and study summaries."""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_curve_figures(rows, out_dir) -> list[str]:
    """ICC, information-determinant and guessing-information curve plots.

    Expects the row layout produced by reporting.emit_curves; one line per
    item in each figure.
    """
    os.makedirs(out_dir, exist_ok=True)
    by_item = defaultdict(list)
    for row in rows:
        by_item[row[0]].append(row)
    written = []
    specs = [
        ("icc_curves.png", 5, "probability of correct response", None),
        ("info_det_curves.png", 6, "two-point information determinant", None),
        ("info_c_curves.png", 7, "information for the guessing parameter", None),
    ]
    for fname, col, ylabel, _ in specs:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for item_id, item_rows in by_item.items():
            a, b, c = item_rows[0][1], item_rows[0][2], item_rows[0][3]
            thetas = [r[4] for r in item_rows]
            ax.plot(thetas, [r[col] for r in item_rows],
                    label=f"a={a:g}, b={b:g}, c={c:g}")
        ax.set_xlabel("latent trait")
        ax.set_ylabel(ylabel)
        ax.legend(fontsize=8)
        written.append(_save(fig, os.path.join(out_dir, fname)))
    return written


def _cells_by_a(summaries):
    by_a = defaultdict(list)
    for s in summaries:
        by_a[s.item_true.a].append(s)
    for rows in by_a.values():
        rows.sort(key=lambda s: s.item_true.b)
    return dict(sorted(by_a.items()))


def render_report_figures(summaries, out_dir, baseline=None) -> list[str]:
    """Sample-size and MSE summaries per strategy, plus a ratio chart."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    by_strategy = defaultdict(list)
    for s in summaries:
        by_strategy[s.strategy].append(s)

    for strat, rows in sorted(by_strategy.items(), key=lambda kv: kv[0].value):
        by_a = _cells_by_a(rows)
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for a, cells in by_a.items():
            ax.plot([s.item_true.b for s in cells], [s.mean_n for s in cells],
                    marker="o", label=f"a={a:g}")
        ax.set_xlabel("difficulty b")
        ax.set_ylabel("mean examinees used")
        ax.set_title(strat.value)
        ax.legend(fontsize=8)
        written.append(_save(fig, os.path.join(out_dir, f"sample_sizes_{strat.value}.png")))

        fig, axes = plt.subplots(1, 3, figsize=(11, 3.6), sharex=True)
        for ax_k, (name, getter) in zip(
            axes,
            [("MSE of a", lambda s: s.mse_a), ("MSE of b", lambda s: s.mse_b),
             ("MSE of c", lambda s: s.mse_c)],
        ):
            for a, cells in by_a.items():
                ax_k.plot([s.item_true.b for s in cells], [getter(s) for s in cells],
                          marker="o", label=f"a={a:g}")
            ax_k.set_xlabel("difficulty b")
            ax_k.set_title(name)
        axes[0].legend(fontsize=8)
        written.append(_save(fig, os.path.join(out_dir, f"mse_{strat.value}.png")))

    if baseline:
        base = {(s.item_true.a, s.item_true.b): s for s in baseline}
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for strat, rows in sorted(by_strategy.items(), key=lambda kv: kv[0].value):
            by_a = _cells_by_a(rows)
            for a, cells in by_a.items():
                pts = [
                    (s.item_true.b, base[(a, s.item_true.b)].mean_n / s.mean_n)
                    for s in cells
                    if (a, s.item_true.b) in base and s.mean_n
                ]
                if pts:
                    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="s",
                            label=f"{strat.value} a={a:g}")
        ax.axhline(1.0, color="grey", lw=0.8)
        ax.set_xlabel("difficulty b")
        ax.set_ylabel("baseline n / strategy n")
        ax.legend(fontsize=7)
        written.append(_save(fig, os.path.join(out_dir, "sample_size_ratio.png")))
    return written
