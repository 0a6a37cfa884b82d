"""Tests for curve emission, summary tables, figures and the manifest."""

import csv
import os

import numpy as np
import pytest

from itemcal.figures import render_curve_figures, render_report_figures
from itemcal.harness import McSummary, Strategy, StudyConfig
from itemcal.model import ItemParams
from itemcal.reporting import (
    ESTIMATES_COLUMNS,
    STOPPING_COLUMNS,
    emit_curves,
    format_tables,
    read_full_csv,
    write_comparison_csv,
    write_csv,
    write_manifest,
    write_summary_tables,
)


def make_summary(strategy=Strategy.TWO_STAGE, a=1.0, b=0.0, mean_n=890.0, **kw):
    fields = dict(
        strategy=strategy,
        item_true=ItemParams(a, b, 0.1),
        replications=200,
        n_converged=200,
        n_nonconverged=0,
        mean_a=1.014, sd_a=0.12, mse_a=0.015,
        mean_b=-0.019, sd_b=0.179, mse_b=0.032,
        mean_c=0.102, sd_c=0.030, mse_c=0.001,
        mean_n=mean_n, sd_n=132.47,
        coverage_a=1.0, coverage_b=1.0, coverage_c=1.0, coverage_joint=0.98,
        stop_rate=1.0, c_fallback_rate=1.0,
    )
    fields.update(kw)
    return McSummary(**fields)


class TestEmitCurves:
    def test_icc_column_at_b_is_inflection(self):
        items = [ItemParams(1, 0, 0.1), ItemParams(2, 1, 0.3)]
        rows, _ = emit_curves(items, -4.0, 4.0, 0.5)
        for item_id, item in (("item0", items[0]), ("item1", items[1])):
            at_b = [r for r in rows if r[0] == item_id and abs(r[4] - item.b) < 1e-9]
            assert at_b, "grid must contain theta = b for this test setup"
            assert at_b[0][5] == pytest.approx((1 + item.c) / 2, abs=1e-12)

    def test_c_information_monotone_low_tail(self):
        rows, _ = emit_curves([ItemParams(1, 0, 0.1)], -4.0, 4.0, 0.1)
        theta = np.array([r[4] for r in rows])
        info_c = np.array([r[7] for r in rows])
        upper = theta > 0.0  # beyond the peak region the c-information decays
        assert np.all(np.diff(info_c[upper]) < 0)

    def test_det_peaks_contract_with_larger_a(self):
        items = [ItemParams(0.5, 0, 0.1), ItemParams(2.0, 0, 0.1)]
        rows, _ = emit_curves(items, -4.0, 4.0, 0.01)
        spreads = {}
        for item_id in ("item0", "item1"):
            sub = [(r[4], r[6]) for r in rows if r[0] == item_id]
            theta = np.array([s[0] for s in sub])
            det = np.array([s[1] for s in sub])
            lo = theta < 0
            hi = theta > 0
            spreads[item_id] = theta[hi][np.argmax(det[hi])] - theta[lo][np.argmax(det[lo])]
        assert spreads["item1"] < spreads["item0"]

    def test_metadata_mentions_two_point_reconstruction(self):
        _, meta = emit_curves([ItemParams(1, 0, 0.1)], -1, 1, 0.5)
        assert "two-point" in meta

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            emit_curves([ItemParams(1, 0, 0.1)], -1, 1, 0.0)


class TestSummaryTables:
    def test_estimates_header_and_rows(self, tmp_path):
        files = write_summary_tables([make_summary()], tmp_path)
        est = os.path.join(tmp_path, "estimates_TWO_STAGE.csv")
        assert est in files
        with open(est) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ESTIMATES_COLUMNS
        assert rows[0] == ["a", "b", "a_hat", "b_hat", "c_hat", "mse_a", "mse_b", "mse_c"]
        assert rows[1][:2] == ["1", "0"]
        assert float(rows[1][2]) == pytest.approx(1.014)

    def test_empty_summary_set_writes_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_csv(path, ESTIMATES_COLUMNS, [])
        assert path.read_text() == ",".join(ESTIMATES_COLUMNS) + "\n"

    def test_full_round_trip(self, tmp_path):
        originals = [make_summary(), make_summary(a=2.0, b=1.0, mean_n=3933.0)]
        write_summary_tables(originals, tmp_path)
        back = read_full_csv(os.path.join(tmp_path, "full_TWO_STAGE.csv"))
        assert len(back) == 2
        assert back[0].mean_a == pytest.approx(originals[0].mean_a)
        assert back[1].item_true == originals[1].item_true

    def test_stopping_columns(self, tmp_path):
        write_summary_tables([make_summary()], tmp_path)
        with open(os.path.join(tmp_path, "stopping_TWO_STAGE.csv")) as fh:
            header = next(csv.reader(fh))
        assert header == STOPPING_COLUMNS

    def test_six_significant_digits(self, tmp_path):
        s = make_summary(mean_n=1234.56789)
        write_summary_tables([s], tmp_path)
        with open(os.path.join(tmp_path, "stopping_TWO_STAGE.csv")) as fh:
            row = list(csv.reader(fh))[1]
        assert row[2] == "1234.57"


class TestComparisonAndTables:
    def test_ratio_column(self, tmp_path):
        two_stage = [make_summary(a=0.5, b=-2.0, mean_n=524.42)]
        random = [make_summary(strategy=Strategy.RANDOM, a=0.5, b=-2.0, mean_n=4391.78)]
        path = tmp_path / "comparison.csv"
        write_comparison_csv(two_stage, random, path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["a", "b", "n_mean", "baseline_n_mean", "n_ratio"]
        assert float(rows[1][4]) == pytest.approx(4391.78 / 524.42, rel=1e-6)

    def test_formatted_tables_show_sds_in_parentheses(self):
        text = format_tables([make_summary()])
        assert "1.014 (0.12)" in text
        assert "890 (132.47)" in text

    def test_manifest_contents(self, tmp_path):
        cfg = StudyConfig(grid=(ItemParams(1, 0, 0.1),), replications=2)
        path = tmp_path / "manifest.txt"
        write_manifest(path, cfg, extra={"nonconvergence_rate": "0"})
        text = path.read_text()
        assert "itemcal_version = " in text
        assert "master_seed = 20100501" in text
        assert "grid = 1,0,0.1" in text
        assert "nonconvergence_rate = 0" in text


class TestFigures:
    def test_curve_figures_written(self, tmp_path):
        rows, _ = emit_curves([ItemParams(1, 0, 0.1), ItemParams(2, 0, 0.1)], -3, 3, 0.2)
        files = render_curve_figures(rows, tmp_path)
        assert len(files) == 3
        for f in files:
            assert os.path.getsize(f) > 1000

    def test_report_figures_written(self, tmp_path):
        summaries = [make_summary(), make_summary(a=2.0, b=1.0, mean_n=3933.0)]
        baseline = [
            make_summary(strategy=Strategy.RANDOM, mean_n=1540.0),
            make_summary(strategy=Strategy.RANDOM, a=2.0, b=1.0, mean_n=3651.0),
        ]
        files = render_report_figures(summaries, tmp_path, baseline=baseline)
        names = {os.path.basename(f) for f in files}
        assert "sample_sizes_TWO_STAGE.png" in names
        assert "mse_TWO_STAGE.png" in names
        assert "sample_size_ratio.png" in names
        for f in files:
            assert os.path.getsize(f) > 1000
