"""Report files: per-(segment, measure) CSVs, the JSON summary and long-format plot data."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

from .evaluation import TOPN_METRICS, Comparison, MetricsReport, metric_columns

DECIMALS = 4


def fmt(x: float) -> str:
    return "nan" if x is None or math.isnan(x) else f"{x:.{DECIMALS}f}"


def _json_num(x: float):
    return None if x is None or math.isnan(x) else round(x, DECIMALS)


def report_filename(report: MetricsReport) -> str:
    return f"report_{report.gender.label}_{report.measure.value}.csv"


def fold_rows(report: MetricsReport) -> list[list[str]]:
    rows = []
    for f in range(len(report.fold_mae)):
        row = [str(f), fmt(report.fold_mae[f]), fmt(report.fold_fallback[f])]
        for n in report.n_values:
            row += [fmt(report.fold_topn[m][n][f]) for m in TOPN_METRICS]
        rows.append(row)
    mean = ["mean", fmt(report.mae), fmt(report.fallback_rate)]
    for n in report.n_values:
        mean += [fmt(report.topn(m, n)) for m in TOPN_METRICS]
    rows.append(mean)
    return rows


def write_report_csv(report: MetricsReport, out_dir: Path) -> Path:
    path = Path(out_dir) / report_filename(report)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["fold"] + metric_columns(report.n_values))
        w.writerows(fold_rows(report))
    return path


def plot_rows(reports: Iterable[MetricsReport]) -> Iterable[list[str]]:
    """Long-format rows ``(segment, measure, metric, n, fold, value)``.

    ``n`` is empty for MAE and the fallback rate; ``fold`` is an index or ``mean``.
    """
    for r in reports:
        seg, meas = r.gender.label, r.measure.value
        for name, folds, mean in (("mae", r.fold_mae, r.mae), ("fallback_rate", r.fold_fallback, r.fallback_rate)):
            for f, v in enumerate(folds):
                yield [seg, meas, name, "", str(f), fmt(v)]
            yield [seg, meas, name, "", "mean", fmt(mean)]
        for n in r.n_values:
            for m in TOPN_METRICS:
                for f, v in enumerate(r.fold_topn[m][n]):
                    yield [seg, meas, m, str(n), str(f), fmt(v)]
                yield [seg, meas, m, str(n), "mean", fmt(r.topn(m, n))]


def write_plot_data(reports: Sequence[MetricsReport], out_dir: Path) -> Path:
    path = Path(out_dir) / "plot_data.csv"
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["segment", "measure", "metric", "n", "fold", "value"])
        w.writerows(plot_rows(reports))
    return path


def comparison_dict(cmp: Comparison) -> dict[str, Any]:
    return {
        "grid": {m: {k: _json_num(v) for k, v in row.items()} for m, row in cmp.rows.items()},
        "mae_improvement": {m: _json_num(v) for m, v in cmp.mae_improvement.items()},
        "mae_improvement_form": "relative: (baseline_mae - trsm_mae) / baseline_mae",
    }


def write_json(doc: dict, path: Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def format_comparison(cmp: Comparison, n: int | None = None) -> str:
    """Plain-text table of a comparison for terminal output."""
    cols = ["mae"] + ([f"{m}@{n}" for m in TOPN_METRICS] if n is not None else [])
    lines = [f"[{cmp.gender.label}]  " + "  ".join(f"{c:>12}" for c in ["measure"] + cols + ["mae_gain"])]
    for meas, row in cmp.rows.items():
        gain = cmp.mae_improvement.get(meas)
        cells = [f"{meas:>12}"] + [f"{fmt(row[c]):>12}" for c in cols]
        cells.append(f"{'':>12}" if gain is None else f"{gain * 100:>11.2f}%")
        lines.append(" " * (len(cmp.gender.label) + 4) + "  ".join(cells))
    return "\n".join(lines)
