"""Forecast accuracy metrics and per-level relative reports.

Per-series MAE/RMSE, ratios against the base forecast, and level-wise
"mean +/- std" tables with the best method flagged per level.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .dataset import SeriesPanel
from .hierarchy import Hierarchy

Scores = dict[str, tuple[float, float]]


@dataclass(frozen=True)
class LevelStats:
    rel_mae_mean: float
    rel_mae_std: float | None
    rel_rmse_mean: float
    rel_rmse_std: float | None
    n_excluded: int


@dataclass(frozen=True)
class EvalReport:
    methods: tuple[str, ...]
    per_series: dict[str, Scores] = field(repr=False)
    per_level: dict[str, dict[int, LevelStats]] = field(repr=False)
    best: dict[tuple[str, int], str] = field(repr=False)
    levels: dict[int, list[str]] = field(repr=False)


def score(actual: SeriesPanel, forecast: SeriesPanel) -> Scores:
    """Per-series (MAE, RMSE) over the common horizon."""
    if actual.values.shape != forecast.values.shape:
        raise ValueError(
            f"panel shapes differ: {actual.values.shape} vs {forecast.values.shape}"
        )
    err = actual.values - forecast.values
    mae = np.mean(np.abs(err), axis=1)
    rmse = np.sqrt(np.mean(err**2, axis=1))
    return {
        lab: (float(mae[i]), float(rmse[i]))
        for i, lab in enumerate(actual.h.labels)
    }


def relative_report(
    base_scores: Scores, method_scores: dict[str, Scores], h: Hierarchy
) -> EvalReport:
    """Level-aggregated ratios of each method's error to the base error.

    Ratios are aggregated with the population standard deviation over the
    series of a level; level 0 (a single series) carries no std.  Series
    whose base score is zero are excluded from the aggregation and
    counted in ``n_excluded``.
    """
    levels = h.levels()
    methods = tuple(method_scores)
    per_series: dict[str, Scores] = {"base": dict(base_scores)}
    per_level: dict[str, dict[int, LevelStats]] = {}
    for name, scores_ in method_scores.items():
        if set(scores_) != set(base_scores):
            raise ValueError(f"method {name!r} scores a different label set")
        per_series[name] = dict(scores_)
        per_level[name] = {}
        for lvl, labs in levels.items():
            rel_mae, rel_rmse, excluded = [], [], 0
            for lab in labs:
                b_mae, b_rmse = base_scores[lab]
                m_mae, m_rmse = scores_[lab]
                if b_mae == 0.0 or b_rmse == 0.0:
                    excluded += 1
                    continue
                rel_mae.append(m_mae / b_mae)
                rel_rmse.append(m_rmse / b_rmse)
            if rel_mae:
                single = lvl == 0 or len(labs) == 1
                per_level[name][lvl] = LevelStats(
                    rel_mae_mean=float(np.mean(rel_mae)),
                    rel_mae_std=None if single else float(np.std(rel_mae)),
                    rel_rmse_mean=float(np.mean(rel_rmse)),
                    rel_rmse_std=None if single else float(np.std(rel_rmse)),
                    n_excluded=excluded,
                )
            else:
                per_level[name][lvl] = LevelStats(
                    float("nan"), None, float("nan"), None, excluded
                )

    best: dict[tuple[str, int], str] = {}
    for lvl in levels:
        for metric in ("mae", "rmse"):
            means = {
                name: getattr(per_level[name][lvl], f"rel_{metric}_mean")
                for name in methods
            }
            finite = {k: v for k, v in means.items() if np.isfinite(v)}
            if finite:
                best[(metric, lvl)] = min(finite, key=finite.get)
    return EvalReport(
        methods=methods,
        per_series=per_series,
        per_level=per_level,
        best=best,
        levels=levels,
    )


def _cell(mean: float, std: float | None) -> str:
    if not np.isfinite(mean):
        return "--"
    if std is None:
        return f"{mean:.3f}"
    return f"{mean:.3f} ± {std:.3f}"


def format_report(report: EvalReport) -> str:
    """Aligned plain-text tables, one per metric; '*' marks the best mean."""
    lines: list[str] = []
    for metric in ("mae", "rmse"):
        lines.append(f"relative {metric.upper()}")
        header = ["level", "base"] + list(report.methods)
        rows = []
        for lvl in sorted(report.levels):
            row = [str(lvl), "1.000"]
            for name in report.methods:
                st = report.per_level[name][lvl]
                cell = _cell(
                    getattr(st, f"rel_{metric}_mean"),
                    getattr(st, f"rel_{metric}_std"),
                )
                if report.best.get((metric, lvl)) == name:
                    cell += " *"
                row.append(cell)
            rows.append(row)
        widths = [
            max(len(r[i]) for r in [header] + rows) for i in range(len(header))
        ]
        for r in [header] + rows:
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
        lines.append("")
    return "\n".join(lines)


def save_report_csv(report: EvalReport, path: str) -> None:
    """Long-format CSV: metric, level, method, mean, std, n_excluded."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", "level", "method", "mean", "std", "n_excluded"])
        for metric in ("mae", "rmse"):
            for lvl in sorted(report.levels):
                for name in report.methods:
                    st = report.per_level[name][lvl]
                    mean = getattr(st, f"rel_{metric}_mean")
                    std = getattr(st, f"rel_{metric}_std")
                    writer.writerow(
                        [
                            metric,
                            lvl,
                            name,
                            format(mean, ".17g") if np.isfinite(mean) else "",
                            "" if std is None else format(std, ".17g"),
                            st.n_excluded,
                        ]
                    )
