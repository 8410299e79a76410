"""Figure rendering for bench reports.

Turns an aggregated bench result into per-metric bar charts (coverage,
interval width, RMSE), one group of bars per grid cell. Written next to
the delimited output so a report directory is self-contained.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bench import BenchResult

_METHOD_COLORS = {
    "PP_AIPW": "#1f77b4",
    "PP_IPW": "#17becf",
    "Baseline_D1": "#ff7f0e",
    "Baseline_D2": "#7f7f7f",
}
_FALLBACK_COLOR = "#2ca02c"


def _metric_figure(result: BenchResult, metric: str, title: str, path: Path,
                   nominal: float | None = None) -> None:
    cells = []
    for row in result.rows:
        key = (row.scenario, row.n, row.n_prime)
        if key not in cells:
            cells.append(key)
    methods = []
    for row in result.rows:
        if row.method not in methods:
            methods.append(row.method)
    values = {
        (row.scenario, row.n, row.n_prime, row.method): getattr(row, metric)
        for row in result.rows
    }
    fig, ax = plt.subplots(figsize=(max(6.0, 1.8 * len(cells)), 4.0))
    group_width = 0.8
    bar_width = group_width / len(methods)
    for j, method in enumerate(methods):
        xs, ys = [], []
        for i, (scenario, n, n_prime) in enumerate(cells):
            v = values.get((scenario, n, n_prime, method), math.nan)
            xs.append(i - group_width / 2 + (j + 0.5) * bar_width)
            ys.append(v)
        ax.bar(xs, ys, width=bar_width, label=method,
               color=_METHOD_COLORS.get(method, _FALLBACK_COLOR))
    if nominal is not None:
        ax.axhline(nominal, color="red", linestyle="--", linewidth=1,
                   label=f"nominal {nominal:g}")
    ax.set_xticks(range(len(cells)))
    ax.set_xticklabels([f"S{s}\nn={n}\nN'={np_}" for s, n, np_ in cells],
                       fontsize=8)
    ax.set_ylabel(title)
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_bench_figures(result: BenchResult, out_dir, prefix: str = "bench") -> list[Path]:
    """Write coverage, width, and RMSE charts; returns the created paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    alpha = result.rows[0].alpha if result.rows else 0.05
    paths = []
    specs = [
        ("coverage", "empirical coverage", 1.0 - alpha),
        ("mean_width", "mean interval width", None),
        ("rmse", "RMSE of the point estimate", None),
    ]
    for metric, title, nominal in specs:
        path = out_dir / f"{prefix}_{metric}.png"
        _metric_figure(result, metric, title, path, nominal)
        paths.append(path)
    return paths
