"""Curve and rate figures, each saved with a JSON dump of the plotted arrays.

Rendering is read-only with respect to the inputs.  Styling is keyed by the
optimizer label alone (a label keeps its color no matter which other curves
share the figure), and the JSON dump makes repeat invocations comparable even
where image bytes are renderer-dependent.
"""
from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .csvio import CSV_COLUMNS, read_metrics_csv, run_label
from .rate import fit_rate_line, rate_points


class PlotDataError(ValueError):
    """The input CSVs cannot support the requested figure."""


_METRIC_COLUMNS = tuple(c for c in CSV_COLUMNS if c not in ("run_id", "seed", "t"))
_PALETTE = plt.colormaps["tab10"].colors


def _style(label: str):
    return _PALETTE[zlib.crc32(label.encode()) % len(_PALETTE)]


@dataclass(frozen=True)
class PlotSpec:
    inputs: tuple[str, ...]
    out: str
    metric: str = "train_loss"
    log_x: bool = False
    log_y: bool = False
    burn_in_fraction: float = 0.0


def _finalize(fig, spec: PlotSpec, payload: dict) -> dict:
    out = Path(spec.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    out.with_suffix(".json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )
    return payload


def plot_curves(spec: PlotSpec) -> dict:
    """One mean curve per optimizer label, with a +/- 1 std band across seeds."""
    if not spec.inputs:
        raise PlotDataError("no input CSVs matched")
    if spec.metric not in _METRIC_COLUMNS:
        raise PlotDataError(
            f"unknown metric column {spec.metric!r}; choose one of {_METRIC_COLUMNS}"
        )
    by_label: dict[str, list] = {}
    for path in spec.inputs:
        rows = read_metrics_csv(path)
        by_label.setdefault(run_label(rows[0].run_id), []).append(rows)

    series = []
    for label in sorted(by_label):
        runs = by_label[label]
        grid = [r.t for r in runs[0]]
        for rows in runs[1:]:
            if [r.t for r in rows] != grid:
                raise PlotDataError(f"runs for {label!r} record different step grids")
        per_run = []
        for rows in runs:
            vals = [getattr(r, spec.metric) for r in rows]
            if any(v is None for v in vals):
                raise PlotDataError(
                    f"column {spec.metric!r} is empty in run {rows[0].run_id!r}"
                )
            per_run.append(vals)
        n = len(per_run)
        mean = [math.fsum(vals) / n for vals in zip(*per_run)]
        std = None
        if n >= 2:
            std = [
                math.sqrt(math.fsum((v - m) ** 2 for v in vals) / (n - 1))
                for vals, m in zip(zip(*per_run), mean)
            ]
        series.append(
            {"label": label, "t": grid, "mean": mean, "std": std, "n_seeds": n}
        )

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for item in series:
        color = _style(item["label"])
        ax.plot(item["t"], item["mean"], label=item["label"], color=color)
        if item["std"] is not None:
            lo = [m - s for m, s in zip(item["mean"], item["std"])]
            hi = [m + s for m, s in zip(item["mean"], item["std"])]
            ax.fill_between(item["t"], lo, hi, color=color, alpha=0.25, linewidth=0)
    if spec.log_x:
        ax.set_xscale("log")
    if spec.log_y:
        ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel(spec.metric)
    ax.legend()
    fig.tight_layout()
    payload = {
        "schema_version": 1,
        "kind": "curves",
        "metric": spec.metric,
        "series": series,
    }
    return _finalize(fig, spec, payload)


def plot_rate(spec: PlotSpec) -> dict:
    """Log-log scatter of average stationarity vs run length with fitted line.

    Dashed guide lines for slopes -1/3 and -1/2 are anchored to the fitted
    line at the shortest run length.
    """
    if not spec.inputs:
        raise PlotDataError("no input CSVs matched")
    points = rate_points(spec.inputs, spec.burn_in_fraction)
    slope, intercept, r2 = fit_rate_line(spec.inputs, spec.burn_in_fraction)

    t_min = min(big_t for big_t, _ in points)
    t_max = max(big_t for big_t, _ in points)
    fit_at = lambda big_t: math.exp(intercept) * big_t**slope  # noqa: E731
    guides = {
        "-1/3": fit_at(t_min) / t_min ** (-1.0 / 3.0),
        "-1/2": fit_at(t_min) / t_min ** (-1.0 / 2.0),
    }

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.scatter(
        [p[0] for p in points], [p[1] for p in points], color=_PALETTE[0], zorder=3
    )
    ax.plot(
        [t_min, t_max],
        [fit_at(t_min), fit_at(t_max)],
        color=_PALETTE[1],
        label=f"fit: slope = {slope:.4f}",
    )
    for power, coef in ((-1.0 / 3.0, guides["-1/3"]), (-1.0 / 2.0, guides["-1/2"])):
        ax.plot(
            [t_min, t_max],
            [coef * t_min**power, coef * t_max**power],
            color="gray",
            linestyle="--" if power == -1.0 / 3.0 else ":",
            label=f"T^{{{power:.2f}}} guide",
        )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("run length T")
    ax.set_ylabel("average stationarity")
    ax.legend()
    fig.tight_layout()
    payload = {
        "schema_version": 1,
        "kind": "rate",
        "burn_in_fraction": spec.burn_in_fraction,
        "points": [
            {"file": Path(path).name, "T": big_t, "avg": avg}
            for path, (big_t, avg) in zip(spec.inputs, points)
        ],
        "slope": slope,
        "intercept": intercept,
        "r2": r2,
        "guides": guides,
    }
    return _finalize(fig, spec, payload)
