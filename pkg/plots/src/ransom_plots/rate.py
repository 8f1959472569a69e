"""Log-log rate fit: one point per run CSV, least squares over all points.

The regression is the same one the experiment harness reports in
rate_summary.json (fsum accumulation, mean-centered normal equations), so the
annotated slope here reproduces that number to floating-point noise.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

from .csvio import CsvFormatError, read_metrics_csv


def rate_points(
    csv_paths: Sequence[str | Path], burn_in_fraction: float = 0.0
) -> list[tuple[int, float]]:
    """(run length, average stationarity) per CSV, averaging rows past burn-in."""
    if not 0.0 <= burn_in_fraction < 1.0:
        raise CsvFormatError("burn_in_fraction must lie in [0, 1)")
    points = []
    for path in csv_paths:
        rows = read_metrics_csv(path)
        big_t = max(r.t for r in rows)
        if big_t < 1:
            raise CsvFormatError(f"{path}: run has no steps")
        cutoff = burn_in_fraction * big_t
        vals = [r.stationarity for r in rows if r.t >= 1 and r.t >= cutoff]
        avg = math.fsum(vals) / len(vals)
        if not avg > 0.0:
            raise CsvFormatError(f"{path}: average stationarity {avg} is not positive")
        points.append((big_t, avg))
    return points


def fit_rate_line(
    csv_paths: Sequence[str | Path], burn_in_fraction: float = 0.0
) -> tuple[float, float, float]:
    """(slope, intercept, r2) of ln(average stationarity) against ln(run length)."""
    points = rate_points(csv_paths, burn_in_fraction)
    if len({big_t for big_t, _ in points}) < 3:
        lengths = sorted({big_t for big_t, _ in points})
        raise CsvFormatError(f"rate fit needs >= 3 distinct run lengths, got {lengths}")
    xs = [math.log(float(big_t)) for big_t, _ in points]
    ys = [math.log(avg) for _, avg in points]
    n = len(xs)
    mean_x = math.fsum(xs) / n
    mean_y = math.fsum(ys) / n
    sxx = math.fsum((x - mean_x) ** 2 for x in xs)
    sxy = math.fsum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    ss_res = math.fsum((y - (intercept + slope * x)) ** 2 for x, y in zip(xs, ys))
    ss_tot = math.fsum((y - mean_y) ** 2 for y in ys)
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r2


def fit_rate_slope(
    csv_paths: Sequence[str | Path], burn_in_fraction: float = 0.0
) -> tuple[float, float]:
    """Slope and r-squared only; see fit_rate_line."""
    slope, _, r2 = fit_rate_line(csv_paths, burn_in_fraction)
    return slope, r2
