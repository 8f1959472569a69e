"""Plotting companion for ransom experiment output.

Reads the published ``ransom-csv v1`` metrics files and renders convergence
curves and log-log rate figures.  The package is deliberately self-contained:
it consumes the CSV contract only and never imports the optimizer code.
"""
from .csvio import CsvFormatError, MetricsRow, read_metrics_csv, run_label
from .figures import PlotDataError, PlotSpec, plot_curves, plot_rate
from .rate import fit_rate_slope, rate_points

__all__ = [
    "CsvFormatError",
    "MetricsRow",
    "PlotDataError",
    "PlotSpec",
    "fit_rate_slope",
    "plot_curves",
    "plot_rate",
    "rate_points",
    "read_metrics_csv",
    "run_label",
]
