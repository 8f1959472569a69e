"""Command-line entry point: render figures from metrics CSVs.

Usage:
  ransom-plot curves --in 'out/*.csv' --metric test_metric --out fig.png
  ransom-plot rate --in 'rates/*.csv' --out rate.png

Exit codes: 0 on success, 2 for unusable input (no matches, malformed CSV,
missing column, too few run lengths).
"""
from __future__ import annotations

import argparse
import glob
import sys

from .csvio import CsvFormatError
from .figures import PlotDataError, PlotSpec, plot_curves, plot_rate


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ransom-plot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    curves = sub.add_parser("curves", help="metric-vs-step curves with seed bands")
    curves.add_argument("--in", dest="pattern", required=True, help="CSV glob")
    curves.add_argument("--metric", default="train_loss", help="CSV column to plot")
    curves.add_argument("--out", required=True, help="output image path")
    curves.add_argument("--log-x", action="store_true", help="logarithmic step axis")
    curves.add_argument("--log-y", action="store_true", help="logarithmic value axis")

    rate = sub.add_parser("rate", help="log-log stationarity vs run length")
    rate.add_argument("--in", dest="pattern", required=True, help="CSV glob")
    rate.add_argument("--out", required=True, help="output image path")
    rate.add_argument(
        "--burn-in",
        type=float,
        default=0.0,
        help="fraction of each run discarded before averaging (default 0)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    inputs = tuple(sorted(glob.glob(args.pattern)))
    if not inputs:
        print(f"error: no CSV files match {args.pattern!r}", file=sys.stderr)
        return 2
    try:
        if args.command == "curves":
            spec = PlotSpec(
                inputs=inputs,
                out=args.out,
                metric=args.metric,
                log_x=args.log_x,
                log_y=args.log_y,
            )
            plot_curves(spec)
        else:
            spec = PlotSpec(inputs=inputs, out=args.out, burn_in_fraction=args.burn_in)
            payload = plot_rate(spec)
            print(f"slope={payload['slope']} r2={payload['r2']}")
    except (CsvFormatError, PlotDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
