from __future__ import annotations

import json
import math

import pytest

from ransom_plots.csvio import CsvFormatError
from ransom_plots.rate import fit_rate_line, fit_rate_slope, rate_points

from conftest import write_csv


def _constant_run(tmp_path, big_t: int, value: float):
    points = [(t, value) for t in range(big_t + 1)]
    return write_csv(tmp_path / f"T{big_t}.csv", "opt__s0", 0, points)


class TestFitRateSlope:
    def test_matches_recorded_harness_fit(self, fixtures_dir) -> None:
        """The shipped expected.json slope was produced by the experiment
        harness's own regression over the very same CSVs; the re-derived fit
        must agree to 1e-9."""
        rate_dir = fixtures_dir / "rate"
        paths = sorted(rate_dir.glob("*.csv"))
        expected = json.loads((rate_dir / "expected.json").read_text())
        slope, r2 = fit_rate_slope(paths, expected["burn_in_fraction"])
        assert abs(slope - expected["slope"]) <= 1e-9
        assert abs(r2 - expected["r2"]) <= 1e-9

    def test_exact_power_law_recovers_third(self, tmp_path) -> None:
        for big_t in (64, 128, 256, 512):
            _constant_run(tmp_path, big_t, float(big_t) ** (-1.0 / 3.0))
        slope, r2 = fit_rate_slope(sorted(tmp_path.glob("*.csv")))
        assert slope == pytest.approx(-1.0 / 3.0, abs=1e-12)
        assert r2 == pytest.approx(1.0, abs=1e-12)

    def test_needs_three_distinct_lengths(self, tmp_path) -> None:
        _constant_run(tmp_path, 10, 1.0)
        _constant_run(tmp_path, 20, 0.5)
        with pytest.raises(CsvFormatError, match=">= 3 distinct"):
            fit_rate_slope(sorted(tmp_path.glob("*.csv")))

    def test_line_consistent_with_slope(self, fixtures_dir) -> None:
        paths = sorted((fixtures_dir / "rate").glob("*.csv"))
        slope, intercept, r2 = fit_rate_line(paths)
        slope2, r2_2 = fit_rate_slope(paths)
        assert (slope, r2) == (slope2, r2_2)
        assert math.isfinite(intercept)


class TestRatePoints:
    def test_one_point_per_file_excludes_init_row(self, tmp_path) -> None:
        path = write_csv(tmp_path / "run.csv", "opt__s0", 0, [(0, 99.0), (1, 2.0), (2, 4.0)])
        assert rate_points([path]) == [(2, 3.0)]

    def test_burn_in_drops_early_rows(self, tmp_path) -> None:
        points = [(t, 100.0 if t <= 5 else 1.0) for t in range(11)]
        path = write_csv(tmp_path / "run.csv", "opt__s0", 0, points)
        assert rate_points([path], burn_in_fraction=0.6)[0] == (10, 1.0)

    def test_rejects_non_positive_average(self, tmp_path) -> None:
        path = write_csv(tmp_path / "run.csv", "opt__s0", 0, [(0, 1.0), (1, 0.0)])
        with pytest.raises(CsvFormatError, match="not positive"):
            rate_points([path])

    def test_rejects_bad_burn_in(self, tmp_path) -> None:
        path = write_csv(tmp_path / "run.csv", "opt__s0", 0, [(0, 1.0), (1, 1.0)])
        with pytest.raises(CsvFormatError, match="burn_in"):
            rate_points([path], burn_in_fraction=1.0)
