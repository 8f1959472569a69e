from __future__ import annotations

import json
import math

import numpy as np
import pytest

from ransom.core import ConfigError
from ransom.harness import (
    CSV_COLUMNS,
    MetricsRow,
    build_problem,
    fit_rate_slope,
    load_config,
    rate_suite,
    read_metrics_csv,
    run_experiment,
    run_single,
    summarize_csvs,
    theory_schedule,
    write_metrics_csv,
)
from ransom.problems import MatrixCompletionProblem, MlpWelschProblem, QuadraticProblem


def quad_config(**overrides) -> dict:
    doc = {
        "schema_version": 1,
        "problem": {
            "kind": "quadratic",
            "dim": 5,
            "mu": 1.0,
            "L": 5.0,
            "b_scale": 1.0,
            "problem_seed": 0,
            "noise_g": {"kind": "gaussian", "sigma": 0.5},
        },
        "optimizers": [
            {
                "kind": "ransom_e",
                "eta": 0.05,
                "beta": 0.2,
                "batch_size": 4,
                "geometry": {"kind": "l2", "rho": 1.0},
            }
        ],
        "T": 20,
        "seeds": [1],
        "eval_every": 1,
    }
    doc.update(overrides)
    return doc


class TestTheorySchedule:
    def test_pinned_values_at_million_steps(self) -> None:
        eta, beta = theory_schedule(10**6, p=2.0, q=2.0)
        assert eta == pytest.approx(1e-4, rel=1e-12)
        assert beta == pytest.approx(1e-2, rel=1e-12)

    def test_t_one_clamps_to_one(self) -> None:
        assert theory_schedule(1, 2.0, 2.0) == (1.0, 1.0)

    def test_beta_exponent_is_one_third_at_p_q_two(self) -> None:
        for big_t in (10, 1000, 12345):
            _, beta = theory_schedule(big_t, 2.0, 2.0)
            assert beta == pytest.approx(big_t ** (-1.0 / 3.0), rel=1e-12)

    def test_out_of_range_rejected(self) -> None:
        with pytest.raises(ConfigError):
            theory_schedule(100, p=1.0, q=2.0)
        with pytest.raises(ConfigError):
            theory_schedule(100, p=2.0, q=2.5)
        with pytest.raises(ConfigError):
            theory_schedule(0, p=2.0, q=2.0)


class TestMetricsCsv:
    def test_round_trip_preserves_values_and_blanks(self, tmp_path) -> None:
        rows = [
            MetricsRow("a__s1", 1, 0, 0.0, 1.5, 0.25, None, None, None, None),
            MetricsRow("a__s1", 1, 1, 0.0, 1.25, 0.125, 0.5, 1e-9, 0.01, 0.1),
        ]
        path = tmp_path / "run.csv"
        write_metrics_csv(path, rows)
        assert read_metrics_csv(path) == rows

    def test_header_lines(self, tmp_path) -> None:
        path = tmp_path / "run.csv"
        write_metrics_csv(path, [])
        lines = path.read_text().splitlines()
        assert lines[0] == "# ransom-csv v1"
        assert lines[1] == ",".join(CSV_COLUMNS)

    def test_reader_rejects_foreign_files(self, tmp_path) -> None:
        path = tmp_path / "other.csv"
        path.write_text("foo,bar\n1,2\n")
        with pytest.raises(ConfigError):
            read_metrics_csv(path)


def _slope_fixture_csv(tmp_path, name, big_t, values_by_t) -> str:
    rows = [
        MetricsRow(name, 0, t, 0.0, 1.0, stat, None, None, None, None)
        for t, stat in values_by_t
    ]
    path = tmp_path / f"{name}_T{big_t}.csv"
    write_metrics_csv(path, rows)
    return str(path)


class TestFitRateSlope:
    def test_exact_power_law_recovers_exponent(self, tmp_path) -> None:
        paths = []
        for big_t in (100, 1000, 10000):
            stat = float(big_t) ** (-1.0 / 3.0)
            rows = [(t, stat) for t in range(1, big_t + 1, max(1, big_t // 10))] + [(big_t, stat)]
            paths.append(_slope_fixture_csv(tmp_path, "exact", big_t, rows))
        slope, r2 = fit_rate_slope(paths)
        assert slope == pytest.approx(-1.0 / 3.0, abs=1e-12)
        assert r2 == pytest.approx(1.0, abs=1e-12)

    def test_constant_series_has_zero_slope(self, tmp_path) -> None:
        paths = [
            _slope_fixture_csv(tmp_path, "const", big_t, [(1, 0.7), (big_t, 0.7)])
            for big_t in (10, 100, 1000)
        ]
        slope, r2 = fit_rate_slope(paths)
        assert slope == 0.0
        assert r2 == 1.0

    def test_burn_in_drops_early_rows(self, tmp_path) -> None:
        paths = []
        for big_t in (100, 1000, 10000):
            good = float(big_t) ** (-1.0 / 3.0)
            rows = [(t, 999.0) for t in range(1, big_t // 2)] + [
                (t, good) for t in range(big_t // 2, big_t + 1, max(1, big_t // 10))
            ] + [(big_t, good)]
            paths.append(_slope_fixture_csv(tmp_path, "burn", big_t, rows))
        slope, _ = fit_rate_slope(paths, burn_in_fraction=0.5)
        assert slope == pytest.approx(-1.0 / 3.0, abs=1e-12)

    def test_requires_three_distinct_lengths(self, tmp_path) -> None:
        paths = [
            _slope_fixture_csv(tmp_path, f"few{i}", 100, [(1, 0.5), (100, 0.5)])
            for i in range(3)
        ]
        with pytest.raises(ConfigError, match="3 distinct"):
            fit_rate_slope(paths)


class TestConfigLoading:
    def test_quadratic_config_builds(self) -> None:
        cfg = load_config(quad_config())
        assert cfg.steps == 20 and cfg.seeds == (1,)
        prob = build_problem(cfg.problem)
        assert isinstance(prob, QuadraticProblem)

    def test_mlp_and_matcomp_synth_build(self) -> None:
        mlp = build_problem(
            {
                "kind": "mlp",
                "synth": {"n_samples": 60, "n_features": 8, "seed": 0},
                "hidden": [4, 3],
                "lam": 0.1,
                "test_ratio": 0.25,
                "split_seed": 0,
            }
        )
        assert isinstance(mlp, MlpWelschProblem)
        assert mlp.dataset_size == 45  # 60 minus the 15-sample test split
        mc = build_problem(
            {
                "kind": "matcomp",
                "synth": {"shape": [8, 6], "rank": 2, "noise_sigma": 0.0, "density": 0.8, "seed": 1},
                "test_ratio": 0.2,
                "split_seed": 0,
            }
        )
        assert isinstance(mc, MatrixCompletionProblem)
        assert mc.shape == (8, 6)

    def test_missing_data_file_is_config_error(self) -> None:
        with pytest.raises(ConfigError, match="not found"):
            build_problem({"kind": "mlp", "data_path": "/nonexistent/file.txt"})

    def test_schema_version_enforced(self) -> None:
        with pytest.raises(ConfigError, match="schema_version"):
            load_config(quad_config(schema_version=2))

    def test_unknown_keys_rejected(self) -> None:
        with pytest.raises(ConfigError, match="unknown keys"):
            load_config(quad_config(extra_knob=1))
        bad = quad_config()
        bad["optimizers"][0]["learning_rate"] = 0.1
        with pytest.raises(ConfigError, match="unknown keys"):
            load_config(bad)

    def test_exactly_one_step_budget(self) -> None:
        with pytest.raises(ConfigError, match="exactly one"):
            load_config(quad_config(epochs=5))  # both T and epochs
        doc = quad_config()
        del doc["T"]
        with pytest.raises(ConfigError, match="exactly one"):
            load_config(doc)

    def test_duplicate_labels_rejected(self) -> None:
        doc = quad_config()
        doc["optimizers"] = [doc["optimizers"][0], dict(doc["optimizers"][0])]
        with pytest.raises(ConfigError, match="unique"):
            load_config(doc)

    def test_config_file_round_trip(self, tmp_path) -> None:
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(quad_config()))
        assert load_config(path).steps == 20

    def test_invalid_json_reported(self, tmp_path) -> None:
        path = tmp_path / "cfg.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(path)

    def test_missing_file_reported(self) -> None:
        with pytest.raises(ConfigError, match="not found"):
            load_config("/nonexistent/cfg.json")


class TestRunExperiment:
    def test_single_step_run_layout(self, tmp_path) -> None:
        cfg = load_config(quad_config(T=1))
        run_experiment(cfg, tmp_path)
        lines = (tmp_path / "ransom_e__s1.csv").read_text().splitlines()
        assert len(lines) == 4  # comment, header, init row, one step row
        rows = read_metrics_csv(tmp_path / "ransom_e__s1.csv")
        assert [r.t for r in rows] == [0, 1]
        assert rows[0].s_t is None and rows[1].s_t is not None

    def test_repeat_run_is_byte_identical(self, tmp_path) -> None:
        cfg = load_config(quad_config(seeds=[3, 4]))
        run_experiment(cfg, tmp_path / "a")
        run_experiment(cfg, tmp_path / "b")
        for name in ("ransom_e__s3.csv", "ransom_e__s4.csv", "summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_eval_every_thins_rows_but_keeps_final(self, tmp_path) -> None:
        cfg = load_config(quad_config(T=10, eval_every=4))
        run_experiment(cfg, tmp_path)
        rows = read_metrics_csv(tmp_path / "ransom_e__s1.csv")
        assert [r.t for r in rows] == [0, 4, 8, 10]

    def test_summary_over_three_seeds_matches_manual_reduction(self, tmp_path) -> None:
        cfg = load_config(quad_config(seeds=[1, 2, 3]))
        summary = run_experiment(cfg, tmp_path)
        stats = summary["optimizers"]["ransom_e"]
        assert stats["final_stationarity"]["n"] == 3
        finals = [
            read_metrics_csv(tmp_path / f"ransom_e__s{s}.csv")[-1].stationarity
            for s in (1, 2, 3)
        ]
        mean = math.fsum(finals) / 3
        var = math.fsum((v - mean) ** 2 for v in finals) / 2
        assert stats["final_stationarity"]["mean"] == mean
        assert stats["final_stationarity"]["std"] == math.sqrt(var)
        # The written summary file is exactly the pure reduction of the CSVs.
        on_disk = json.loads((tmp_path / "summary.json").read_text())
        recomputed = summarize_csvs(sorted(tmp_path.glob("*.csv")))
        assert on_disk["optimizers"] == json.loads(json.dumps(recomputed))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")  # divergence is the point
    def test_numeric_abort_flagged_with_partial_csv(self, tmp_path) -> None:
        doc = quad_config(T=50)
        doc["optimizers"] = [
            {
                "kind": "sgdm",
                "eta": 1e200,
                "beta": 1.0,
                "batch_size": 2,
                "plain_step": True,
                "geometry": {"kind": "l2", "rho": 1.0},
            }
        ]
        summary = run_experiment(load_config(doc), tmp_path)
        assert summary["aborted_runs"] == ["sgdm__s1"]
        rows = read_metrics_csv(tmp_path / "sgdm__s1.csv")
        assert 0 < len(rows) < 52  # partial: abort happened before T

    def test_diagnostics_column_toggles(self, tmp_path) -> None:
        cfg = load_config(quad_config(T=3))
        run_experiment(cfg, tmp_path / "plain")
        run_experiment(cfg, tmp_path / "diag", diagnostics=True)
        plain = read_metrics_csv(tmp_path / "plain" / "ransom_e__s1.csv")
        diag = read_metrics_csv(tmp_path / "diag" / "ransom_e__s1.csv")
        assert all(r.momentum_error is None for r in plain)
        assert all(r.momentum_error is not None for r in diag)

    def test_worker_pool_matches_serial_bytes(self, tmp_path, monkeypatch) -> None:
        cfg = load_config(quad_config(seeds=[1, 2, 3, 4]))
        run_experiment(cfg, tmp_path / "serial")
        monkeypatch.setenv("RANSOM_THREADS", "3")
        run_experiment(cfg, tmp_path / "pooled")
        for seed in (1, 2, 3, 4):
            name = f"ransom_e__s{seed}.csv"
            assert (tmp_path / "serial" / name).read_bytes() == (
                tmp_path / "pooled" / name
            ).read_bytes()

    def test_theory_schedule_flag_overrides_eta_beta(self, tmp_path) -> None:
        cfg = load_config(quad_config(T=1000, eval_every=100))
        run_experiment(cfg, tmp_path, use_theory_schedule=True)
        rows = read_metrics_csv(tmp_path / "ransom_e__s1.csv")
        # Exponential steps have w == eta; the schedule pins eta = T^(-2/3).
        assert rows[1].w_t == pytest.approx(1000.0 ** (-2.0 / 3.0), rel=1e-12)

    def test_epochs_resolve_via_dataset_size(self, tmp_path) -> None:
        doc = {
            "schema_version": 1,
            "problem": {
                "kind": "mlp",
                "synth": {"n_samples": 40, "n_features": 6, "seed": 0},
                "hidden": [4, 3],
                "lam": 0.1,
                "test_ratio": 0.25,
                "split_seed": 0,
            },
            "optimizers": [
                {
                    "kind": "ransom_e",
                    "eta": 0.05,
                    "beta": 0.2,
                    "batch_size": 8,
                    "geometry": {"kind": "l2", "rho": 1.0},
                }
            ],
            "epochs": 2,
            "seeds": [1],
            "eval_every": 100,
        }
        run_experiment(load_config(doc), tmp_path)
        rows = read_metrics_csv(tmp_path / "ransom_e__s1.csv")
        # 30 train samples / batch 8 -> 4 steps per epoch -> 8 steps total.
        assert rows[-1].t == 8
        assert rows[-1].test_metric is not None
        assert 0.0 <= rows[-1].test_metric <= 1.0

    def test_constrained_run_logs_fw_gap(self, tmp_path) -> None:
        doc = {
            "schema_version": 1,
            "problem": {
                "kind": "matcomp",
                "synth": {"shape": [8, 6], "rank": 2, "noise_sigma": 0.0, "density": 0.8, "seed": 1},
                "test_ratio": 0.2,
                "split_seed": 0,
            },
            "optimizers": [
                {
                    "kind": "ransom_b",
                    "eta": 0.1,
                    "beta": 0.3,
                    "batch_size": 4,
                    "geometry": {"kind": "nuclear", "rho": 2.0},
                }
            ],
            "T": 10,
            "seeds": [1],
            "eval_every": 2,
        }
        run_experiment(load_config(doc), tmp_path)
        rows = read_metrics_csv(tmp_path / "ransom_b__s1.csv")
        assert all(r.stationarity >= -1e-12 for r in rows)
        assert all(r.test_metric is not None for r in rows)


class TestRateSuite:
    def test_suite_layout_and_report(self, tmp_path) -> None:
        doc = quad_config(seeds=[0, 1], eval_every=1)
        del doc["T"]
        doc["T"] = 10  # placeholder; suite overrides per length
        cfg = load_config(doc)
        report = rate_suite(cfg, (30, 60, 120), tmp_path)
        assert (tmp_path / "T30" / "ransom_e__s0.csv").exists()
        assert (tmp_path / "T120" / "summary.json").exists()
        on_disk = json.loads((tmp_path / "rate_summary.json").read_text())
        assert on_disk["slope"] == report["slope"]
        assert math.isfinite(report["slope"]) and -1.0 <= report["r2"] <= 1.0
        assert report["n_runs"] == 6

    def test_needs_three_lengths(self, tmp_path) -> None:
        cfg = load_config(quad_config())
        with pytest.raises(ConfigError, match="3 distinct"):
            rate_suite(cfg, (10, 20), tmp_path)


class TestRunSingle:
    def test_monotone_step_column(self, tmp_path) -> None:
        cfg = load_config(quad_config())
        problem = build_problem(cfg.problem)
        rows, aborted = run_single(problem, cfg.optimizers[0], 20, seed=5, eval_every=3)
        assert not aborted
        ts = [r.t for r in rows]
        assert ts == sorted(ts) and len(set(ts)) == len(ts)
        assert all(r.wall_ms == 0.0 for r in rows)
