"""Experiment runner: config loading, metric CSV emission, and rate fitting.

A run config is a JSON document (schema_version 1) describing one problem,
one or more optimizers, a step budget, and a seed list.  Every (optimizer,
seed) pair produces one CSV whose rows are byte-reproducible: the wall_ms
column is written as 0.0 so repeated runs of the same config are
byte-identical, and wall-clock timing is reported separately on stdout.

The summary JSON is a pure reduction of the written CSVs: every statistic in
it can be recomputed from the CSV files alone.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    ConfigError,
    NumericsError,
    make_generator,
    norm_l2,
    root_rng,
    split_rng,
)
from .data_io import (
    parse_libsvm,
    parse_movielens,
    synth_classification,
    synth_lowrank,
    train_test_split,
)
from .lmo import Geometry
from .optim import (
    _CONSTRAINED_KINDS,
    OptimizerConfig,
    OptimizerState,
    frank_wolfe_gap,
    init_state,
    momentum_error,
    optimizer_step,
)
from .problems import MatrixCompletionProblem, MlpWelschProblem, NoiseSpec, QuadraticProblem

CSV_SCHEMA = "ransom-csv v1"
CSV_COLUMNS = (
    "run_id",
    "seed",
    "t",
    "wall_ms",
    "train_loss",
    "stationarity",
    "test_metric",
    "momentum_error",
    "s_t",
    "w_t",
)


@dataclass(frozen=True)
class MetricsRow:
    run_id: str
    seed: int
    t: int
    wall_ms: float
    train_loss: float
    stationarity: float
    test_metric: float | None
    momentum_error: float | None
    s_t: float | None
    w_t: float | None


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def _parse_opt(token: str) -> float | None:
    return None if token == "" else float(token)


def write_metrics_csv(path: str | Path, rows: Sequence[MetricsRow]) -> None:
    lines = [f"# {CSV_SCHEMA}", ",".join(CSV_COLUMNS)]
    for r in rows:
        lines.append(
            ",".join(
                (
                    r.run_id,
                    str(r.seed),
                    str(r.t),
                    _fmt(r.wall_ms),
                    _fmt(r.train_loss),
                    _fmt(r.stationarity),
                    _fmt(r.test_metric),
                    _fmt(r.momentum_error),
                    _fmt(r.s_t),
                    _fmt(r.w_t),
                )
            )
        )
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_metrics_csv(path: str | Path) -> list[MetricsRow]:
    lines = Path(path).read_text().splitlines()
    if len(lines) < 2 or lines[0] != f"# {CSV_SCHEMA}":
        raise ConfigError(f"{path}: not a {CSV_SCHEMA} file")
    if lines[1] != ",".join(CSV_COLUMNS):
        raise ConfigError(f"{path}: unexpected column header")
    rows = []
    for line in lines[2:]:
        f = line.split(",")
        if len(f) != len(CSV_COLUMNS):
            raise ConfigError(f"{path}: malformed row {line!r}")
        rows.append(
            MetricsRow(
                run_id=f[0],
                seed=int(f[1]),
                t=int(f[2]),
                wall_ms=float(f[3]),
                train_loss=float(f[4]),
                stationarity=float(f[5]),
                test_metric=_parse_opt(f[6]),
                momentum_error=_parse_opt(f[7]),
                s_t=_parse_opt(f[8]),
                w_t=_parse_opt(f[9]),
            )
        )
    return rows


def _require_keys(spec: dict, allowed: set[str], where: str) -> None:
    unknown = set(spec) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _noise_from(spec: dict | None, where: str) -> NoiseSpec | None:
    if spec is None:
        return None
    _require_keys(spec, {"kind", "sigma", "tail_index"}, where)
    kwargs = {k: spec[k] for k in ("tail_index",) if k in spec}
    return NoiseSpec(spec["kind"], float(spec["sigma"]), **kwargs)


def build_problem(spec: dict):
    kind = spec.get("kind")
    if kind == "quadratic":
        _require_keys(
            spec,
            {"kind", "dim", "mu", "L", "b_scale", "x0_scale", "problem_seed", "noise_g", "noise_h"},
            "problem",
        )
        return QuadraticProblem.synthesize(
            int(spec["dim"]),
            mu=float(spec.get("mu", 1.0)),
            big_l=float(spec.get("L", 10.0)),
            rng=root_rng(int(spec.get("problem_seed", 0))),
            noise_g=_noise_from(spec.get("noise_g"), "problem.noise_g"),
            noise_h=_noise_from(spec.get("noise_h"), "problem.noise_h"),
            b_scale=float(spec.get("b_scale", 1.0)),
            x0_scale=float(spec.get("x0_scale", 1.0)),
        )
    if kind == "mlp":
        _require_keys(
            spec,
            {"kind", "data_path", "synth", "hidden", "lam", "test_ratio", "split_seed"},
            "problem",
        )
        if spec.get("data_path"):
            path = Path(spec["data_path"])
            if not path.exists():
                raise ConfigError(f"data file not found: {path}")
            data = parse_libsvm(path.read_text())
        else:
            synth = dict(spec.get("synth") or {})
            _require_keys(synth, {"n_samples", "n_features", "seed", "flip_fraction"}, "problem.synth")
            data = synth_classification(
                int(synth.get("n_samples", 3000)),
                n_features=int(synth.get("n_features", 60)),
                seed=int(synth.get("seed", 0)),
                flip_fraction=float(synth.get("flip_fraction", 0.05)),
            )
        train, test = train_test_split(
            data.n_samples, float(spec.get("test_ratio", 0.25)), int(spec.get("split_seed", 0))
        )
        return MlpWelschProblem(
            data.features[train],
            data.labels[train],
            x_test=data.features[test],
            y_test=data.labels[test],
            hidden=tuple(int(h) for h in spec.get("hidden", (32, 16))),
            lam=float(spec.get("lam", 0.1)),
        )
    if kind == "matcomp":
        _require_keys(
            spec,
            {"kind", "data_path", "top_users", "top_items", "synth", "test_ratio", "split_seed"},
            "problem",
        )
        if spec.get("data_path"):
            path = Path(spec["data_path"])
            if not path.exists():
                raise ConfigError(f"data file not found: {path}")
            table = parse_movielens(
                path.read_text(),
                top_users=int(spec.get("top_users", 100)),
                top_items=int(spec.get("top_items", 200)),
            )
            shape = (table.n_users, table.n_items)
            rows, cols, vals = table.user_index, table.item_index, table.rating
        else:
            synth = dict(spec.get("synth") or {})
            _require_keys(
                synth, {"shape", "rank", "noise_sigma", "density", "seed"}, "problem.synth"
            )
            shape = tuple(int(v) for v in synth.get("shape", (100, 200)))
            matrix, mask = synth_lowrank(
                shape,
                rank=int(synth.get("rank", 5)),
                noise_sigma=float(synth.get("noise_sigma", 0.05)),
                rng=root_rng(int(synth.get("seed", 0))),
                density=float(synth.get("density", 0.3)),
            )
            rows, cols = np.nonzero(mask)
            vals = matrix[rows, cols]
        train, test = train_test_split(
            len(vals), float(spec.get("test_ratio", 0.2)), int(spec.get("split_seed", 0))
        )
        return MatrixCompletionProblem(
            shape,
            (rows[train], cols[train], vals[train]),
            test=(rows[test], cols[test], vals[test]),
        )
    raise ConfigError(f"unknown problem kind {kind!r}")


_GEOMETRY_KEYS = {"kind", "rho", "ns_iters", "power_tol", "power_max_iters"}
_OPTIMIZER_KEYS = {
    "kind",
    "name",
    "geometry",
    "eta",
    "beta",
    "batch_size",
    "init_batch",
    "eta_decay",
    "hvp_strategy",
    "plain_step",
    "randomize_step",
    "correction_enabled",
    "som_unif_fresh_batch",
    "check_feasibility",
    "feasibility_tol",
}


def build_optimizer_config(spec: dict) -> OptimizerConfig:
    _require_keys(spec, _OPTIMIZER_KEYS, "optimizer")
    geom_spec = spec.get("geometry")
    if not isinstance(geom_spec, dict):
        raise ConfigError("optimizer needs a geometry object")
    _require_keys(geom_spec, _GEOMETRY_KEYS, "optimizer.geometry")
    geometry = Geometry(
        geom_spec["kind"],
        float(geom_spec["rho"]),
        ns_iters=int(geom_spec.get("ns_iters", 8)),
        power_tol=float(geom_spec.get("power_tol", 1e-10)),
        power_max_iters=int(geom_spec.get("power_max_iters", 500)),
    )
    kwargs = {k: spec[k] for k in _OPTIMIZER_KEYS - {"kind", "geometry"} if k in spec}
    return OptimizerConfig(kind=spec["kind"], geometry=geometry, **kwargs)


@dataclass(frozen=True)
class RunConfig:
    problem: dict
    optimizers: tuple[OptimizerConfig, ...]
    seeds: tuple[int, ...]
    steps: int | None = None
    epochs: int | None = None
    eval_every: int = 1
    output_dir: str | None = None
    theory: dict | None = None  # inert annotations: p, q, noise/smoothness labels

    def __post_init__(self):
        if (self.steps is None) == (self.epochs is None):
            raise ConfigError("config needs exactly one of T (steps) or epochs")
        if self.steps is not None and self.steps < 1:
            raise ConfigError("T must be at least 1")
        if self.epochs is not None and self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be at least 1")
        if not self.optimizers:
            raise ConfigError("config needs at least one optimizer")
        labels = [o.label for o in self.optimizers]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"optimizer labels must be unique, got {labels}")
        for label in labels:
            if not all(c.isalnum() or c in "_-" for c in label):
                raise ConfigError(f"optimizer label {label!r} has characters unsafe for run ids")


_CONFIG_KEYS = {
    "schema_version",
    "problem",
    "optimizers",
    "T",
    "epochs",
    "seeds",
    "eval_every",
    "output_dir",
    "theory",
}


def load_config(source: str | Path | dict) -> RunConfig:
    if isinstance(source, dict):
        doc = source
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _require_keys(doc, _CONFIG_KEYS, "config")
    if doc.get("schema_version") != 1:
        raise ConfigError(f"unsupported schema_version {doc.get('schema_version')!r}")
    if not isinstance(doc.get("problem"), dict):
        raise ConfigError("config needs a problem object")
    opts = doc.get("optimizers")
    if not isinstance(opts, list) or not opts:
        raise ConfigError("config needs a nonempty optimizers list")
    return RunConfig(
        problem=doc["problem"],
        optimizers=tuple(build_optimizer_config(o) for o in opts),
        seeds=tuple(int(s) for s in doc.get("seeds", ())),
        steps=None if doc.get("T") is None else int(doc["T"]),
        epochs=None if doc.get("epochs") is None else int(doc["epochs"]),
        eval_every=int(doc.get("eval_every", 1)),
        output_dir=doc.get("output_dir"),
        theory=doc.get("theory"),
    )


def theory_schedule(big_t: int, p: float, q: float) -> tuple[float, float]:
    """Step-size mean and momentum weight decaying with the run length.

    eta = T^-((q(p-1)+p)/(2q(p-1)+p)) and beta = T^-(q(p-1)/(2q(p-1)+p)),
    both clamped into (0, 1]; at p = q = 2 these are T^-(2/3) and T^-(1/3).
    """
    if not (1.0 < p <= 2.0 and 1.0 < q <= 2.0):
        raise ConfigError(f"p and q must lie in (1, 2], got p={p}, q={q}")
    if big_t < 1:
        raise ConfigError("T must be at least 1")
    denom = 2.0 * q * (p - 1.0) + p
    eta = float(big_t) ** (-(q * (p - 1.0) + p) / denom)
    beta = float(big_t) ** (-(q * (p - 1.0)) / denom)
    return min(eta, 1.0), min(beta, 1.0)


def resolve_steps(config: RunConfig, problem, opt: OptimizerConfig) -> int:
    if config.steps is not None:
        return config.steps
    n = problem.dataset_size
    if n is None:
        raise ConfigError("epochs require a finite dataset; give T instead")
    return config.epochs * math.ceil(n / opt.batch_size)


def _stationarity(problem, state: OptimizerState, opt: OptimizerConfig, metrics_gen) -> float:
    if opt.kind in _CONSTRAINED_KINDS:
        return frank_wolfe_gap(state.x, problem, opt.geometry, metrics_gen)
    return norm_l2(problem.eval_full_gradient(state.x))


def run_single(
    problem,
    opt: OptimizerConfig,
    steps: int,
    seed: int,
    eval_every: int,
    diagnostics: bool = False,
) -> tuple[list[MetricsRow], bool]:
    """Run one (optimizer, seed) pair; returns (rows, aborted)."""
    run_id = f"{opt.label}__s{seed}"
    metrics_gen = make_generator(split_rng(root_rng(seed), "metrics"))

    def row(t: int, s_t: float | None, w_t: float | None) -> MetricsRow:
        return MetricsRow(
            run_id=run_id,
            seed=seed,
            t=t,
            wall_ms=0.0,
            train_loss=problem.full_loss(state.x),
            stationarity=_stationarity(problem, state, opt, metrics_gen),
            test_metric=problem.test_metric(state.x),
            momentum_error=momentum_error(state, problem) if diagnostics else None,
            s_t=s_t,
            w_t=w_t,
        )

    state = init_state(problem, opt, seed)
    rows = [row(0, None, None)]
    aborted = False
    # Divergence surfaces through the finiteness checks as a NumericsError
    # (abort flag + partial CSV), so the transient overflow warnings on the
    # way there carry no extra information.
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, steps + 1):
            try:
                info = optimizer_step(state, problem, opt)
            except NumericsError:
                aborted = True
                break
            if t % eval_every == 0 or t == steps:
                rows.append(row(t, info.s, info.w))
    return rows, aborted


def _mean_std(values: list[float]) -> dict:
    if not values:
        return {"mean": None, "std": None, "n": 0}
    mean = math.fsum(values) / len(values)
    if len(values) == 1:
        return {"mean": mean, "std": None, "n": 1}
    var = math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return {"mean": mean, "std": math.sqrt(var), "n": len(values)}


def summarize_csvs(csv_paths: Sequence[str | Path]) -> dict:
    """Pure reduction of per-run CSVs to per-optimizer final-row statistics."""
    by_label: dict[str, list[MetricsRow]] = {}
    for path in csv_paths:
        rows = read_metrics_csv(path)
        if not rows:
            raise ConfigError(f"{path}: no rows")
        label = rows[-1].run_id.rsplit("__s", 1)[0]
        by_label.setdefault(label, []).append(rows[-1])
    out = {}
    for label in sorted(by_label):
        finals = sorted(by_label[label], key=lambda r: r.seed)
        out[label] = {
            "final_train_loss": _mean_std([r.train_loss for r in finals]),
            "final_stationarity": _mean_std([r.stationarity for r in finals]),
            "final_test_metric": _mean_std(
                [r.test_metric for r in finals if r.test_metric is not None]
            ),
            "final_step": max(r.t for r in finals),
            "seeds": [r.seed for r in finals],
        }
    return out


def _worker_count(n_jobs: int) -> int:
    raw = os.environ.get("RANSOM_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError(f"RANSOM_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(cap, n_jobs))


def run_experiment(
    config: RunConfig,
    out_dir: str | Path,
    diagnostics: bool = False,
    use_theory_schedule: bool = False,
    force_plain_step: bool = False,
) -> dict:
    """Run all (optimizer, seed) pairs, write CSVs plus summary.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(config.problem)

    optimizers = list(config.optimizers)
    if use_theory_schedule:
        theory = config.theory or {}
        p, q = float(theory.get("p", 2.0)), float(theory.get("q", 2.0))
        resolved = []
        for opt in optimizers:
            eta, beta = theory_schedule(resolve_steps(config, problem, opt), p, q)
            resolved.append(replace(opt, eta=eta, beta=beta))
        optimizers = resolved
    if force_plain_step:
        optimizers = [replace(opt, plain_step=True) for opt in optimizers]

    jobs = [(opt, seed) for opt in optimizers for seed in config.seeds]

    def execute(job: tuple[OptimizerConfig, int]) -> tuple[str, bool]:
        opt, seed = job
        steps = resolve_steps(config, problem, opt)
        rows, aborted = run_single(problem, opt, steps, seed, config.eval_every, diagnostics)
        path = out / f"{opt.label}__s{seed}.csv"
        write_metrics_csv(path, rows)
        return str(path), aborted

    workers = _worker_count(len(jobs))
    if workers == 1:
        results = [execute(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(execute, jobs))

    csv_paths = [path for path, _ in results]
    aborted_runs = sorted(Path(path).stem for path, aborted in results if aborted)
    summary = {
        "schema_version": 1,
        "csv_schema": CSV_SCHEMA,
        "optimizers": summarize_csvs(csv_paths),
        "aborted_runs": aborted_runs,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def fit_rate_slope(
    csv_paths: Sequence[str | Path], burn_in_fraction: float = 0.0
) -> tuple[float, float]:
    """Least-squares slope of log mean stationarity against log run length.

    Each CSV contributes one point: x = ln(T), y = ln(average stationarity
    over step rows with t >= burn_in_fraction * T).  Returns (slope, r2).
    """
    if not 0.0 <= burn_in_fraction < 1.0:
        raise ConfigError("burn_in_fraction must lie in [0, 1)")
    xs: list[float] = []
    ys: list[float] = []
    lengths = set()
    for path in csv_paths:
        rows = read_metrics_csv(path)
        big_t = max(r.t for r in rows)
        if big_t < 1:
            raise ConfigError(f"{path}: run has no steps")
        cutoff = burn_in_fraction * big_t
        vals = [r.stationarity for r in rows if r.t >= 1 and r.t >= cutoff]
        avg = math.fsum(vals) / len(vals)
        if not avg > 0.0:
            raise ConfigError(f"{path}: average stationarity {avg} is not positive")
        lengths.add(big_t)
        xs.append(math.log(float(big_t)))
        ys.append(math.log(avg))
    if len(lengths) < 3:
        raise ConfigError(f"rate fit needs >= 3 distinct run lengths, got {sorted(lengths)}")
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
    return slope, r2


def rate_suite(
    config: RunConfig,
    t_values: Sequence[int],
    out_dir: str | Path,
    burn_in_fraction: float = 0.0,
) -> dict:
    """Re-run the config at several run lengths under the theory schedule.

    Each T gets its own subdirectory of CSVs; the fitted log-log slope over
    all runs lands in rate_summary.json.
    """
    if len(set(t_values)) < 3:
        raise ConfigError("rate suite needs >= 3 distinct T values")
    out = Path(out_dir)
    csv_paths: list[str] = []
    for big_t in sorted(set(int(t) for t in t_values)):
        sub = replace(
            config,
            steps=big_t,
            epochs=None,
            eval_every=max(1, big_t // 500),
            output_dir=None,
        )
        summary_dir = out / f"T{big_t}"
        run_experiment(sub, summary_dir, use_theory_schedule=True)
        csv_paths.extend(
            str(p) for p in sorted(summary_dir.glob("*.csv"))
        )
    slope, r2 = fit_rate_slope(csv_paths, burn_in_fraction)
    report = {
        "schema_version": 1,
        "t_values": sorted(set(int(t) for t in t_values)),
        "burn_in_fraction": burn_in_fraction,
        "slope": slope,
        "r2": r2,
        "n_runs": len(csv_paths),
    }
    (out / "rate_summary.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report
