"""Command-line entry point.

Subcommands: `run` executes a config's experiments, `verify-stein` checks
the step-size identity by Monte Carlo, `rate-suite` reruns a config across
run lengths and fits the log-log stationarity slope, and `moments` reports
the empirical step/weight moment constants.

Exit codes: 0 success, 2 configuration or data error, 3 numeric abort.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, replace

from .core import ConfigError, NumericsError, make_generator, root_rng, split_rng
from .harness import load_config, rate_suite, run_experiment
from .steps import (
    StepDistribution,
    estimate_moments,
    verify_stein_beta,
    verify_stein_exponential,
)


def _parse_int_list(raw: str, what: str) -> tuple[int, ...]:
    try:
        values = tuple(int(tok) for tok in raw.split(",") if tok.strip() != "")
    except ValueError:
        raise ConfigError(f"{what} must be a comma-separated integer list, got {raw!r}") from None
    if not values:
        raise ConfigError(f"{what} list is empty")
    return values


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.seeds:
        config = replace(config, seeds=_parse_int_list(args.seeds, "--seeds"))
    out_dir = args.out or config.output_dir or "runs"
    started = time.perf_counter()
    summary = run_experiment(
        config,
        out_dir,
        diagnostics=args.diagnostics == "full-grad",
        use_theory_schedule=args.theory_schedule,
        force_plain_step=args.plain_step,
    )
    elapsed = time.perf_counter() - started
    for label, stats in summary["optimizers"].items():
        final = stats["final_test_metric"]
        shown = final if final["n"] else stats["final_stationarity"]
        name = "test_metric" if final["n"] else "stationarity"
        print(f"{label}: final {name} mean={shown['mean']} std={shown['std']} n={shown['n']}")
    if summary["aborted_runs"]:
        print(f"aborted runs: {', '.join(summary['aborted_runs'])}", file=sys.stderr)
    print(f"wrote {out_dir}/summary.json (wall time {elapsed:.1f}s, informational)")
    return 3 if summary["aborted_runs"] else 0


def cmd_verify_stein(args: argparse.Namespace) -> int:
    gen = make_generator(split_rng(root_rng(args.seed), "step"))
    g = lambda s: s**2  # noqa: E731 - the canonical quadratic test function
    g_prime = lambda s: 2.0 * s  # noqa: E731
    if args.dist == "exp":
        check = verify_stein_exponential(g, g_prime, args.eta, args.n, gen)
        closed = 2.0 * args.eta**2
    else:
        check = verify_stein_beta(g, g_prime, args.eta, args.n, gen)
        k = StepDistribution("beta", args.eta).shape_k
        closed = 2.0 / ((k + 1.0) * (k + 2.0))
    ok = check.abs_err <= 4.0 * check.stderr
    print(
        f"dist={args.dist} eta={args.eta} n={check.n}: lhs={check.lhs:.8g} "
        f"rhs={check.rhs:.8g} closed_form={closed:.8g}"
    )
    print(f"|lhs-rhs|={check.abs_err:.3g} bound(4se)={4.0 * check.stderr:.3g}")
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_rate_suite(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.seeds:
        config = replace(config, seeds=_parse_int_list(args.seeds, "--seeds"))
    t_values = _parse_int_list(args.T, "--T")
    out_dir = args.out or config.output_dir or "rate-suite"
    started = time.perf_counter()
    report = rate_suite(config, t_values, out_dir, burn_in_fraction=args.burn_in)
    elapsed = time.perf_counter() - started
    print(f"slope={report['slope']:.6f} r2={report['r2']:.4f} over T={report['t_values']}")
    print(f"wrote {out_dir}/rate_summary.json (wall time {elapsed:.1f}s, informational)")
    return 0


def cmd_moments(args: argparse.Namespace) -> int:
    gen = make_generator(split_rng(root_rng(args.seed), "step"))
    reports = [
        estimate_moments(StepDistribution("exponential", args.eta), args.q, args.n, gen),
        estimate_moments(StepDistribution("beta", args.eta), args.q, args.n, gen),
    ]
    if args.json:
        print(json.dumps([asdict(r) for r in reports], indent=2, sort_keys=True))
    else:
        for r in reports:
            print(
                f"{r.kind} eta={r.eta} q={r.q} n={r.n}: c_s={r.c_s:.6f} "
                f"m_w={r.m_w:.6f} m_ws={r.m_ws:.6f} c_delta={r.c_delta:.6f}"
            )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ransom",
        description="Randomized-step second-order-momentum optimizer bench.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a config's experiments")
    p_run.add_argument("config")
    p_run.add_argument("--seeds", default=None, help="comma-separated seed list override")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument(
        "--theory-schedule",
        action="store_true",
        help="replace eta/beta with the T-dependent schedule",
    )
    p_run.add_argument(
        "--plain-step", action="store_true", help="bypass the geometry (direction = -m)"
    )
    p_run.add_argument(
        "--diagnostics",
        choices=["full-grad"],
        default=None,
        help="also log momentum_error (needs full gradients; small problems only)",
    )
    p_run.set_defaults(func=cmd_run)

    p_stein = sub.add_parser("verify-stein", help="Monte Carlo check of the step identity")
    p_stein.add_argument("--dist", choices=["exp", "beta"], default="exp")
    p_stein.add_argument("--eta", type=float, default=0.1)
    p_stein.add_argument("--n", type=int, default=1_000_000)
    p_stein.add_argument("--seed", type=int, default=0)
    p_stein.set_defaults(func=cmd_verify_stein)

    p_rate = sub.add_parser("rate-suite", help="fit stationarity decay across run lengths")
    p_rate.add_argument("config")
    p_rate.add_argument("--T", required=True, help="comma-separated run lengths, e.g. 1000,10000")
    p_rate.add_argument("--seeds", default=None)
    p_rate.add_argument("--out", default=None)
    p_rate.add_argument("--burn-in", type=float, default=0.0, dest="burn_in")
    p_rate.set_defaults(func=cmd_rate_suite)

    p_mom = sub.add_parser("moments", help="estimate step/weight moment constants")
    p_mom.add_argument("--q", type=float, default=2.0)
    p_mom.add_argument("--eta", type=float, default=0.1)
    p_mom.add_argument("--n", type=int, default=200_000)
    p_mom.add_argument("--seed", type=int, default=0)
    p_mom.add_argument("--json", action="store_true")
    p_mom.set_defaults(func=cmd_moments)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
