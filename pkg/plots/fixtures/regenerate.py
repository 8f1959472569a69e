"""Rebuild the fixture CSVs by invoking the `ransom` CLI (must be on PATH).

The fixtures are deterministic: regenerating produces byte-identical files,
so a diff after running this script means the CSV contract moved.  The
recorded rate slope in expected.json comes from the CLI's rate_summary.json,
which is what the rate figure's annotation is checked against.
"""
from __future__ import annotations

import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

HERE = Path(__file__).resolve().parent

CURVES_CONFIG = {
    "schema_version": 1,
    "problem": {
        "kind": "mlp",
        "synth": {"n_samples": 120, "n_features": 10, "seed": 0},
        "hidden": [6, 4],
        "lam": 0.01,
        "test_ratio": 0.25,
        "split_seed": 0,
    },
    "optimizers": [
        {"kind": "ransom_e", "name": "ransom_e", "eta": 0.05, "beta": 0.2,
         "batch_size": 16, "geometry": {"kind": "l2", "rho": 1.0}},
        {"kind": "sgdm", "name": "sgdm", "eta": 0.05, "beta": 0.2,
         "batch_size": 16, "geometry": {"kind": "l2", "rho": 1.0}},
    ],
    "epochs": 8,
    "seeds": [1, 2, 3],
    "eval_every": 6,
}

RATE_CONFIG = {
    "schema_version": 1,
    "problem": {
        "kind": "quadratic", "dim": 8, "mu": 1.0, "L": 5.0,
        "b_scale": 1.0, "x0_scale": 2.0, "problem_seed": 0,
        "noise_g": {"kind": "gaussian", "sigma": 1.0},
        "noise_h": {"kind": "gaussian", "sigma": 1.0},
    },
    "optimizers": [
        {"kind": "ransom_e", "name": "ransom_e", "eta": 0.05, "beta": 0.2,
         "batch_size": 8, "geometry": {"kind": "l2", "rho": 1.0}},
    ],
    "T": 64,
    "seeds": [0, 1],
    "eval_every": 1,
    "theory": {"p": 2.0, "q": 2.0},
}

RATE_T_VALUES = (64, 128, 256)


def _reset(directory: Path) -> None:
    if directory.exists():
        shutil.rmtree(directory)
    directory.mkdir(parents=True)


def _run(args: list[str]) -> None:
    subprocess.run(["ransom", *args], check=True, stdout=subprocess.DEVNULL)


def main() -> int:
    with tempfile.TemporaryDirectory() as td:
        tmp = Path(td)

        cfg = tmp / "curves.json"
        cfg.write_text(json.dumps(CURVES_CONFIG))
        _run(["run", str(cfg), "--out", str(tmp / "curves")])
        _reset(HERE / "curves")
        for path in sorted((tmp / "curves").glob("*.csv")):
            shutil.copy(path, HERE / "curves" / path.name)

        _run(["run", str(cfg), "--seeds", "7", "--out", str(tmp / "single")])
        _reset(HERE / "curves_single")
        shutil.copy(
            tmp / "single" / "ransom_e__s7.csv",
            HERE / "curves_single" / "ransom_e__s7.csv",
        )

        cfg = tmp / "rate.json"
        cfg.write_text(json.dumps(RATE_CONFIG))
        t_arg = ",".join(str(t) for t in RATE_T_VALUES)
        _run(["rate-suite", str(cfg), "--T", t_arg, "--out", str(tmp / "rate")])
        _reset(HERE / "rate")
        for big_t in RATE_T_VALUES:
            for path in sorted((tmp / "rate" / f"T{big_t}").glob("*.csv")):
                shutil.copy(path, HERE / "rate" / f"rate_T{big_t}__{path.stem}.csv")
        report = json.loads((tmp / "rate" / "rate_summary.json").read_text())
        (HERE / "rate" / "expected.json").write_text(
            json.dumps(
                {
                    "burn_in_fraction": report["burn_in_fraction"],
                    "slope": report["slope"],
                    "r2": report["r2"],
                },
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )
    print("fixtures rebuilt")
    return 0


if __name__ == "__main__":
    sys.exit(main())
