"""Reader for the ``ransom-csv v1`` metrics contract.

One file per (optimizer, seed) run.  The first line is a schema comment, the
second the fixed column header, and every following line one recorded step.
Optional columns are stored as empty fields and surface here as ``None``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

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


class CsvFormatError(ValueError):
    """A metrics file does not follow the published CSV contract."""


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


def _optional(field: str, path: Path, name: str) -> float | None:
    if field == "":
        return None
    try:
        return float(field)
    except ValueError:
        raise CsvFormatError(f"{path}: bad {name} value {field!r}") from None


def _required(field: str, path: Path, name: str) -> float:
    value = _optional(field, path, name)
    if value is None:
        raise CsvFormatError(f"{path}: missing required {name} value")
    return value


def read_metrics_csv(path: str | Path) -> list[MetricsRow]:
    path = Path(path)
    lines = path.read_text().splitlines()
    if len(lines) < 2 or lines[0] != f"# {CSV_SCHEMA}":
        raise CsvFormatError(f"{path}: not a {CSV_SCHEMA} file")
    if lines[1] != ",".join(CSV_COLUMNS):
        raise CsvFormatError(f"{path}: unexpected column header")
    rows = []
    for line in lines[2:]:
        fields = line.split(",")
        if len(fields) != len(CSV_COLUMNS):
            raise CsvFormatError(f"{path}: malformed row {line!r}")
        try:
            seed, t = int(fields[1]), int(fields[2])
        except ValueError:
            raise CsvFormatError(f"{path}: bad seed/t in row {line!r}") from None
        rows.append(
            MetricsRow(
                run_id=fields[0],
                seed=seed,
                t=t,
                wall_ms=_required(fields[3], path, "wall_ms"),
                train_loss=_required(fields[4], path, "train_loss"),
                stationarity=_required(fields[5], path, "stationarity"),
                test_metric=_optional(fields[6], path, "test_metric"),
                momentum_error=_optional(fields[7], path, "momentum_error"),
                s_t=_optional(fields[8], path, "s_t"),
                w_t=_optional(fields[9], path, "w_t"),
            )
        )
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    return rows


def run_label(run_id: str) -> str:
    """Optimizer label shared by all seeds of a run (strips the seed suffix)."""
    return run_id.rsplit("__s", 1)[0]
