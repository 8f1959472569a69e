from __future__ import annotations

from pathlib import Path

import pytest

from ransom_plots.csvio import CSV_COLUMNS, CSV_SCHEMA

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def write_csv(path: Path, run_id: str, seed: int, points) -> Path:
    """Write a minimal schema-conformant run CSV.

    ``points`` is an iterable of (t, stationarity); train_loss mirrors the
    stationarity value and the optional columns stay blank.
    """
    lines = [f"# {CSV_SCHEMA}", ",".join(CSV_COLUMNS)]
    for t, stat in points:
        lines.append(f"{run_id},{seed},{t},0.0,{stat!r},{stat!r},,,,")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
