"""Dataset parsing and synthesis: sparse classification text files, ratings
tables, and deterministic generators for offline runs.

Everything here is plain plumbing: parsers accept a string or an iterable of
lines, validate eagerly with line numbers in error messages, and return
immutable dense arrays.  Generators draw from the "data" RNG stream so the
same seed always produces the same dataset.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .core import ConfigError, RngState, make_generator, root_rng, split_rng


class DataFormatError(ConfigError):
    """A data file failed to parse; the message carries the line number."""


def _lines(source: str | io.TextIOBase | Iterable[str]) -> Iterator[str]:
    if isinstance(source, str):
        return iter(source.splitlines())
    if hasattr(source, "read"):
        return iter(source.read().splitlines())
    return iter(source)


@dataclass(frozen=True)
class DesignMatrix:
    features: np.ndarray  # (n_samples, n_features) float64
    labels: np.ndarray  # (n_samples,) float64, each -1.0 or +1.0

    def __post_init__(self):
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise ConfigError("features must be 2-D with one label per row")
        if not np.all(np.isfinite(self.features)):
            raise ConfigError("feature values must be finite")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ConfigError("labels must be -1 or +1")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class RatingsTable:
    user_index: np.ndarray  # (n_entries,) int64, contiguous in [0, n_users)
    item_index: np.ndarray  # (n_entries,) int64, contiguous in [0, n_items)
    rating: np.ndarray  # (n_entries,) float64
    timestamp: np.ndarray  # (n_entries,) int64
    user_ids: np.ndarray  # raw id of each contiguous user index
    item_ids: np.ndarray  # raw id of each contiguous item index

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_entries(self) -> int:
        return len(self.rating)


def _parse_label(token: str, line_no: int) -> float:
    try:
        raw = float(token)
    except ValueError:
        raise DataFormatError(f"line {line_no}: bad label {token!r}") from None
    if raw == 1.0:
        return 1.0
    if raw in (0.0, -1.0):  # 0/1 files are normalized to the -1/+1 convention
        return -1.0
    raise DataFormatError(f"line {line_no}: label {token!r} is not in {{0, 1, -1, +1}}")


def parse_libsvm(
    source: str | io.TextIOBase | Iterable[str], n_features: int | None = None
) -> DesignMatrix:
    """Parse `label idx:val ...` lines (1-based indices) into a dense matrix.

    Unset features are zero.  When n_features is omitted, the width is the
    largest index seen in the file.
    """
    labels: list[float] = []
    rows: list[list[tuple[int, float]]] = []
    widest = 0
    for line_no, line in enumerate(_lines(source), start=1):
        tokens = line.split()
        if not tokens:
            continue
        labels.append(_parse_label(tokens[0], line_no))
        entries: list[tuple[int, float]] = []
        for token in tokens[1:]:
            idx_str, _, val_str = token.partition(":")
            try:
                idx = int(idx_str)
                val = float(val_str)
            except ValueError:
                raise DataFormatError(
                    f"line {line_no}: bad feature entry {token!r}"
                ) from None
            if idx < 1:
                raise DataFormatError(f"line {line_no}: feature index {idx} is not 1-based")
            if not np.isfinite(val):
                raise DataFormatError(f"line {line_no}: non-finite value {val_str!r}")
            entries.append((idx, val))
            widest = max(widest, idx)
        rows.append(entries)
    width = widest if n_features is None else n_features
    if widest > width:
        raise DataFormatError(f"feature index {widest} exceeds declared width {width}")
    features = np.zeros((len(rows), width))
    for i, entries in enumerate(rows):
        for idx, val in entries:
            features[i, idx - 1] = val
    return DesignMatrix(features, np.asarray(labels, dtype=np.float64))


def _format_value(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def serialize_libsvm(data: DesignMatrix) -> str:
    """Canonical text form: +1/-1 labels, sorted 1-based indices, zeros omitted.

    serialize(parse(text)) is byte-identical to text whenever text is already
    canonical, and idempotent otherwise.
    """
    out: list[str] = []
    for row, label in zip(data.features, data.labels):
        parts = ["+1" if label > 0 else "-1"]
        parts.extend(
            f"{j + 1}:{_format_value(v)}" for j, v in enumerate(row) if v != 0.0
        )
        out.append(" ".join(parts))
    return "".join(line + "\n" for line in out)


def _top_by_count(ids: np.ndarray, limit: int) -> np.ndarray:
    """Most frequent raw ids, count descending with ascending-id tie-break."""
    uniq, counts = np.unique(ids, return_counts=True)
    order = np.lexsort((uniq, -counts))
    return uniq[order[:limit]]


def parse_movielens(
    source: str | io.TextIOBase | Iterable[str],
    top_users: int = 100,
    top_items: int = 200,
) -> RatingsTable:
    """Parse `user item rating timestamp` lines and keep the busiest slice.

    Duplicate (user, item) pairs keep the entry with the latest timestamp
    (last seen on ties).  Users and items are then ranked by rating count
    (ties toward the lower raw id), the top slice is kept, and surviving
    entries are remapped to contiguous indices in rank order.
    """
    latest: dict[tuple[int, int], tuple[float, int]] = {}
    for line_no, line in enumerate(_lines(source), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 4:
            raise DataFormatError(f"line {line_no}: expected 4 fields, got {len(tokens)}")
        try:
            user, item = int(tokens[0]), int(tokens[1])
            rating, ts = float(tokens[2]), int(tokens[3])
        except ValueError:
            raise DataFormatError(f"line {line_no}: bad entry {line!r}") from None
        key = (user, item)
        if key not in latest or ts >= latest[key][1]:
            latest[key] = (rating, ts)

    users = np.asarray([u for u, _ in latest], dtype=np.int64)
    items = np.asarray([i for _, i in latest], dtype=np.int64)
    keep_users = _top_by_count(users, top_users)
    keep_items = _top_by_count(items, top_items)
    user_rank = {int(u): k for k, u in enumerate(keep_users)}
    item_rank = {int(i): k for k, i in enumerate(keep_items)}

    rows: list[tuple[int, int, float, int]] = []
    for (user, item), (rating, ts) in latest.items():
        if user in user_rank and item in item_rank:
            rows.append((user_rank[user], item_rank[item], rating, ts))
    rows.sort(key=lambda r: (r[0], r[1]))
    return RatingsTable(
        user_index=np.asarray([r[0] for r in rows], dtype=np.int64),
        item_index=np.asarray([r[1] for r in rows], dtype=np.int64),
        rating=np.asarray([r[2] for r in rows], dtype=np.float64),
        timestamp=np.asarray([r[3] for r in rows], dtype=np.int64),
        user_ids=keep_users,
        item_ids=keep_items,
    )


def synth_lowrank(
    shape: tuple[int, int],
    rank: int,
    noise_sigma: float,
    rng: RngState,
    density: float = 0.3,
) -> tuple[np.ndarray, np.ndarray]:
    """Dense low-rank matrix U V^T (factors ~ N(0, 1/rank)) plus Bernoulli mask."""
    n_rows, n_cols = shape
    if not 1 <= rank <= min(n_rows, n_cols):
        raise ConfigError(f"rank {rank} out of range for shape {shape}")
    if not 0.0 < density <= 1.0:
        raise ConfigError("density must lie in (0, 1]")
    gen = make_generator(split_rng(rng, "data"))
    u = gen.standard_normal((n_rows, rank)) / np.sqrt(rank)
    v = gen.standard_normal((n_cols, rank)) / np.sqrt(rank)
    matrix = u @ v.T
    if noise_sigma > 0.0:
        matrix = matrix + noise_sigma * gen.standard_normal(shape)
    mask = gen.random(shape) < density
    return matrix, mask


def synth_classification(
    n_samples: int,
    n_features: int = 60,
    seed: int = 0,
    flip_fraction: float = 0.05,
) -> DesignMatrix:
    """Deterministic binary classification task for offline benchmarking.

    Features are 4-level codes in {-1.5, -0.5, 0.5, 1.5}; the teacher mixes a
    sparse linear rule with two bounded nonlinear interactions, and a small
    fraction of labels is flipped so perfect accuracy is impossible.
    """
    if n_samples < 1 or n_features < 4:
        raise ConfigError("need at least 1 sample and 4 features")
    gen = make_generator(split_rng(root_rng(seed), "data"))
    features = gen.integers(0, 4, size=(n_samples, n_features)) - 1.5
    w_lin = np.zeros(n_features)
    support = gen.choice(n_features, size=max(4, n_features // 4), replace=False)
    w_lin[support] = gen.standard_normal(len(support))
    w_a = gen.standard_normal(n_features) / np.sqrt(n_features)
    w_b = gen.standard_normal(n_features) / np.sqrt(n_features)
    score = (
        features @ w_lin / np.sqrt(len(support))
        + 1.5 * np.tanh(features @ w_a) * np.tanh(features @ w_b)
    )
    labels = np.where(score >= 0.0, 1.0, -1.0)
    flips = gen.random(n_samples) < flip_fraction
    labels[flips] *= -1.0
    return DesignMatrix(features.astype(np.float64), labels)


def train_test_split(
    n_samples: int, test_ratio: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint covering index split; a pure function of (n, ratio, seed)."""
    if not 0.0 < test_ratio < 1.0:
        raise ConfigError("test_ratio must lie strictly between 0 and 1")
    gen = make_generator(split_rng(root_rng(seed), "data"))
    perm = gen.permutation(n_samples)
    n_test = max(1, int(round(n_samples * test_ratio)))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])
