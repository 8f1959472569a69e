"""Shared kernel: flat parameter vectors, splittable RNG streams, error types."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

# Version tag for the stream derivation scheme.  Streams are Philox keyed by
# (seed, stream_id) where stream_id comes from splitmix64 mixing, so a draw is
# fully determined by (seed, stream path, draw index) on every platform.
RNG_SCHEME = "philox+splitmix64-v1"

# Fixed consumer registry.  Adding names is fine; renumbering breaks streams.
STREAM_CONSUMERS = {
    "init": 1,
    "batch": 2,
    "noise": 3,
    "step": 4,
    "lmo": 5,
    "data": 6,
    "metrics": 7,
}

_MASK64 = 0xFFFFFFFFFFFFFFFF


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class ConfigError(ValueError):
    """Invalid configuration or input data (CLI exit code 2)."""


class LayoutMismatchError(ValueError):
    """Operands built against different parameter layouts."""


class NumericsError(RuntimeError):
    """Non-finite values encountered (CLI exit code 3)."""

    def __init__(self, message: str, block: str | None = None):
        super().__init__(message)
        self.block = block


@dataclass(frozen=True)
class RngState:
    """Immutable handle for one named random stream."""

    seed: int
    stream_id: int = 0


def root_rng(seed: int) -> RngState:
    return RngState(int(seed), _splitmix64(int(seed) & _MASK64))


def split_rng(state: RngState, consumer: str | int) -> RngState:
    """Derive a child stream for a registered consumer name or an integer key.

    Integer keys (used e.g. for per-step substreams) live in a code space
    disjoint from the named registry.
    """
    if isinstance(consumer, str):
        try:
            code = STREAM_CONSUMERS[consumer]
        except KeyError:
            raise ConfigError(f"unregistered rng consumer {consumer!r}") from None
    else:
        if consumer < 0:
            raise ConfigError("integer rng keys must be non-negative")
        code = 64 + int(consumer)
    child = _splitmix64(state.stream_id ^ _splitmix64(code))
    return RngState(state.seed, child)


def make_generator(state: RngState) -> np.random.Generator:
    key = np.array([state.seed & _MASK64, state.stream_id & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class Layout:
    """Ordered named blocks packed into one flat float64 vector.

    Block shapes are either (n,) for vectors or (rows, cols) for matrices.
    """

    def __init__(self, blocks: Sequence[tuple[str, int | tuple[int, ...]]]):
        if not blocks:
            raise ConfigError("layout needs at least one block")
        names = []
        shapes = []
        offsets = []
        total = 0
        for name, shape in blocks:
            if isinstance(shape, int):
                shape = (shape,)
            shape = tuple(int(s) for s in shape)
            if len(shape) not in (1, 2) or any(s <= 0 for s in shape):
                raise ConfigError(f"block {name!r} has unsupported shape {shape}")
            if name in names:
                raise ConfigError(f"duplicate block name {name!r}")
            names.append(name)
            shapes.append(shape)
            offsets.append(total)
            total += int(np.prod(shape))
        self._names = tuple(names)
        self._shapes = tuple(shapes)
        self._offsets = tuple(offsets)
        self.size = total

    @property
    def block_names(self) -> tuple[str, ...]:
        return self._names

    def shape_of(self, name: str) -> tuple[int, ...]:
        return self._shapes[self._names.index(name)]

    def slice_of(self, name: str) -> slice:
        i = self._names.index(name)
        start = self._offsets[i]
        return slice(start, start + int(np.prod(self._shapes[i])))

    def items(self) -> Iterable[tuple[str, tuple[int, ...], slice]]:
        for i, name in enumerate(self._names):
            start = self._offsets[i]
            yield name, self._shapes[i], slice(start, start + int(np.prod(self._shapes[i])))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Layout)
            and self._names == other._names
            and self._shapes == other._shapes
        )

    def __hash__(self) -> int:
        return hash((self._names, self._shapes))

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}:{s}" for n, s in zip(self._names, self._shapes))
        return f"Layout({inner})"


@dataclass
class ParamVector:
    """Flat float64 parameter vector with a named block layout."""

    data: np.ndarray
    layout: Layout

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 1 or self.data.size != self.layout.size:
            raise LayoutMismatchError(
                f"data of size {self.data.size} does not fit layout of size {self.layout.size}"
            )

    @staticmethod
    def zeros(layout: Layout) -> "ParamVector":
        return ParamVector(np.zeros(layout.size), layout)

    def block(self, name: str) -> np.ndarray:
        """View of one block, reshaped; writes propagate to the flat vector."""
        return self.data[self.layout.slice_of(name)].reshape(self.layout.shape_of(name))

    def copy(self) -> "ParamVector":
        return ParamVector(self.data.copy(), self.layout)


def check_same_layout(a: ParamVector, b: ParamVector, op: str) -> None:
    if a.layout is not b.layout and a.layout != b.layout:
        raise LayoutMismatchError(f"{op}: mismatched layouts {a.layout} vs {b.layout}")


def dot(a: ParamVector, b: ParamVector) -> float:
    """Inner product with compensated summation of the elementwise products."""
    check_same_layout(a, b, "dot")
    return math.fsum(a.data * b.data)


def norm_l2(v: ParamVector) -> float:
    return math.sqrt(math.fsum(v.data * v.data))


def norm_linf(v: ParamVector) -> float:
    return float(np.max(np.abs(v.data))) if v.data.size else 0.0


def assert_finite(v: ParamVector, where: str) -> None:
    """Raise NumericsError naming the first offending block."""
    if np.isfinite(v.data).all():
        return
    for name, _, sl in v.layout.items():
        if not np.isfinite(v.data[sl]).all():
            raise NumericsError(f"non-finite values in block {name!r} during {where}", block=name)
    raise NumericsError(f"non-finite values during {where}")


@dataclass
class OracleEval:
    """One stochastic oracle answer: gradient, optional HVP along a direction."""

    gradient: ParamVector
    hvp: ParamVector | None
    loss: float
    batch_indices: np.ndarray


class StochasticOracle(Protocol):
    """Capabilities every optimization problem exposes to the optimizers."""

    layout: Layout
    dataset_size: int | None  # None for streaming/noise-model problems

    def initial_point(self, rng: RngState) -> ParamVector: ...

    def eval_joint(
        self,
        x: ParamVector,
        direction: ParamVector | None,
        batch: np.ndarray,
        noise_rng: np.random.Generator | None,
    ) -> OracleEval: ...

    def eval_full_gradient(self, x: ParamVector) -> ParamVector: ...

    def full_loss(self, x: ParamVector) -> float: ...
