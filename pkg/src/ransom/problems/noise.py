"""Additive gradient-noise models, including a heavy-tailed one."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import ConfigError


@dataclass(frozen=True)
class NoiseSpec:
    """kind "gaussian": sigma * N(0, I).

    kind "pareto": symmetrized Pareto with magnitude sigma * (U^(-1/tail) - 1)
    and an independent uniform sign, so the mean is zero and the p-th moment
    is finite exactly when p < tail_index.
    """

    kind: str
    sigma: float
    tail_index: float = 2.5

    def __post_init__(self):
        if self.kind not in ("gaussian", "pareto"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0.0 or not math.isfinite(self.sigma):
            raise ConfigError(f"noise sigma must be non-negative, got {self.sigma}")
        if self.kind == "pareto" and self.tail_index <= 1.0:
            raise ConfigError("pareto tail_index must exceed 1 so the mean exists")


def draw_noise(spec: NoiseSpec, size: tuple[int, ...] | int, gen: np.random.Generator) -> np.ndarray:
    if spec.sigma == 0.0:
        return np.zeros(size)
    if spec.kind == "gaussian":
        return spec.sigma * gen.standard_normal(size)
    u = 1.0 - gen.random(size)  # (0, 1]: keeps the magnitude finite
    magnitude = spec.sigma * (u ** (-1.0 / spec.tail_index) - 1.0)
    signs = 2.0 * gen.integers(0, 2, size=size).astype(np.float64) - 1.0
    return signs * magnitude
