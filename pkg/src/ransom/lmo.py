"""Linear minimization oracles: argmin of <m, z> over norm balls of radius rho.

Every oracle returns the extreme point itself, so callers use it either as a
normalized step direction (unconstrained updates) or as the target vertex of a
convex combination (constrained updates).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, Layout, ParamVector

GEOMETRY_KINDS = ("l2", "linf", "spectral", "nuclear")


@dataclass(frozen=True)
class Geometry:
    """Ball geometry.  spectral/nuclear act on matrix blocks.

    spectral applies a cubic Newton-Schulz orthogonalization per matrix block
    (vector blocks fall back to per-block L2 normalization); nuclear requires
    a layout with exactly one matrix block.
    """

    kind: str
    rho: float
    ns_iters: int = 8
    power_tol: float = 1e-10
    power_max_iters: int = 500

    def __post_init__(self):
        if self.kind not in GEOMETRY_KINDS:
            raise ConfigError(f"unknown geometry kind {self.kind!r}")
        if not (self.rho > 0.0) or not math.isfinite(self.rho):
            raise ConfigError(f"ball radius rho must be positive, got {self.rho}")
        if self.ns_iters < 1 or self.power_max_iters < 1:
            raise ConfigError("iteration counts must be at least 1")


@dataclass
class LmoResult:
    direction: ParamVector
    degenerate: bool = False
    power_converged: bool = True


def _zero_result(layout: Layout) -> LmoResult:
    return LmoResult(ParamVector.zeros(layout), degenerate=True)


def lmo_l2(m: ParamVector, rho: float) -> LmoResult:
    nrm = math.sqrt(math.fsum(m.data * m.data))
    if nrm == 0.0:
        return _zero_result(m.layout)
    return LmoResult(ParamVector(m.data * (-rho / nrm), m.layout))


def lmo_linf(m: ParamVector, rho: float) -> LmoResult:
    if not np.any(m.data):
        return _zero_result(m.layout)
    # sign(0) = 0: coordinates with no descent signal stay put.
    return LmoResult(ParamVector(-rho * np.sign(m.data), m.layout))


def newton_schulz(mat: np.ndarray, iters: int) -> np.ndarray:
    """Cubic Newton-Schulz orthogonalization X <- 1.5 X - 0.5 X X^T X.

    The input is pre-scaled by its Frobenius norm, which caps every singular
    value at 1; the cubic map is monotone on [0, 1] with fixed point 1, so
    singular values only grow toward 1 and never overshoot.
    """
    x = mat / np.linalg.norm(mat)
    transpose = x.shape[0] > x.shape[1]
    if transpose:
        x = x.T
    for _ in range(iters):
        x = 1.5 * x - 0.5 * (x @ x.T @ x)
    return x.T if transpose else x


def lmo_spectral(m: ParamVector, rho: float, ns_iters: int) -> LmoResult:
    out = ParamVector.zeros(m.layout)
    any_signal = False
    for name, shape, sl in m.layout.items():
        block = m.data[sl]
        nrm = np.linalg.norm(block)
        if nrm == 0.0:
            continue
        any_signal = True
        if len(shape) == 2:
            ortho = newton_schulz(block.reshape(shape), ns_iters)
            out.data[sl] = -rho * ortho.ravel()
        else:
            out.data[sl] = block * (-rho / nrm)
    if not any_signal:
        return _zero_result(m.layout)
    return LmoResult(out)


def top_singular_pair(
    mat: np.ndarray, gen: np.random.Generator, tol: float, max_iters: int
) -> tuple[float, np.ndarray, np.ndarray, bool]:
    """Dominant singular triple by power iteration on the smaller Gram matrix.

    Convergence is declared on the relative change of the Rayleigh quotient.
    The start vector comes from the caller's stream, so results are a pure
    function of (matrix, rng state).
    """
    n, p = mat.shape
    gram_on_right = p <= n
    dim = p if gram_on_right else n
    v = gen.standard_normal(dim)
    v /= np.linalg.norm(v)
    rayleigh = np.inf
    converged = False
    for _ in range(max_iters):
        if gram_on_right:
            bv = mat.T @ (mat @ v)
        else:
            bv = mat @ (mat.T @ v)
        nrm = np.linalg.norm(bv)
        if nrm == 0.0:
            # Start vector landed in the null space; nudge deterministically.
            v = gen.standard_normal(dim)
            v /= np.linalg.norm(v)
            continue
        v = bv / nrm
        new_rayleigh = float(v @ (mat.T @ (mat @ v)) if gram_on_right else v @ (mat @ (mat.T @ v)))
        if abs(new_rayleigh - rayleigh) <= tol * max(abs(new_rayleigh), 1e-30):
            rayleigh = new_rayleigh
            converged = True
            break
        rayleigh = new_rayleigh
    sigma = math.sqrt(max(rayleigh, 0.0))
    if gram_on_right:
        right = v
        left = mat @ right / sigma
    else:
        left = v
        right = mat.T @ left / sigma
    return sigma, left, right, converged


def lmo_nuclear(m: ParamVector, geom: Geometry, gen: np.random.Generator) -> LmoResult:
    matrix_blocks = [(shape, sl) for _, shape, sl in m.layout.items() if len(shape) == 2]
    if len(matrix_blocks) != 1 or len(m.layout.block_names) != 1:
        raise ConfigError("nuclear geometry needs a layout with exactly one matrix block")
    shape, sl = matrix_blocks[0]
    mat = m.data[sl].reshape(shape)
    if not np.any(mat):
        return _zero_result(m.layout)
    sigma, u, v, converged = top_singular_pair(mat, gen, geom.power_tol, geom.power_max_iters)
    vertex = ParamVector.zeros(m.layout)
    vertex.data[sl] = (-geom.rho) * np.outer(u, v).ravel()
    return LmoResult(vertex, power_converged=converged)


def lmo(m: ParamVector, geom: Geometry, gen: np.random.Generator | None = None) -> LmoResult:
    if geom.kind == "l2":
        return lmo_l2(m, geom.rho)
    if geom.kind == "linf":
        return lmo_linf(m, geom.rho)
    if geom.kind == "spectral":
        return lmo_spectral(m, geom.rho, geom.ns_iters)
    if gen is None:
        raise ConfigError("nuclear lmo needs an rng stream for its start vector")
    return lmo_nuclear(m, geom, gen)
