"""Strategy dispatch for joint gradient/curvature queries, plus finite-difference references.

Every problem ships a structured curvature path (closed form for the quadratic
and matrix completion, forward-over-reverse for the MLP); "central_diff"
replaces it with a two-sided gradient difference on the same batch with noise
disabled, serving as the independent reference the analytic paths are checked
against.
"""
from __future__ import annotations

import math

import numpy as np

from .core import ConfigError, OracleEval, ParamVector

HVP_STRATEGIES = ("analytic", "central_diff")

_SQRT_EPS = math.sqrt(np.finfo(np.float64).eps)


def fd_step(x: ParamVector, direction: ParamVector) -> float:
    d_norm = math.sqrt(math.fsum(direction.data * direction.data))
    x_norm = math.sqrt(math.fsum(x.data * x.data))
    return _SQRT_EPS * (1.0 + x_norm) / max(d_norm, 1e-12)


def central_difference_hvp(problem, x: ParamVector, direction: ParamVector, batch) -> ParamVector:
    """(grad(x + eps d) - grad(x - eps d)) / (2 eps) on a fixed batch, noise off."""
    eps = fd_step(x, direction)
    plus = ParamVector(x.data + eps * direction.data, x.layout)
    minus = ParamVector(x.data - eps * direction.data, x.layout)
    g_plus = problem.eval_joint(plus, None, batch, None).gradient
    g_minus = problem.eval_joint(minus, None, batch, None).gradient
    return ParamVector((g_plus.data - g_minus.data) / (2.0 * eps), x.layout)


def central_difference_gradient(problem, x: ParamVector, batch, eps: float | None = None) -> ParamVector:
    """Coordinate-wise two-sided difference of the batch loss, noise off."""
    if eps is None:
        eps = (3.0 * np.finfo(np.float64).eps) ** (1.0 / 3.0)
    out = ParamVector.zeros(x.layout)
    for i in range(x.layout.size):
        h = eps * (1.0 + abs(x.data[i]))
        bumped = x.copy()
        bumped.data[i] = x.data[i] + h
        f_plus = problem.eval_joint(bumped, None, batch, None).loss
        bumped.data[i] = x.data[i] - h
        f_minus = problem.eval_joint(bumped, None, batch, None).loss
        out.data[i] = (f_plus - f_minus) / (2.0 * h)
    return out


def joint_eval(
    problem,
    x: ParamVector,
    direction: ParamVector | None,
    batch,
    noise_gen=None,
    strategy: str = "analytic",
) -> OracleEval:
    if strategy not in HVP_STRATEGIES:
        raise ConfigError(f"unknown hvp strategy {strategy!r}")
    if strategy == "analytic" or direction is None:
        return problem.eval_joint(x, direction, batch, noise_gen)
    base = problem.eval_joint(x, None, batch, noise_gen)
    hvp = central_difference_hvp(problem, x, direction, batch)
    return OracleEval(
        gradient=base.gradient, hvp=hvp, loss=base.loss, batch_indices=base.batch_indices
    )
