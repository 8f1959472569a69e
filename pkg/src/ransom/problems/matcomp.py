"""Matrix completion: mean squared error over observed entries of a dense X.

The Hessian is a constant diagonal mask (2/|batch| on observed positions), so
curvature probes are exact and cheap.  Intended for use with a nuclear-norm
ball constraint and convex-combination updates.
"""
from __future__ import annotations

import math

import numpy as np

from ..core import ConfigError, Layout, OracleEval, ParamVector, RngState

Triples = tuple[np.ndarray, np.ndarray, np.ndarray]


def _check_triples(shape, rows, cols, vals) -> Triples:
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    vals = np.asarray(vals, dtype=np.float64)
    if not (rows.shape == cols.shape == vals.shape) or rows.ndim != 1:
        raise ConfigError("observed entries must be parallel 1-d arrays")
    if rows.size == 0:
        raise ConfigError("need at least one observed entry")
    if rows.min() < 0 or rows.max() >= shape[0] or cols.min() < 0 or cols.max() >= shape[1]:
        raise ConfigError("observed index outside the matrix shape")
    return rows, cols, vals


class MatrixCompletionProblem:
    def __init__(
        self,
        shape: tuple[int, int],
        train: Triples,
        test: Triples | None = None,
    ):
        self.shape = (int(shape[0]), int(shape[1]))
        self.rows, self.cols, self.vals = _check_triples(self.shape, *train)
        self.flat = self.rows * self.shape[1] + self.cols
        if test is not None:
            self.test_rows, self.test_cols, self.test_vals = _check_triples(self.shape, *test)
        else:
            self.test_rows = None
        self.layout = Layout([("X", self.shape)])
        self.dataset_size: int | None = self.vals.size

    def initial_point(self, rng: RngState) -> ParamVector:
        # The origin is feasible for any centered ball constraint.
        return ParamVector.zeros(self.layout)

    def eval_joint(
        self,
        x: ParamVector,
        direction: ParamVector | None,
        batch: np.ndarray,
        noise_gen: np.random.Generator | None = None,
    ) -> OracleEval:
        batch = np.asarray(batch, dtype=np.intp)
        n = len(batch)
        flat = self.flat[batch]
        resid = x.data[flat] - self.vals[batch]
        loss = float(np.mean(resid**2))
        grad = ParamVector.zeros(self.layout)
        np.add.at(grad.data, flat, 2.0 * resid / n)
        hvp = None
        if direction is not None:
            hv = ParamVector.zeros(self.layout)
            np.add.at(hv.data, flat, 2.0 * direction.data[flat] / n)
            hvp = hv
        return OracleEval(gradient=grad, hvp=hvp, loss=loss, batch_indices=batch)

    def eval_full_gradient(self, x: ParamVector) -> ParamVector:
        grad = ParamVector.zeros(self.layout)
        resid = x.data[self.flat] - self.vals
        np.add.at(grad.data, self.flat, 2.0 * resid / self.vals.size)
        return grad

    def full_loss(self, x: ParamVector) -> float:
        resid = x.data[self.flat] - self.vals
        return float(np.mean(resid**2))

    def test_metric(self, x: ParamVector) -> float | None:
        """RMSE over the held-out observed entries."""
        if self.test_rows is None:
            return None
        flat = self.test_rows * self.shape[1] + self.test_cols
        resid = x.data[flat] - self.test_vals
        return math.sqrt(float(np.mean(resid**2)))

    def nuclear_norm(self, x: ParamVector) -> float:
        return float(np.linalg.svd(x.block("X"), compute_uv=False).sum())
