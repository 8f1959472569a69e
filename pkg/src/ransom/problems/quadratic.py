"""Noisy quadratic: f(x) = 0.5 x'Ax - b'x with additive oracle noise.

The oracle is streaming (no finite dataset): a "batch" of size B averages B
independent noise draws, so larger batches shrink the noise scale while the
clean part stays exact.  This makes the true gradient and curvature available
in closed form, which is what the bias and rate checks lean on.
"""
from __future__ import annotations

import numpy as np

from ..core import ConfigError, Layout, OracleEval, ParamVector, RngState, make_generator, split_rng
from .noise import NoiseSpec, draw_noise


class QuadraticProblem:
    def __init__(
        self,
        a_matrix: np.ndarray,
        b: np.ndarray,
        noise_g: NoiseSpec | None = None,
        noise_h: NoiseSpec | None = None,
        x0_scale: float = 1.0,
    ):
        a_matrix = np.asarray(a_matrix, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if a_matrix.ndim != 2 or a_matrix.shape[0] != a_matrix.shape[1]:
            raise ConfigError("quadratic needs a square matrix")
        if not np.allclose(a_matrix, a_matrix.T, atol=1e-12):
            raise ConfigError("quadratic matrix must be symmetric")
        if b.shape != (a_matrix.shape[0],):
            raise ConfigError("linear term has wrong shape")
        self.a_matrix = a_matrix
        self.b = b
        self.noise_g = noise_g
        self.noise_h = noise_h
        self.x0_scale = float(x0_scale)
        self.dim = a_matrix.shape[0]
        self.layout = Layout([("x", self.dim)])
        self.dataset_size: int | None = None

    @classmethod
    def synthesize(
        cls,
        dim: int,
        mu: float,
        big_l: float,
        rng: RngState,
        noise_g: NoiseSpec | None = None,
        noise_h: NoiseSpec | None = None,
        b_scale: float = 0.0,
        x0_scale: float = 1.0,
    ) -> "QuadraticProblem":
        """Random rotation of a spectrum spread evenly over [mu, big_l]."""
        if not (0.0 < mu <= big_l):
            raise ConfigError("need 0 < mu <= L")
        gen = make_generator(split_rng(rng, "init"))
        q, _ = np.linalg.qr(gen.standard_normal((dim, dim)))
        eigs = np.linspace(mu, big_l, dim)
        a_matrix = (q * eigs) @ q.T
        a_matrix = 0.5 * (a_matrix + a_matrix.T)
        b = b_scale * gen.standard_normal(dim) if b_scale else np.zeros(dim)
        return cls(a_matrix, b, noise_g=noise_g, noise_h=noise_h, x0_scale=x0_scale)

    def initial_point(self, rng: RngState) -> ParamVector:
        gen = make_generator(split_rng(rng, "init"))
        x0 = gen.standard_normal(self.dim)
        x0 *= self.x0_scale / np.linalg.norm(x0)
        return ParamVector(x0, self.layout)

    def minimizer(self) -> ParamVector:
        return ParamVector(np.linalg.solve(self.a_matrix, self.b), self.layout)

    def _mean_noise(self, spec: NoiseSpec | None, batch_size: int, gen) -> np.ndarray | float:
        if spec is None or gen is None or spec.sigma == 0.0:
            return 0.0
        return draw_noise(spec, (batch_size, self.dim), gen).mean(axis=0)

    def eval_joint(
        self,
        x: ParamVector,
        direction: ParamVector | None,
        batch: np.ndarray,
        noise_gen: np.random.Generator | None,
    ) -> OracleEval:
        batch_size = max(len(batch), 1)
        grad = self.a_matrix @ x.data - self.b + self._mean_noise(self.noise_g, batch_size, noise_gen)
        hvp = None
        if direction is not None:
            hv = self.a_matrix @ direction.data
            hv = hv + self._mean_noise(self.noise_h, batch_size, noise_gen)
            hvp = ParamVector(hv, self.layout)
        return OracleEval(
            gradient=ParamVector(grad, self.layout),
            hvp=hvp,
            loss=self.full_loss(x),
            batch_indices=np.asarray(batch),
        )

    def eval_full_gradient(self, x: ParamVector) -> ParamVector:
        return ParamVector(self.a_matrix @ x.data - self.b, self.layout)

    def full_loss(self, x: ParamVector) -> float:
        return float(0.5 * x.data @ (self.a_matrix @ x.data) - self.b @ x.data)

    def test_metric(self, x: ParamVector) -> float | None:
        return None
