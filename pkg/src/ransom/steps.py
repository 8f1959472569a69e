"""Randomized step sizes and the expectation identity their weights satisfy.

Both supported distributions obey, for differentiable g with integrable g',

    E[g(s) - g(0)] = E[w(s) g'(s)],      w(z) = survival(z) / pdf(z),

which is what lets a single curvature probe at the landing point debias the
momentum buffer.  Exponential steps have constant weight w = eta; Beta(1, K)
steps on [0, 1) have w = (1 - s) / K with K = 1/eta - 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError


@dataclass(frozen=True)
class StepDistribution:
    """Step-size law with mean `eta`.

    kind "exponential": s ~ Exp(mean eta), unbounded support, used for
    unconstrained updates.  kind "beta": s ~ Beta(1, K) with K = 1/eta - 1,
    support [0, 1), used for convex-combination (constrained) updates and
    requiring eta < 1.
    """

    kind: str
    eta: float

    def __post_init__(self):
        if self.kind not in ("exponential", "beta"):
            raise ConfigError(f"unknown step distribution {self.kind!r}")
        if not (self.eta > 0.0) or not math.isfinite(self.eta):
            raise ConfigError(f"step mean eta must be positive, got {self.eta}")
        if self.kind == "beta" and self.eta >= 1.0:
            raise ConfigError(f"beta steps need eta < 1, got {self.eta}")

    @property
    def shape_k(self) -> float:
        if self.kind != "beta":
            raise ConfigError("shape_k is defined only for beta steps")
        return 1.0 / self.eta - 1.0

    def survival(self, z: np.ndarray) -> np.ndarray:
        """P(s > z), the weighting kernel behind the identity above."""
        z = np.asarray(z, dtype=np.float64)
        if self.kind == "exponential":
            return np.exp(-z / self.eta)
        return np.where(z < 1.0, np.clip(1.0 - z, 0.0, 1.0) ** self.shape_k, 0.0)

    def cdf(self, z: np.ndarray) -> np.ndarray:
        return 1.0 - self.survival(z)


@dataclass(frozen=True)
class StepSample:
    s: float
    w: float


def _draw(dist: StepDistribution, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # u uniform on [0, 1); inverse-survival transform keeps draws exact at the
    # tails.  Steps are deliberately uncapped for the exponential law.
    if dist.kind == "exponential":
        s = -dist.eta * np.log1p(-u)
        w = np.full_like(s, dist.eta)
        return s, w
    k = dist.shape_k
    s = -np.expm1(np.log1p(-u) / k)
    w = (1.0 - s) / k
    return s, w


def sample_step(dist: StepDistribution, gen: np.random.Generator) -> StepSample:
    s, w = _draw(dist, np.asarray(gen.random()))
    return StepSample(float(s), float(w))


def sample_steps(
    dist: StepDistribution, n: int, gen: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    return _draw(dist, gen.random(n))


@dataclass(frozen=True)
class SteinCheck:
    """Monte Carlo comparison of E[g(s) - g(0)] against E[w g'(s)].

    abs_err is |lhs - rhs|; stderr is the standard error of the paired
    difference estimator, so abs_err <= 4 * stderr is the usual pass line.
    """

    lhs: float
    rhs: float
    abs_err: float
    stderr: float
    n: int


def _verify_identity(dist: StepDistribution, g, g_prime, n: int, gen) -> SteinCheck:
    if n < 2:
        raise ConfigError("identity check needs n >= 2 samples")
    s, w = sample_steps(dist, n, gen)
    jump = g(s) - g(np.zeros(1))[0]
    weighted = w * g_prime(s)
    diff = jump - weighted
    lhs = float(np.mean(jump))
    rhs = float(np.mean(weighted))
    stderr = float(np.std(diff, ddof=1) / math.sqrt(n))
    return SteinCheck(lhs=lhs, rhs=rhs, abs_err=abs(lhs - rhs), stderr=stderr, n=n)


def verify_stein_exponential(g, g_prime, eta: float, n: int, gen) -> SteinCheck:
    """g and g_prime must accept float64 arrays elementwise."""
    return _verify_identity(StepDistribution("exponential", eta), g, g_prime, n, gen)


def verify_stein_beta(g, g_prime, eta: float, n: int, gen) -> SteinCheck:
    return _verify_identity(StepDistribution("beta", eta), g, g_prime, n, gen)


@dataclass(frozen=True)
class MomentReport:
    """Normalized step and weight moments that size the correction error.

    c_s = E[s^2]/eta^2, m_w = E[|w/eta|^q], m_ws = E[|w/eta + s/eta|^q] and
    c_delta = 2 * 2^(1-1/q) * max(m_w, m_ws)^(1/q).  Exact values for the
    exponential law: c_s = 2, m_w = 1, and m_ws at q = 2 integrates to 5.
    """

    kind: str
    eta: float
    q: float
    n: int
    c_s: float
    m_w: float
    m_ws: float
    c_delta: float


def estimate_moments(
    dist: StepDistribution, q: float, n: int, gen: np.random.Generator
) -> MomentReport:
    if not (1.0 < q <= 2.0):
        raise ConfigError(f"moment order q must lie in (1, 2], got {q}")
    if n < 10_000:
        raise ConfigError(f"moment estimation needs n >= 10000 samples, got {n}")
    s, w = sample_steps(dist, n, gen)
    eta = dist.eta
    c_s = float(np.mean((s / eta) ** 2))
    m_w = float(np.mean(np.abs(w / eta) ** q))
    m_ws = float(np.mean(np.abs(w / eta + s / eta) ** q))
    c_delta = 2.0 * 2.0 ** (1.0 - 1.0 / q) * max(m_w, m_ws) ** (1.0 / q)
    return MomentReport(
        kind=dist.kind, eta=eta, q=q, n=n, c_s=c_s, m_w=m_w, m_ws=m_ws, c_delta=c_delta
    )
