"""Optimizer steps: randomized-step curvature-corrected momentum and baselines.

The two headline methods share one template: pick a direction from the
momentum buffer through a linear minimization oracle, move by a randomized
step size whose mean is eta, then probe curvature once at the landing point
along the direction just taken.  Because the step size s satisfies
E[g(s) - g(0)] = E[w g'(s)], the weighted probe delta = w * H(x_new) d is an
unbiased estimate of the gradient shift grad(x_new) - grad(x_old), and the
momentum update

    m_new = (1 - beta) * (m + delta) + beta * g_new

tracks the current gradient without the usual stale-momentum bias.

kind "ransom_e" uses exponential steps (unconstrained); "ransom_b" uses
Beta(1, K) steps toward an oracle vertex, so iterates stay inside the
constraint set as convex combinations.  Baselines (sgdm, storm, som_classic,
som_unif, sfw_polyak, sfw_som) reuse the same geometry layer and deterministic
step sizes, differing only in how they correct the momentum buffer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigError,
    ParamVector,
    RngState,
    assert_finite,
    make_generator,
    norm_l2,
    root_rng,
    split_rng,
)
from .lmo import Geometry, LmoResult, lmo
from .oracles import HVP_STRATEGIES, joint_eval
from .steps import StepDistribution, StepSample, sample_step

OPTIMIZER_KINDS = (
    "ransom_e",
    "ransom_b",
    "sgdm",
    "storm",
    "som_classic",
    "som_unif",
    "sfw_polyak",
    "sfw_som",
)

_CONSTRAINED_KINDS = ("ransom_b", "sfw_polyak", "sfw_som")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str
    geometry: Geometry
    eta: float
    beta: float
    batch_size: int = 8
    init_batch: int | None = None  # defaults to 10 * batch_size
    eta_decay: float = 0.0  # eta_t = eta / (t + 1)**eta_decay
    hvp_strategy: str = "analytic"
    plain_step: bool = False  # bypass the geometry: direction = -m
    randomize_step: bool = False  # baselines: draw s ~ Exp(eta_t) instead of eta_t
    correction_enabled: bool = True  # ablation switch for the curvature term
    som_unif_fresh_batch: bool = True  # midpoint probe on its own batch
    check_feasibility: bool = True  # nuclear ball: per-step norm assertion
    feasibility_tol: float = 1e-6
    name: str | None = None  # run label; defaults to kind

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ConfigError(f"unknown optimizer kind {self.kind!r}")
        if not (self.eta > 0.0 and math.isfinite(self.eta)):
            raise ConfigError(f"eta must be positive, got {self.eta}")
        if not (0.0 < self.beta <= 1.0):
            raise ConfigError(f"beta must lie in (0, 1], got {self.beta}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.init_batch is not None and self.init_batch < 1:
            raise ConfigError("init_batch must be at least 1")
        if self.hvp_strategy not in HVP_STRATEGIES:
            raise ConfigError(f"unknown hvp strategy {self.hvp_strategy!r}")
        if self.kind == "ransom_b" and self.eta >= 1.0:
            raise ConfigError("ransom_b needs eta < 1 for Beta(1, K) steps")
        if self.kind in _CONSTRAINED_KINDS and self.plain_step:
            raise ConfigError("constrained optimizers cannot bypass the geometry")

    @property
    def label(self) -> str:
        return self.name or self.kind


def _clone_gen(gen: np.random.Generator) -> np.random.Generator:
    fresh = np.random.Generator(np.random.Philox())
    fresh.bit_generator.state = gen.bit_generator.state
    return fresh


@dataclass
class OptimizerState:
    x: ParamVector
    m: ParamVector
    t: int
    step_gen: np.random.Generator
    batch_gen: np.random.Generator
    noise_gen: np.random.Generator
    lmo_rng: RngState
    last_direction: ParamVector | None = None
    last_sample: StepSample | None = None

    def copy(self) -> "OptimizerState":
        return OptimizerState(
            x=self.x.copy(),
            m=self.m.copy(),
            t=self.t,
            step_gen=_clone_gen(self.step_gen),
            batch_gen=_clone_gen(self.batch_gen),
            noise_gen=_clone_gen(self.noise_gen),
            lmo_rng=self.lmo_rng,
            last_direction=None if self.last_direction is None else self.last_direction.copy(),
            last_sample=self.last_sample,
        )


@dataclass
class StepInfo:
    s: float
    w: float
    batch_loss: float
    lmo_degenerate: bool = False
    power_converged: bool = True
    delta: np.ndarray | None = None  # correction term fed into the momentum update
    batch_indices: np.ndarray | None = None


def _init_batch_indices(problem, size: int, batch_gen) -> np.ndarray:
    n = problem.dataset_size
    if n is None:
        return np.arange(size)
    if size >= n:
        # Full pass: the warm-start momentum is exactly the full gradient
        # whenever the budget covers the dataset.
        return np.arange(n)
    return batch_gen.choice(n, size=size, replace=False)


def init_state(problem, config: OptimizerConfig, seed: int) -> OptimizerState:
    root = root_rng(seed)
    x0 = problem.initial_point(root)
    step_gen = make_generator(split_rng(root, "step"))
    batch_gen = make_generator(split_rng(root, "batch"))
    noise_gen = make_generator(split_rng(root, "noise"))
    size = config.init_batch if config.init_batch is not None else 10 * config.batch_size
    warm = _init_batch_indices(problem, size, batch_gen)
    m0 = problem.eval_joint(x0, None, warm, noise_gen).gradient
    return OptimizerState(
        x=x0,
        m=m0,
        t=0,
        step_gen=step_gen,
        batch_gen=batch_gen,
        noise_gen=noise_gen,
        lmo_rng=split_rng(root, "lmo"),
    )


def eta_at(config: OptimizerConfig, t: int) -> float:
    if config.eta_decay == 0.0:
        return config.eta
    return config.eta / (t + 1.0) ** config.eta_decay


def _draw_batch(problem, config: OptimizerConfig, state: OptimizerState) -> np.ndarray:
    n = problem.dataset_size
    if n is None:
        return np.arange(config.batch_size)
    return state.batch_gen.integers(0, n, size=config.batch_size)


def _pick_direction(state: OptimizerState, config: OptimizerConfig) -> LmoResult:
    if config.plain_step:
        return LmoResult(ParamVector(-state.m.data, state.m.layout))
    gen = None
    if config.geometry.kind == "nuclear":
        gen = make_generator(split_rng(state.lmo_rng, state.t))
    return lmo(state.m, config.geometry, gen)


def _momentum_update(state, beta: float, delta: np.ndarray | float, grad: np.ndarray) -> None:
    # Exactly this expression; tests pin the operation order bit-for-bit.
    state.m.data = (1.0 - beta) * (state.m.data + delta) + beta * grad


def _check_nuclear_feasibility(state, problem, config: OptimizerConfig) -> None:
    if config.geometry.kind != "nuclear" or not config.check_feasibility:
        return
    norm = float(np.linalg.svd(state.x.block(state.x.layout.block_names[0]), compute_uv=False).sum())
    bound = config.geometry.rho * (1.0 + config.feasibility_tol)
    if norm > bound:
        raise AssertionError(
            f"feasibility violated at t={state.t}: nuclear norm {norm} > {bound}"
        )


def ransom_e_step(state: OptimizerState, problem, config: OptimizerConfig) -> StepInfo:
    eta_t = eta_at(config, state.t)
    res = _pick_direction(state, config)
    d = res.direction
    sample = sample_step(StepDistribution("exponential", eta_t), state.step_gen)
    state.x.data += sample.s * d.data
    batch = _draw_batch(problem, config, state)
    ev = joint_eval(problem, state.x, d, batch, state.noise_gen, config.hvp_strategy)
    delta = sample.w * ev.hvp.data if config.correction_enabled else 0.0
    _momentum_update(state, config.beta, delta, ev.gradient.data)
    assert_finite(state.x, "ransom_e iterate")
    assert_finite(state.m, "ransom_e momentum")
    state.t += 1
    state.last_direction = d
    state.last_sample = sample
    return StepInfo(
        sample.s, sample.w, ev.loss, res.degenerate, res.power_converged,
        delta=delta if config.correction_enabled else None,
        batch_indices=batch,
    )


def ransom_b_step(state: OptimizerState, problem, config: OptimizerConfig) -> StepInfo:
    eta_t = eta_at(config, state.t)
    res = _pick_direction(state, config)
    d = ParamVector(res.direction.data - state.x.data, state.x.layout)
    sample = sample_step(StepDistribution("beta", eta_t), state.step_gen)
    if not (0.0 <= sample.s < 1.0):
        raise AssertionError(f"beta step outside [0, 1): {sample.s}")
    state.x.data += sample.s * d.data
    batch = _draw_batch(problem, config, state)
    ev = joint_eval(problem, state.x, d, batch, state.noise_gen, config.hvp_strategy)
    delta = sample.w * ev.hvp.data if config.correction_enabled else 0.0
    _momentum_update(state, config.beta, delta, ev.gradient.data)
    assert_finite(state.x, "ransom_b iterate")
    assert_finite(state.m, "ransom_b momentum")
    _check_nuclear_feasibility(state, problem, config)
    state.t += 1
    state.last_direction = d
    state.last_sample = sample
    return StepInfo(
        sample.s, sample.w, ev.loss, res.degenerate, res.power_converged,
        delta=delta if config.correction_enabled else None,
        batch_indices=batch,
    )


def _snapshot(gen: np.random.Generator):
    return gen.bit_generator.state


def _restore(gen: np.random.Generator, snap) -> None:
    gen.bit_generator.state = snap


def baseline_step(state: OptimizerState, problem, config: OptimizerConfig) -> StepInfo:
    eta_t = eta_at(config, state.t)
    res = _pick_direction(state, config)
    constrained = config.kind in ("sfw_polyak", "sfw_som")
    if constrained:
        d = ParamVector(res.direction.data - state.x.data, state.x.layout)
        if eta_t >= 1.0:
            raise ConfigError("constrained baselines need eta < 1")
    else:
        d = res.direction
    if config.randomize_step:
        sample = sample_step(StepDistribution("exponential", eta_t), state.step_gen)
        step_size, w = sample.s, sample.w
    else:
        sample = StepSample(eta_t, eta_t)
        step_size, w = eta_t, eta_t
    x_old = state.x.copy()
    state.x.data += step_size * d.data
    displacement = ParamVector(state.x.data - x_old.data, state.x.layout)
    batch = _draw_batch(problem, config, state)
    beta = config.beta

    delta = None
    if config.kind in ("sgdm", "sfw_polyak"):
        ev = joint_eval(problem, state.x, None, batch, state.noise_gen, config.hvp_strategy)
        _momentum_update(state, beta, 0.0, ev.gradient.data)
    elif config.kind == "storm":
        # Gradient difference on a shared sample: batch indices and noise
        # realization are both reused, so the difference is variance-reduced.
        snap = _snapshot(state.noise_gen)
        ev = joint_eval(problem, state.x, None, batch, state.noise_gen, config.hvp_strategy)
        _restore(state.noise_gen, snap)
        ev_old = joint_eval(problem, x_old, None, batch, state.noise_gen, config.hvp_strategy)
        delta = ev.gradient.data - ev_old.gradient.data
        _momentum_update(state, beta, delta, ev.gradient.data)
    elif config.kind in ("som_classic", "sfw_som"):
        # Curvature probe at the departure point along the realized step,
        # sharing the sample with the gradient at the landing point.
        snap = _snapshot(state.noise_gen)
        ev_h = joint_eval(problem, x_old, displacement, batch, state.noise_gen, config.hvp_strategy)
        _restore(state.noise_gen, snap)
        ev = joint_eval(problem, state.x, None, batch, state.noise_gen, config.hvp_strategy)
        delta = ev_h.hvp.data
        _momentum_update(state, beta, delta, ev.gradient.data)
    elif config.kind == "som_unif":
        u = float(state.step_gen.random())
        x_hat = ParamVector(x_old.data + u * displacement.data, state.x.layout)
        if config.som_unif_fresh_batch:
            probe_batch = _draw_batch(problem, config, state)
            ev_h = joint_eval(
                problem, x_hat, displacement, probe_batch, state.noise_gen, config.hvp_strategy
            )
            ev = joint_eval(problem, state.x, None, batch, state.noise_gen, config.hvp_strategy)
        else:
            snap = _snapshot(state.noise_gen)
            ev_h = joint_eval(problem, x_hat, displacement, batch, state.noise_gen, config.hvp_strategy)
            _restore(state.noise_gen, snap)
            ev = joint_eval(problem, state.x, None, batch, state.noise_gen, config.hvp_strategy)
        delta = ev_h.hvp.data
        _momentum_update(state, beta, delta, ev.gradient.data)
    else:
        raise ConfigError(f"not a baseline kind: {config.kind}")

    assert_finite(state.x, f"{config.kind} iterate")
    assert_finite(state.m, f"{config.kind} momentum")
    if constrained:
        _check_nuclear_feasibility(state, problem, config)
    state.t += 1
    state.last_direction = d
    state.last_sample = sample
    return StepInfo(
        step_size, w, ev.loss, res.degenerate, res.power_converged,
        delta=delta, batch_indices=batch,
    )


def optimizer_step(state: OptimizerState, problem, config: OptimizerConfig) -> StepInfo:
    if config.kind == "ransom_e":
        return ransom_e_step(state, problem, config)
    if config.kind == "ransom_b":
        return ransom_b_step(state, problem, config)
    return baseline_step(state, problem, config)


def momentum_error(state: OptimizerState, problem) -> float:
    """L2 distance between the momentum buffer and the true full gradient."""
    grad = problem.eval_full_gradient(state.x)
    return norm_l2(ParamVector(state.m.data - grad.data, state.m.layout))


def frank_wolfe_gap(x: ParamVector, problem, geometry: Geometry, gen=None) -> float:
    """<grad f(x), x - v> with v the constraint-set vertex against the true gradient."""
    grad = problem.eval_full_gradient(x)
    vertex = lmo(grad, geometry, gen).direction
    diff = ParamVector(x.data - vertex.data, x.layout)
    return math.fsum(grad.data * diff.data)
