from __future__ import annotations

import numpy as np
import pytest

from ransom.core import make_generator, root_rng, split_rng
from ransom.problems import MatrixCompletionProblem, MlpWelschProblem


def tiny_mlp(seed: int = 0, n: int = 40, d: int = 6, hidden=(4, 3), lam: float = 0.1):
    gen = make_generator(split_rng(root_rng(seed), "data"))
    x = gen.standard_normal((n, d))
    y = np.where(x[:, 0] + 0.5 * x[:, 1] > 0, 1.0, -1.0)
    return MlpWelschProblem(x, y, x_test=x[: n // 2], y_test=y[: n // 2], hidden=hidden, lam=lam)


def tiny_matcomp(seed: int = 0, shape=(6, 5), n_obs: int = 18):
    gen = make_generator(split_rng(root_rng(seed), "data"))
    flat = gen.choice(shape[0] * shape[1], size=n_obs, replace=False)
    rows, cols = np.divmod(flat, shape[1])
    vals = gen.standard_normal(n_obs)
    split = n_obs - 4
    train = (rows[:split], cols[:split], vals[:split])
    test = (rows[split:], cols[split:], vals[split:])
    return MatrixCompletionProblem(shape, train, test)


@pytest.fixture
def mlp_problem():
    return tiny_mlp()


@pytest.fixture
def matcomp_problem():
    return tiny_matcomp()
