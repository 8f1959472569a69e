"""Small tanh MLP binary classifier with a bounded non-convex weight penalty.

Loss: mean logistic loss on +/-1 labels plus lam * sum_i w_i^2 / (1 + w_i^2)
over every parameter entry.  The penalty is the Welsch robust function: it
saturates at lam per entry, so the total penalty is bounded and the landscape
is genuinely non-convex.

Curvature probes are exact Hessian-vector products computed in one structured
pass: the forward pass carries directional derivatives (an R-operator tangent)
and the backward recurrences are differentiated along them.  The penalty's
Hessian is diagonal: lam * (2 - 6 w^2) / (1 + w^2)^3.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..core import ConfigError, Layout, OracleEval, ParamVector, RngState, make_generator, split_rng


def _softplus(t: np.ndarray) -> np.ndarray:
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


def welsch_value(w: np.ndarray) -> float:
    return float(np.sum(w**2 / (1.0 + w**2)))


def welsch_grad(w: np.ndarray) -> np.ndarray:
    return 2.0 * w / (1.0 + w**2) ** 2


def welsch_hess_diag(w: np.ndarray) -> np.ndarray:
    return (2.0 - 6.0 * w**2) / (1.0 + w**2) ** 3


class MlpWelschProblem:
    def __init__(
        self,
        x_train: np.ndarray,
        y_train: np.ndarray,
        x_test: np.ndarray | None = None,
        y_test: np.ndarray | None = None,
        hidden: tuple[int, ...] = (32, 16),
        lam: float = 0.1,
    ):
        x_train = np.asarray(x_train, dtype=np.float64)
        y_train = np.asarray(y_train, dtype=np.float64)
        if x_train.ndim != 2 or y_train.shape != (x_train.shape[0],):
            raise ConfigError("mlp needs x of shape (n, d) and y of shape (n,)")
        if not np.all(np.isin(y_train, (-1.0, 1.0))):
            raise ConfigError("labels must be +/-1")
        if len(hidden) < 1:
            raise ConfigError("need at least one hidden layer")
        self.x_train = x_train
        self.y_train = y_train
        self.x_test = None if x_test is None else np.asarray(x_test, dtype=np.float64)
        self.y_test = None if y_test is None else np.asarray(y_test, dtype=np.float64)
        self.lam = float(lam)
        self.dims = (x_train.shape[1], *hidden, 1)
        blocks = []
        for i in range(len(self.dims) - 1):
            blocks.append((f"w{i + 1}", (self.dims[i + 1], self.dims[i])))
            blocks.append((f"b{i + 1}", (self.dims[i + 1],)))
        self.layout = Layout(blocks)
        self.n_layers = len(self.dims) - 1
        self.dataset_size: int | None = x_train.shape[0]

    def initial_point(self, rng: RngState) -> ParamVector:
        gen = make_generator(split_rng(rng, "init"))
        x = ParamVector.zeros(self.layout)
        for i in range(self.n_layers):
            fan_in = self.dims[i]
            w = x.block(f"w{i + 1}")
            w[:] = gen.standard_normal(w.shape) / np.sqrt(fan_in)
        return x

    def _weights(self, x: ParamVector):
        ws = [x.block(f"w{i + 1}") for i in range(self.n_layers)]
        bs = [x.block(f"b{i + 1}") for i in range(self.n_layers)]
        return ws, bs

    def _forward(self, ws, bs, inputs: np.ndarray):
        acts = [inputs]
        for i in range(self.n_layers - 1):
            acts.append(np.tanh(acts[-1] @ ws[i].T + bs[i]))
        logits = (acts[-1] @ ws[-1].T + bs[-1]).ravel()
        return acts, logits

    def logits(self, x: ParamVector, inputs: np.ndarray) -> np.ndarray:
        ws, bs = self._weights(x)
        return self._forward(ws, bs, np.asarray(inputs, dtype=np.float64))[1]

    def eval_joint(
        self,
        x: ParamVector,
        direction: ParamVector | None,
        batch: np.ndarray,
        noise_gen: np.random.Generator | None = None,
    ) -> OracleEval:
        batch = np.asarray(batch, dtype=np.intp)
        inputs = self.x_train[batch]
        labels = self.y_train[batch]
        n = len(batch)
        ws, bs = self._weights(x)

        acts, logits = self._forward(ws, bs, inputs)
        margins = -labels * logits
        loss = float(np.mean(_softplus(margins))) + self.lam * welsch_value(x.data)

        # Backward pass.  d loss / d logit = -y * sigmoid(-y u) / n.
        grad = ParamVector.zeros(self.layout)
        gws = [grad.block(f"w{i + 1}") for i in range(self.n_layers)]
        gbs = [grad.block(f"b{i + 1}") for i in range(self.n_layers)]
        g_logit = (-labels) * expit(margins) / n
        up = g_logit[:, None]  # gradient flowing into layer outputs
        for i in range(self.n_layers - 1, -1, -1):
            gws[i][:] = up.T @ acts[i]
            gbs[i][:] = up.sum(axis=0)
            if i > 0:
                up = (up @ ws[i]) * (1.0 - acts[i] ** 2)
        grad.data += self.lam * welsch_grad(x.data)

        hvp = None
        if direction is not None:
            hvp = self._hvp_forward_over_reverse(
                x, direction, ws, bs, acts, logits, labels, margins, n
            )
        return OracleEval(gradient=grad, hvp=hvp, loss=loss, batch_indices=batch)

    def _hvp_forward_over_reverse(
        self, x, direction, ws, bs, acts, logits, labels, margins, n
    ) -> ParamVector:
        """Differentiate the backward pass along a parameter tangent.

        t_a[i] carries the directional derivative of each activation; the
        second block differentiates the gradient recurrences themselves, using
        d/du [-y sigmoid(-y u)] = sigmoid'(-y u) since y^2 = 1.
        """
        vws, vbs = self._weights(direction)
        t_a = [np.zeros_like(acts[0])]
        for i in range(self.n_layers - 1):
            t_pre = t_a[i] @ ws[i].T + acts[i] @ vws[i].T + vbs[i]
            t_a.append((1.0 - acts[i + 1] ** 2) * t_pre)
        t_logit = (t_a[-1] @ ws[-1].T + acts[-1] @ vws[-1].T + vbs[-1]).ravel()

        sig = expit(margins)
        g_logit = (-labels) * sig / n
        r_logit = sig * (1.0 - sig) * t_logit / n

        hvp = ParamVector.zeros(self.layout)
        hws = [hvp.block(f"w{i + 1}") for i in range(self.n_layers)]
        hbs = [hvp.block(f"b{i + 1}") for i in range(self.n_layers)]
        up = g_logit[:, None]
        t_up = r_logit[:, None]
        for i in range(self.n_layers - 1, -1, -1):
            hws[i][:] = t_up.T @ acts[i] + up.T @ t_a[i]
            hbs[i][:] = t_up.sum(axis=0)
            if i > 0:
                tanh_deriv = 1.0 - acts[i] ** 2
                t_down = (t_up @ ws[i] + up @ vws[i]) * tanh_deriv + (up @ ws[i]) * (
                    -2.0 * acts[i] * t_a[i]
                )
                up = (up @ ws[i]) * tanh_deriv
                t_up = t_down
        hvp.data += self.lam * welsch_hess_diag(x.data) * direction.data
        return hvp

    def eval_full_gradient(self, x: ParamVector) -> ParamVector:
        full = np.arange(self.x_train.shape[0])
        return self.eval_joint(x, None, full, None).gradient

    def full_loss(self, x: ParamVector) -> float:
        full = np.arange(self.x_train.shape[0])
        return self.eval_joint(x, None, full, None).loss

    def test_metric(self, x: ParamVector) -> float | None:
        """Classification accuracy on the held-out split."""
        if self.x_test is None or self.y_test is None:
            return None
        logits = self.logits(x, self.x_test)
        return float(np.mean((logits >= 0.0) == (self.y_test > 0.0)))
