"""Small dense network that predicts the stages of one implicit step.

The network maps a state ``y_m`` (scaled by ``input_scale``) through tanh or
ELU hidden layers to a linear output of width ``dim * (n + 1)``, read as a
``(dim, n + 1)`` block: columns ``0..n-1`` are stage states, column ``n`` is
the full-step state. It is trained, on its own input only, to satisfy

    y_m = Y_i - h sum_j A[i, j] f(Y_j)        (every stage i)
    y_m = y_next - h sum_i b_i f(Y_i)

in the mean-square sense. Gradients are hand-written reverse mode; the
chain rule through f uses the system Jacobian.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .odes import OdeSystem
from .tableau import ButcherTableau

ACTIVATIONS = ("tanh", "elu")


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, history: list[float]):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch
        self.history = history


def elu(z):
    return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))


def elu_grad(z):
    return np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0)))


def _act(name, z):
    return np.tanh(z) if name == "tanh" else elu(z)


def _act_grad(name, z):
    return 1.0 - np.tanh(z) ** 2 if name == "tanh" else elu_grad(z)


@dataclass
class MlpParams:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "elu"
    input_scale: float = 40.0
    n: int = 1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.layer_dims[-1] != self.dim * (self.n + 1):
            raise ValueError("output width must equal dim * (n + 1)")
        for W, b, (fan_in, fan_out) in zip(self.weights, self.biases, zip(self.layer_dims, self.layer_dims[1:])):
            if W.shape != (fan_out, fan_in) or b.shape != (fan_out,):
                raise ValueError("parameter shapes do not match layer_dims")

    @property
    def dim(self) -> int:
        return self.layer_dims[0]

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def copy(self, dtype=None) -> "MlpParams":
        return MlpParams(
            list(self.layer_dims),
            [W.astype(dtype or W.dtype) for W in self.weights],
            [b.astype(dtype or b.dtype) for b in self.biases],
            self.activation, self.input_scale, self.n, dict(self.meta),
        )

    def forward(self, y_m) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(stages (n, dim), y_next (dim,))``."""
        out, _ = self._forward(y_m)
        block = out.reshape(self.dim, self.n + 1)
        return block[:, : self.n].T.copy(), block[:, self.n].copy()

    def _forward(self, y_m):
        # parameter dtype is kept so the loss can be evaluated in extended precision
        a = np.asarray(y_m, dtype=self.weights[0].dtype) / self.input_scale
        cache = [(None, a)]
        last = len(self.weights) - 1
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = W @ a + b
            a = z if l == last else _act(self.activation, z)
            cache.append((z, a))
        return a, cache

    def to_dict(self) -> dict:
        return {
            "layer_dims": list(self.layer_dims),
            "activation": self.activation,
            "input_scale": self.input_scale,
            "n": self.n,
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
            **self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpParams":
        known = {"layer_dims", "activation", "input_scale", "n", "weights", "biases"}
        return cls(
            layer_dims=[int(v) for v in d["layer_dims"]],
            weights=[np.array(W, dtype=float) for W in d["weights"]],
            biases=[np.array(b, dtype=float) for b in d["biases"]],
            activation=d["activation"],
            input_scale=float(d["input_scale"]),
            n=int(d["n"]),
            meta={k: v for k, v in d.items() if k not in known},
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "MlpParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


def init_mlp(
    dim: int,
    n: int,
    hidden: tuple[int, ...] = (3, 3, 3),
    activation: str = "elu",
    seed: int = 0,
    y_m=None,
    input_scale: float = 40.0,
) -> MlpParams:
    """Glorot-uniform weights, zero biases.

    When ``y_m`` is given the output bias is set to ``y_m`` replicated over
    all ``n + 1`` outputs, so the untrained net reproduces the constant guess
    up to the small output-weight term.
    """
    rng = np.random.default_rng(seed)
    dims = [dim, *hidden, dim * (n + 1)]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims, dims[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    if y_m is not None:
        biases[-1] = np.repeat(np.asarray(y_m, dtype=float), n + 1)
    return MlpParams(dims, weights, biases, activation, input_scale, n)


def _stage_errors(stages, y_next, y_m, tab: ButcherTableau, sys: OdeSystem, h: float, t_m: float):
    t = t_m + tab.c * h
    F = sys.rhs_batch(t, stages)
    e_stage = stages - h * (tab.A @ F) - y_m[None, :]
    e_next = y_next - h * (tab.b @ F) - y_m
    return t, e_stage, e_next


def pinn_loss(model: MlpParams, y_m, tab: ButcherTableau, sys: OdeSystem, h: float, t_m: float = 0.0):
    """Mean square of the ``(n + 1) * dim`` implicit-step residuals.

    Returns a numpy scalar in the model's parameter dtype.
    """
    _check_shapes(model, tab, sys)
    stages, y_next = model.forward(y_m)
    y_m = np.asarray(y_m, dtype=stages.dtype)
    _, e_stage, e_next = _stage_errors(stages, y_next, y_m, tab, sys, h, t_m)
    return (np.sum(e_stage**2) + np.sum(e_next**2)) / ((tab.n + 1) * sys.dim)


def loss_and_gradient(model: MlpParams, y_m, tab: ButcherTableau, sys: OdeSystem, h: float, t_m: float = 0.0):
    """Loss and its gradient as ``(loss, [dW...], [db...])``."""
    _check_shapes(model, tab, sys)
    y_m = np.asarray(y_m, dtype=float)
    n, d = tab.n, sys.dim
    out, cache = model._forward(y_m)
    block = out.reshape(d, n + 1)
    stages, y_next = block[:, :n].T, block[:, n]
    t, e_stage, e_next = _stage_errors(stages, y_next, y_m, tab, sys, h, t_m)
    N = (n + 1) * d
    loss = float((np.sum(e_stage**2) + np.sum(e_next**2)) / N)

    g_stage = (2.0 / N) * e_stage
    g_next = (2.0 / N) * e_next
    # both residual families depend on the stages through F = f(Y)
    g_F = -h * (tab.A.T @ g_stage) - h * np.outer(tab.b, g_next)
    Jst = sys.jacobian_batch(t, stages)
    g_Y = g_stage + np.einsum("ia,iab->ib", g_F, Jst)

    g_out = np.empty((d, n + 1))
    g_out[:, :n] = g_Y.T
    g_out[:, n] = g_next
    delta = g_out.ravel()

    dW = [None] * len(model.weights)
    db = [None] * len(model.weights)
    for l in range(len(model.weights) - 1, -1, -1):
        a_prev = cache[l][1]
        dW[l] = np.outer(delta, a_prev)
        db[l] = delta.copy()
        if l > 0:
            delta = (model.weights[l].T @ delta) * _act_grad(model.activation, cache[l][0])
    return loss, dW, db


def loss_gradient(model, y_m, tab, sys, h, t_m: float = 0.0):
    """Parameter-shaped gradients of :func:`pinn_loss`, as ``(dW, db)``."""
    _, dW, db = loss_and_gradient(model, y_m, tab, sys, h, t_m)
    return dW, db


def _check_shapes(model: MlpParams, tab: ButcherTableau, sys: OdeSystem):
    if model.n != tab.n or model.dim != sys.dim:
        raise ValueError(f"model has n={model.n}, dim={model.dim}; step needs n={tab.n}, dim={sys.dim}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10_000
    learning_rate: float = 1e-3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")


def train(
    model: MlpParams,
    y_m,
    tab: ButcherTableau,
    sys: OdeSystem,
    h: float,
    cfg: TrainConfig,
    t_m: float = 0.0,
    callback=None,
) -> tuple[MlpParams, list[float]]:
    """Full-batch Adam on the single state ``y_m``.

    Returns a trained copy and the loss recorded before each update.
    ``callback(epoch, loss)`` is invoked every epoch when given.
    """
    model = model.copy()
    params = model.params()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, lr, eps = cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.epsilon
    history: list[float] = []
    for epoch in range(1, cfg.epochs + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            loss, dW, db = loss_and_gradient(model, y_m, tab, sys, h, t_m)
        if not math.isfinite(loss):
            raise TrainingDiverged(epoch, history)
        history.append(loss)
        if callback is not None:
            callback(epoch, loss)
        c1 = 1.0 - b1**epoch
        c2 = 1.0 - b2**epoch
        for p, g, mi, vi in zip(params, [*dW, *db], m, v):
            mi *= b1
            mi += (1.0 - b1) * g
            vi *= b2
            vi += (1.0 - b2) * g * g
            p -= lr * (mi / c1) / (np.sqrt(vi / c2) + eps)
    return model, history
