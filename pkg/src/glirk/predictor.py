"""Initial guesses for the stage slopes of one implicit step.

Every predictor produces stage *states* and converts them once, here, to
slopes ``k[i] = f(t_m + c_i h, Y[i])`` so the Newton solver always starts in
slope space.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np

from .irk import DivergedState, stage_times
from .odes import OdeSystem
from .reference import hermite_sample, rk4_march
from .tableau import ButcherTableau


def states_to_slopes(sys: OdeSystem, tab: ButcherTableau, h: float, t_m: float, Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        k = sys.rhs_batch(stage_times(tab, h, t_m), Y)
    if not np.all(np.isfinite(k)):
        raise DivergedState("predicted stage states give non-finite slopes")
    return k


def predict_constant(y_m, tab: ButcherTableau, sys: OdeSystem, h: float, t_m: float = 0.0) -> np.ndarray:
    Y = np.tile(np.asarray(y_m, dtype=float), (tab.n, 1))
    return states_to_slopes(sys, tab, h, t_m, Y)


def predict_euler(y_m, tab: ButcherTableau, sys: OdeSystem, h: float, t_m: float = 0.0) -> np.ndarray:
    """Forward Euler from y_m to each stage time."""
    y_m = np.asarray(y_m, dtype=float)
    Y = y_m[None, :] + (tab.c * h)[:, None] * sys.rhs(t_m, y_m)[None, :]
    return states_to_slopes(sys, tab, h, t_m, Y)


def predict_substep(y_m, tab: ButcherTableau, sys: OdeSystem, h: float, t_m: float = 0.0, m: int = 1000) -> np.ndarray:
    """RK4 with ``m`` substeps across the step, Hermite-sampled at the stage times."""
    if m < 1:
        raise ValueError("substep count must be at least 1")
    ts, ys, fs = rk4_march(sys, t_m, y_m, h, m)
    if not np.all(np.isfinite(ys)):
        raise DivergedState("explicit substep trajectory blew up")
    Y = hermite_sample(ts, ys, fs, stage_times(tab, h, t_m))
    return states_to_slopes(sys, tab, h, t_m, Y)


def predict_neural(model, y_m, tab: ButcherTableau, sys: OdeSystem, h: float, t_m: float = 0.0) -> np.ndarray:
    """Stage states from a trained network; its full-step output is not used here."""
    if model.n != tab.n or model.dim != sys.dim:
        raise ValueError(
            f"model predicts n={model.n}, dim={model.dim} but the step needs n={tab.n}, dim={sys.dim}"
        )
    stages, _ = model.forward(y_m)
    return states_to_slopes(sys, tab, h, t_m, stages)


@dataclass(frozen=True)
class PredictorKind:
    """Parsed ``--predictor`` value: constant, euler, substep:M or nn."""

    kind: str
    substeps: int = 0

    @classmethod
    def parse(cls, text: str) -> "PredictorKind":
        name, _, arg = text.partition(":")
        if name in ("constant", "euler", "nn", "neural"):
            if arg:
                raise ValueError(f"predictor {name!r} takes no argument")
            return cls("neural" if name == "nn" else name)
        if name == "substep":
            m = int(arg) if arg else 1000
            if m < 1:
                raise ValueError("substep count must be at least 1")
            return cls("substep", m)
        raise ValueError(f"unknown predictor {text!r}")

    def __str__(self):
        return f"substep:{self.substeps}" if self.kind == "substep" else self.kind


def make_predictor(kind: PredictorKind, sys: OdeSystem, tab: ButcherTableau, h: float, model=None):
    """Return a callable ``(y_m, t_m) -> k`` for :func:`glirk.irk.integrate`."""
    if kind.kind == "constant":
        fn = predict_constant
    elif kind.kind == "euler":
        fn = predict_euler
    elif kind.kind == "substep":
        fn = partial(predict_substep, m=kind.substeps)
    elif kind.kind == "neural":
        if model is None:
            raise ValueError("the neural predictor needs a model")
        return lambda y, t: predict_neural(model, y, tab, sys, h, t)
    else:
        raise ValueError(kind.kind)
    return lambda y, t: fn(y, tab, sys, h, t)
