"""ODE systems with analytic Jacobians."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class OdeSystem:
    """Right-hand side f(t, y) and Jacobian df/dy of an ODE system.

    Subclasses set ``dim`` and ``name`` and implement :meth:`rhs` and
    :meth:`jacobian`. The batched variants work on an ``(m, dim)`` array of
    states and may be overridden for speed.
    """

    dim: int
    name: str

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, t: float, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def rhs_batch(self, t: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return np.array([self.rhs(ti, yi) for ti, yi in zip(t, Y)])

    def jacobian_batch(self, t: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return np.array([self.jacobian(ti, yi) for ti, yi in zip(t, Y)])

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0


# initial condition used in the Lorenz experiments
Q0 = (10.54, 4.112, 35.82)


def lorenz_rhs(p: LorenzParams, t: float, y) -> np.ndarray:
    x, yy, z = y
    return np.array([p.sigma * (yy - x), x * (p.rho - z) - yy, x * yy - p.beta * z])


def lorenz_jacobian(p: LorenzParams, t: float, y) -> np.ndarray:
    # d/dx of x (rho - z) - y is rho - z
    x, yy, z = y
    return np.array(
        [
            [-p.sigma, p.sigma, 0.0],
            [p.rho - z, -1.0, -x],
            [yy, x, -p.beta],
        ]
    )


def lorenz_fixed_points(p: LorenzParams) -> list[np.ndarray]:
    r = math.sqrt(p.beta * (p.rho - 1.0))
    return [
        np.zeros(3),
        np.array([r, r, p.rho - 1.0]),
        np.array([-r, -r, p.rho - 1.0]),
    ]


class Lorenz(OdeSystem):
    dim = 3
    name = "lorenz"

    def __init__(self, params: LorenzParams | None = None):
        self.p = params or LorenzParams()

    def rhs(self, t, y):
        return lorenz_rhs(self.p, t, y)

    def jacobian(self, t, y):
        return lorenz_jacobian(self.p, t, y)

    def rhs_batch(self, t, Y):
        p = self.p
        x, yy, z = Y[:, 0], Y[:, 1], Y[:, 2]
        return np.stack([p.sigma * (yy - x), x * (p.rho - z) - yy, x * yy - p.beta * z], axis=1)

    def jacobian_batch(self, t, Y):
        p = self.p
        m = Y.shape[0]
        J = np.zeros((m, 3, 3))
        J[:, 0, 0] = -p.sigma
        J[:, 0, 1] = p.sigma
        J[:, 1, 0] = p.rho - Y[:, 2]
        J[:, 1, 1] = -1.0
        J[:, 1, 2] = -Y[:, 0]
        J[:, 2, 0] = Y[:, 1]
        J[:, 2, 1] = Y[:, 0]
        J[:, 2, 2] = -p.beta
        return J

    def params(self):
        return {"sigma": self.p.sigma, "rho": self.p.rho, "beta": self.p.beta}


def linear_test_rhs(lam: float, t: float, y) -> np.ndarray:
    return lam * np.asarray(y, dtype=float)


class Linear(OdeSystem):
    """Scalar test equation y' = lam * y."""

    dim = 1
    name = "linear"

    def __init__(self, lam: float = -1.0):
        self.lam = float(lam)

    def rhs(self, t, y):
        return linear_test_rhs(self.lam, t, y)

    def jacobian(self, t, y):
        return np.array([[self.lam]])

    def rhs_batch(self, t, Y):
        return self.lam * Y

    def jacobian_batch(self, t, Y):
        return np.full((Y.shape[0], 1, 1), self.lam)

    def params(self):
        return {"lambda": self.lam}


def make_system(name: str, **params) -> OdeSystem:
    """Build a system by name; unknown keyword parameters are rejected."""
    if name == "lorenz":
        return Lorenz(LorenzParams(**params))
    if name == "linear":
        lam = params.pop("lambda", params.pop("lam", -1.0))
        if params:
            raise TypeError(f"unexpected parameters for linear system: {sorted(params)}")
        return Linear(lam)
    raise ValueError(f"unknown system {name!r}; expected 'lorenz' or 'linear'")


def finite_difference_jacobian(fun, y, eps: float = 1e-6) -> np.ndarray:
    """Central differences of ``fun`` at ``y``, step scaled by max(1, |y_b|)."""
    y = np.asarray(y, dtype=float)
    f0 = np.asarray(fun(y))
    J = np.empty((f0.size, y.size))
    for b in range(y.size):
        step = eps * max(1.0, abs(y[b]))
        e = np.zeros_like(y)
        e[b] = step
        J[:, b] = (np.asarray(fun(y + e)) - np.asarray(fun(y - e))).ravel() / (2 * step)
    return J
