"""Classical explicit RK4, used for predictors and as a reference trajectory."""
from __future__ import annotations

import numpy as np

from .odes import LorenzParams, OdeSystem


def rk4_march(sys: OdeSystem, t0: float, y0, h: float, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Take ``m`` uniform RK4 substeps over [t0, t0 + h].

    Returns the grid times, states ``(m + 1, dim)`` and slopes at those states.
    """
    dt = h / m
    ts = t0 + dt * np.arange(m + 1)
    ys = np.empty((m + 1, sys.dim))
    fs = np.empty((m + 1, sys.dim))
    y = np.asarray(y0, dtype=float).copy()
    f = sys.rhs
    ys[0] = y
    k1 = f(ts[0], y)
    fs[0] = k1
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(m):
            t = ts[s]
            k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
            k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
            k4 = f(t + dt, y + dt * k3)
            y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            k1 = f(ts[s + 1], y)
            ys[s + 1] = y
            fs[s + 1] = k1
    return ts, ys, fs


def hermite_sample(ts: np.ndarray, ys: np.ndarray, fs: np.ndarray, tq) -> np.ndarray:
    """Cubic Hermite interpolation of a uniform-grid trajectory at times ``tq``."""
    tq = np.atleast_1d(np.asarray(tq, dtype=float))
    dt = ts[1] - ts[0]
    idx = np.clip(((tq - ts[0]) / dt).astype(int), 0, len(ts) - 2)
    s = ((tq - ts[idx]) / dt)[:, None]
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * ys[idx] + h10 * dt * fs[idx] + h01 * ys[idx + 1] + h11 * dt * fs[idx + 1]


def lorenz_rk4(p: LorenzParams, y0, t_end: float, dt: float) -> np.ndarray:
    """Fixed-step RK4 for Lorenz on plain floats, fast enough for dt ~ 1e-5."""
    sigma, rho, beta = p.sigma, p.rho, p.beta
    x, y, z = (float(v) for v in y0)
    steps = int(round(t_end / dt))
    if abs(steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be a whole number of steps")
    half, sixth = 0.5 * dt, dt / 6.0
    for _ in range(steps):
        a1 = sigma * (y - x); b1 = x * (rho - z) - y; c1 = x * y - beta * z
        x2 = x + half * a1; y2 = y + half * b1; z2 = z + half * c1
        a2 = sigma * (y2 - x2); b2 = x2 * (rho - z2) - y2; c2 = x2 * y2 - beta * z2
        x3 = x + half * a2; y3 = y + half * b2; z3 = z + half * c2
        a3 = sigma * (y3 - x3); b3 = x3 * (rho - z3) - y3; c3 = x3 * y3 - beta * z3
        x4 = x + dt * a3; y4 = y + dt * b3; z4 = z + dt * c3
        a4 = sigma * (y4 - x4); b4 = x4 * (rho - z4) - y4; c4 = x4 * y4 - beta * z4
        x += sixth * (a1 + 2 * a2 + 2 * a3 + a4)
        y += sixth * (b1 + 2 * b2 + 2 * b3 + b4)
        z += sixth * (c1 + 2 * c2 + 2 * c3 + c4)
    return np.array([x, y, z])
