"""Gauss-Legendre implicit Runge-Kutta steps solved by damped Newton iteration.

The Newton unknown is the block of stage slopes ``k`` with shape ``(n, dim)``:

    k[i] = f(t_m + c_i h, y_m + h * sum_j A[i, j] k[j])

Stage states follow as ``Y = y_m + h A k`` and the step result as
``y_m + h b @ k``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .legendre import interpolant_matrix
from .odes import OdeSystem
from .tableau import ButcherTableau

log = logging.getLogger(__name__)

PIVOT_FLOOR = 1e-300


class IrkError(RuntimeError):
    """Base class for stage-solve failures; carries the report when one exists."""

    def __init__(self, message: str, report: "NewtonReport | None" = None):
        super().__init__(message)
        self.report = report


class SingularJacobian(IrkError):
    pass


class DivergedState(IrkError):
    pass


class MaxItersExceeded(IrkError):
    pass


@dataclass(frozen=True)
class NewtonSettings:
    tol: float = 1e-10
    max_iters: int = 50
    gamma: float = 1.0
    # "l2" is the plain 2-norm over all n*dim entries; "rms" divides by sqrt(n*dim)
    norm: str = "l2"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.norm not in ("l2", "rms"):
            raise ValueError("norm must be 'l2' or 'rms'")

    def measure(self, R: np.ndarray) -> float:
        value = float(np.linalg.norm(R))
        if self.norm == "rms":
            value /= np.sqrt(R.size)
        return value


@dataclass
class NewtonReport:
    converged: bool
    iterations: int
    residual_history: list[float]
    gamma: float
    status: str = "converged"

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1]

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "status": self.status,
            "iterations": self.iterations,
            "gamma": self.gamma,
            "final_residual": self.final_residual,
            "residual_history": list(self.residual_history),
        }


def stage_times(tab: ButcherTableau, h: float, t_m: float) -> np.ndarray:
    return t_m + tab.c * h


def stage_states(tab: ButcherTableau, h: float, y_m, k: np.ndarray) -> np.ndarray:
    return np.asarray(y_m, dtype=float)[None, :] + h * (tab.A @ k)


def _evaluate(sys: OdeSystem, t: np.ndarray, Y: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        F = sys.rhs_batch(t, Y)
    if not np.all(np.isfinite(F)):
        raise DivergedState("non-finite right-hand side at stage states")
    return F


def irk_residual(sys: OdeSystem, tab: ButcherTableau, h: float, t_m: float, y_m, k) -> np.ndarray:
    """R[i] = k[i] - f(t_m + c_i h, y_m + h sum_j A[i, j] k[j])."""
    k = np.asarray(k, dtype=float)
    if k.shape != (tab.n, sys.dim):
        raise ValueError(f"stage block shape {k.shape} != {(tab.n, sys.dim)}")
    Y = stage_states(tab, h, y_m, k)
    return k - _evaluate(sys, stage_times(tab, h, t_m), Y)


def irk_jacobian_assemble(sys: OdeSystem, tab: ButcherTableau, h: float, t_m: float, y_m, k) -> np.ndarray:
    """Dense d(residual)/dk, flattened stage-major: row i*dim + a, column j*dim + b.

    Entry ((i, a), (j, b)) is delta_ij delta_ab - h A[i, j] J_i[a, b] with J_i
    the ODE Jacobian at stage state i.
    """
    k = np.asarray(k, dtype=float)
    Y = stage_states(tab, h, y_m, k)
    Jst = sys.jacobian_batch(stage_times(tab, h, t_m), Y)  # (n, dim, dim)
    n, d = tab.n, sys.dim
    block = np.einsum("ij,iab->iajb", tab.A, Jst).reshape(n * d, n * d)
    return np.eye(n * d) - h * block


def irk_jacobian_apply(sys: OdeSystem, tab: ButcherTableau, h: float, t_m: float, y_m, k, q) -> np.ndarray:
    """Matrix-free product of the stage Jacobian with a block ``q`` of shape (n, dim)."""
    Y = stage_states(tab, h, y_m, k)
    Jst = sys.jacobian_batch(stage_times(tab, h, t_m), Y)
    return q - h * np.einsum("iab,ij,jb->ia", Jst, tab.A, q)


def newton_solve(
    sys: OdeSystem,
    tab: ButcherTableau,
    h: float,
    t_m: float,
    y_m,
    guess,
    settings: NewtonSettings = NewtonSettings(),
    strict: bool = False,
) -> tuple[np.ndarray, NewtonReport]:
    """Solve the stage equations for the slopes ``k`` starting from ``guess``.

    Each iteration solves J q = -R by LU with partial pivoting and applies
    ``k += gamma * q``. Running out of iterations returns a report with
    ``converged=False`` (or raises :class:`MaxItersExceeded` when ``strict``).
    Singular Jacobians and non-finite iterates always raise; the exception
    carries the report so far.
    """
    y_m = np.asarray(y_m, dtype=float)
    k = np.array(guess, dtype=float)
    if not np.all(np.isfinite(k)):
        raise DivergedState("initial guess is not finite")
    report = NewtonReport(converged=False, iterations=0, residual_history=[], gamma=settings.gamma)

    def residual(kk):
        try:
            return irk_residual(sys, tab, h, t_m, y_m, kk)
        except DivergedState as exc:
            report.status = "diverged"
            raise DivergedState(str(exc), report) from None

    R = residual(k)
    report.residual_history.append(settings.measure(R))
    while True:
        if report.residual_history[-1] <= settings.tol:
            report.converged = True
            report.status = "converged"
            return k, report
        if report.iterations >= settings.max_iters:
            report.status = "max_iters"
            if strict:
                raise MaxItersExceeded(f"no convergence in {settings.max_iters} iterations", report)
            return k, report
        J = irk_jacobian_assemble(sys, tab, h, t_m, y_m, k)
        if not np.all(np.isfinite(J)):
            report.status = "diverged"
            raise DivergedState("non-finite stage Jacobian", report)
        with warnings.catch_warnings():
            # exact singularity is detected from the pivots below
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(J, check_finite=False)
        if np.min(np.abs(np.diag(lu))) < PIVOT_FLOOR:
            report.status = "singular"
            raise SingularJacobian("stage Jacobian is singular", report)
        q = scipy.linalg.lu_solve((lu, piv), -R.ravel(), check_finite=False)
        k = k + settings.gamma * q.reshape(k.shape)
        report.iterations += 1
        if not np.all(np.isfinite(k)):
            report.status = "diverged"
            raise DivergedState("non-finite Newton iterate", report)
        R = residual(k)
        report.residual_history.append(settings.measure(R))
        log.debug("newton it=%d residual=%.3e", report.iterations, report.residual_history[-1])


def advance_step(sys: OdeSystem, tab: ButcherTableau, h: float, t_m: float, y_m, k) -> np.ndarray:
    return np.asarray(y_m, dtype=float) + h * (tab.b @ np.asarray(k, dtype=float))


def dense_output(tab: ButcherTableau, h: float, t_m: float, y_m, stage_states, t_query) -> np.ndarray:
    """Evaluate the polynomial through the stage states at ``t_query``.

    ``t_query`` may be a scalar (returns a ``(dim,)`` vector) or an array
    (returns ``(len(t_query), dim)``).
    """
    tq = np.asarray(t_query, dtype=float)
    if np.any(tq < t_m - 1e-12) or np.any(tq > t_m + h + 1e-12):
        raise ValueError(f"query time outside the step [{t_m}, {t_m + h}]")
    xi = np.clip(2.0 * (tq - t_m) / h - 1.0, -1.0, 1.0)
    L = interpolant_matrix(tab.rule, xi.ravel())
    out = L @ np.asarray(stage_states, dtype=float)
    return out[0] if tq.ndim == 0 else out


@dataclass
class StepResult:
    t: float
    h: float
    y_start: np.ndarray
    y_end: np.ndarray
    k: np.ndarray
    stages: np.ndarray
    report: NewtonReport
    guess_residual: float = field(default=float("nan"))


Predictor = Callable[[np.ndarray, float], np.ndarray]


def integrate(
    sys: OdeSystem,
    tab: ButcherTableau,
    h: float,
    t0: float,
    y0,
    steps: int,
    predictor: Predictor,
    settings: NewtonSettings = NewtonSettings(),
    stop_on_failure: bool = True,
) -> list[StepResult]:
    """March ``steps`` steps; ``predictor(y_m, t_m)`` supplies each initial slope block.

    Stops after the first unconverged step unless ``stop_on_failure`` is false.
    Singular or divergent solves are recorded as failed steps, not raised.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    results = []
    t, y = float(t0), np.asarray(y0, dtype=float)
    for _ in range(steps):
        guess = predictor(y, t)
        try:
            guess_res = settings.measure(irk_residual(sys, tab, h, t, y, guess))
        except DivergedState:
            guess_res = float("inf")
        try:
            k, report = newton_solve(sys, tab, h, t, y, guess, settings)
        except IrkError as exc:
            report = exc.report or NewtonReport(False, 0, [float("inf")], settings.gamma, "diverged")
            k = np.full_like(guess, np.nan)
        y_next = advance_step(sys, tab, h, t, y, k)
        results.append(
            StepResult(
                t=t, h=h, y_start=y, y_end=y_next, k=k,
                stages=stage_states(tab, h, y, k), report=report, guess_residual=guess_res,
            )
        )
        if not report.converged and stop_on_failure:
            break
        t, y = t + h, y_next
    return results
