"""Fast invariant checks behind ``glirk verify``."""
from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

from .irk import advance_step, irk_jacobian_assemble, irk_residual, newton_solve, NewtonSettings
from .legendre import discrete_orthogonality_defect, gauss_legendre_rule, vandermonde
from .odes import Linear, Lorenz, finite_difference_jacobian
from .predictor import predict_constant
from .tableau import build_tableau, tableau_invariant_defects, tableau_vs_bruteforce_defect

TABLEAU_SIZES = [*range(1, 21), 50, 100]


class Check(NamedTuple):
    name: str
    value: float
    limit: float

    @property
    def passed(self) -> bool:
        return self.value <= self.limit

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: {self.value:.3e} (limit {self.limit:.0e})"


def pade_exp(n: int, z: complex) -> complex:
    """Diagonal (n, n) Pade approximant of exp(z) from its closed-form coefficients."""
    coef = [
        math.factorial(2 * n - j) * math.factorial(n)
        / (math.factorial(2 * n) * math.factorial(j) * math.factorial(n - j))
        for j in range(n + 1)
    ]
    num = sum(c * z**j for j, c in enumerate(coef))
    den = sum(c * (-z) ** j for j, c in enumerate(coef))
    return num / den


def check_legendre() -> list[Check]:
    ortho = vand = 0.0
    for n in range(1, 101):
        rule = gauss_legendre_rule(n)
        ortho = max(ortho, discrete_orthogonality_defect(rule))
        V, Vinv = vandermonde(rule)
        vand = max(vand, float(np.max(np.abs(Vinv @ V - np.eye(n)))))
    return [
        Check("discrete orthogonality, n <= 100", ortho, 1e-11),
        Check("Vandermonde inverse, n <= 100", vand, 1e-11),
    ]


def check_tableau() -> list[Check]:
    brute = max(tableau_vs_bruteforce_defect(n) for n in range(1, 13))
    worst = {"weights_sum": 0.0, "row_sums": 0.0, "order_conditions": 0.0}
    for n in TABLEAU_SIZES:
        for key, val in tableau_invariant_defects(build_tableau(n)).items():
            worst[key] = max(worst[key], val)
    return [
        Check("closed-form A vs brute-force integration, n <= 12", brute, 1e-9),
        Check("sum of b", worst["weights_sum"], 1e-13),
        Check("row sums of A equal c", worst["row_sums"], 1e-12),
        Check("order conditions B(k), k <= min(2n, 30)", worst["order_conditions"], 1e-12),
    ]


def jacobian_defect(sys, n: int, h: float, rng: np.random.Generator, scale: float) -> float:
    """Relative max deviation of the assembled stage Jacobian from central differences."""
    tab = build_tableau(n)
    y_m = rng.uniform(-scale, scale, sys.dim)
    k = rng.uniform(-scale, scale, (n, sys.dim))
    J = irk_jacobian_assemble(sys, tab, h, 0.0, y_m, k)
    fun = lambda flat: irk_residual(sys, tab, h, 0.0, y_m, flat.reshape(k.shape))
    fd = finite_difference_jacobian(fun, k.ravel())
    return float(np.max(np.abs(J - fd)) / max(1.0, np.max(np.abs(fd))))


def check_jacobian(seed: int = 0, states: int = 5) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for sys, scale in ((Lorenz(), 20.0), (Linear(-1.7), 2.0)):
        for n in (1, 2, 5, 10):
            for _ in range(states):
                worst = max(worst, jacobian_defect(sys, n, 0.1, rng, scale))
    return [Check("stage Jacobian vs finite differences", worst, 1e-6)]


def pade_defect(n: int, hl: float) -> float:
    tab = build_tableau(n)
    sys = Linear(hl)
    guess = predict_constant([1.0], tab, sys, 1.0)
    k, report = newton_solve(sys, tab, 1.0, 0.0, [1.0], guess, NewtonSettings(tol=1e-14, max_iters=5))
    return abs(float(advance_step(sys, tab, 1.0, 0.0, [1.0], k)[0]) - pade_exp(n, hl))


def check_pade() -> list[Check]:
    grid = np.linspace(-2.0, 0.9, 20)
    worst = max(pade_defect(n, float(z)) for n in (1, 2, 3) for z in grid)
    return [Check("one-step stability function equals (n,n) Pade, n <= 3", worst, 1e-11)]


SUITES: dict[str, Callable[[], list[Check]]] = {
    "legendre": check_legendre,
    "tableau": check_tableau,
    "jacobian": check_jacobian,
    "pade": check_pade,
}


def run_all() -> list[Check]:
    return [c for suite in SUITES.values() for c in suite()]
