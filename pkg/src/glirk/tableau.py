"""Gauss-Legendre Butcher tableaus of arbitrary stage count."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .legendre import QuadratureRule, gauss_legendre_rule, lagrange_product, legendre_table


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """Unit-interval tableau: stage k_i uses y + h * sum_j A[i, j] k_j."""

    n: int
    c: np.ndarray
    b: np.ndarray
    A: np.ndarray
    rule: QuadratureRule

    def __post_init__(self):
        for arr in (self.c, self.b, self.A):
            arr.setflags(write=False)

    def to_dict(self) -> dict:
        return {"n": self.n, "c": self.c.tolist(), "b": self.b.tolist(), "A": self.A.tolist()}


def gauss_matrix(rule: QuadratureRule) -> np.ndarray:
    """Closed-form coefficient matrix from Legendre sums.

    A[i, j] = (w_j / 2) * (1 + sum_{s<n} P_s(x_j) (P_{s+1}(x_i) - P_{s-1}(x_i)) / 2)

    with the convention P_{-1} = 1 (not the recurrence's 0) in the s = 0 term.
    """
    n = rule.n
    P = legendre_table(n, rule.nodes)  # P[s, node], s = 0..n
    below = np.empty((n, n))
    below[0] = 1.0  # P_{-1} convention
    below[1:] = P[: n - 1]
    diff = P[1 : n + 1] - below  # diff[s, i] = P_{s+1}(x_i) - P_{s-1}(x_i)
    S = 0.5 * diff.T @ P[:n]  # S[i, j] = sum_s diff[s, i] P_s(x_j) / 2
    return 0.5 * rule.weights[None, :] * (1.0 + S)


@lru_cache(maxsize=None)
def build_tableau(n: int) -> ButcherTableau:
    rule = gauss_legendre_rule(n)
    c = 0.5 * (rule.nodes + 1.0)
    b = 0.5 * rule.weights
    return ButcherTableau(n=rule.n, c=c, b=b, A=gauss_matrix(rule), rule=rule)


def bruteforce_matrix(n: int, panels: int = 64, order: int = 20) -> np.ndarray:
    """A[i, j] = int_0^{c_i} l_j(tau) dtau by composite quadrature of the product form.

    Integration uses numpy's own Gauss-Legendre points, independent of
    :func:`gauss_legendre_rule`; only the interpolation nodes are shared.
    """
    if n > 12:
        raise ValueError("brute-force check is limited to n <= 12")
    rule = gauss_legendre_rule(n)
    c = 0.5 * (rule.nodes + 1.0)
    gx, gw = np.polynomial.legendre.leggauss(order)
    A = np.empty((n, n))
    for i in range(n):
        edges = np.linspace(0.0, c[i], panels + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        tau = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
        wts = (half[:, None] * gw[None, :]).ravel()
        xi = 2.0 * tau - 1.0
        for j in range(n):
            A[i, j] = np.dot(wts, lagrange_product(rule.nodes, j, xi))
    return A


def tableau_vs_bruteforce_defect(n: int) -> float:
    return float(np.max(np.abs(build_tableau(n).A - bruteforce_matrix(n))))


def tableau_invariant_defects(tab: ButcherTableau, kmax: int = 30) -> dict[str, float]:
    """Worst violations of consistency, row-sum and B(k) order conditions."""
    kk = np.arange(1, min(2 * tab.n, kmax) + 1)
    order = np.array([np.dot(tab.b, tab.c ** (k - 1)) - 1.0 / k for k in kk])
    return {
        "weights_sum": abs(float(tab.b.sum()) - 1.0),
        "row_sums": float(np.max(np.abs(tab.A.sum(axis=1) - tab.c))),
        "order_conditions": float(np.max(np.abs(order))),
    }
