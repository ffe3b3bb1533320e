"""Legendre polynomials, Gauss-Legendre rules and nodal interpolation.

Everything here works on the reference interval [-1, 1] in float64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_DOMAIN_SLACK = 1e-12
_MAX_POLISH = 100


class QuadratureError(RuntimeError):
    """Newton polishing of a Legendre root failed to settle."""


def _check_domain(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + _DOMAIN_SLACK):
        raise ValueError(f"Legendre argument outside [-1, 1]: {x}")
    return x


def legendre_eval(s: int, x: float) -> tuple[float, float]:
    """Return ``(P_s(x), P_s'(x))`` from the three-term recurrence.

    The recurrence starts from P_{-1} = 0, P_0 = 1; the derivative uses
    P'_{k+1} = P'_{k-1} + (2k+1) P_k, which stays finite at x = +-1.
    """
    if s < 0:
        raise ValueError("degree must be non-negative")
    x = float(_check_domain(x))
    p_prev, p = 0.0, 1.0
    d_prev, d = 0.0, 0.0
    for k in range(s):
        p_next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        d_next = d_prev + (2 * k + 1) * p
        p_prev, p = p, p_next
        d_prev, d = d, d_next
    return p, d


def legendre_table(nmax: int, x) -> np.ndarray:
    """Values P_0..P_nmax at every point of ``x``; shape ``(nmax + 1, len(x))``."""
    x = np.atleast_1d(_check_domain(x))
    out = np.empty((nmax + 1, x.size))
    out[0] = 1.0
    if nmax >= 1:
        out[1] = x
    for k in range(1, nmax):
        out[k + 1] = ((2 * k + 1) * x * out[k] - k * out[k - 1]) / (k + 1)
    return out


def _pn_and_derivative(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    for k in range(n):
        p_prev, p = p, ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
    # P_n' = n (x P_n - P_{n-1}) / (x^2 - 1); nodes are interior so this is safe
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """n-point Gauss-Legendre rule; nodes ascending, weights positive."""

    n: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def integrate(self, f) -> float:
        """Apply the rule to a vectorised callable on [-1, 1]."""
        return float(np.dot(self.weights, f(self.nodes)))


def gauss_legendre_rule(n: int) -> QuadratureRule:
    """Gauss-Legendre nodes and weights by Newton polishing of cosine guesses.

    Only the non-negative half is iterated; the negative half is its mirror
    image, so the rule is exactly symmetric.
    """
    if not isinstance(n, (int, np.integer)) or n < 1 or n > 200:
        raise ValueError(f"stage count must be an integer in [1, 200], got {n!r}")
    n = int(n)
    half = n // 2
    i = np.arange(half)
    x = np.cos(math.pi * (4 * i + 3) / (4 * n + 2))
    converged = np.zeros(half, dtype=bool)
    for _ in range(_MAX_POLISH):
        if converged.all():
            break
        p, dp = _pn_and_derivative(n, x)
        dx = p / dp
        x = np.where(converged, x, x - dx)
        converged |= (np.abs(dx) <= 2.0 * np.finfo(float).eps * np.abs(x)) | (np.abs(p) <= 1e-15)
    else:
        if not converged.all():
            raise QuadratureError(f"Legendre root polish did not converge for n={n}")

    # x is descending (largest root first); build the ascending full set
    positive = x[::-1]
    if n % 2:
        nodes = np.concatenate([-x, [0.0], positive])
    else:
        nodes = np.concatenate([-x, positive])
    _, dp = _pn_and_derivative(n, nodes)
    weights = 2.0 / ((1.0 - nodes**2) * dp**2)
    weights = 0.5 * (weights + weights[::-1])
    return QuadratureRule(n=n, nodes=nodes, weights=weights)


def discrete_orthogonality_defect(rule: QuadratureRule) -> float:
    """max_{k,l<n} |sum_s w_s P_k(x_s) P_l(x_s) - delta_kl / (k + 1/2)|."""
    P = legendre_table(rule.n - 1, rule.nodes)
    gram = (P * rule.weights) @ P.T
    target = np.diag(1.0 / (np.arange(rule.n) + 0.5))
    return float(np.max(np.abs(gram - target)))


def vandermonde(rule: QuadratureRule) -> tuple[np.ndarray, np.ndarray]:
    """Generalised Vandermonde matrix V[j, k] = P_k(x_j) and its closed-form inverse.

    The inverse is indexed Vinv[k, j] = w_j P_k(x_j) (k + 1/2), so that
    coefficients are ``c = Vinv @ f`` for nodal values ``f = V @ c``.
    """
    P = legendre_table(rule.n - 1, rule.nodes)  # P[k, j]
    V = P.T.copy()
    Vinv = (np.arange(rule.n) + 0.5)[:, None] * P * rule.weights[None, :]
    return V, Vinv


def interpolant_matrix(rule: QuadratureRule, x) -> np.ndarray:
    """All nodal interpolants at the points ``x``: L[q, j] = l_j(x_q)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _, Vinv = vandermonde(rule)
    return legendre_table(rule.n - 1, x).T @ Vinv


def interpolant_eval(rule: QuadratureRule, j: int, x: float) -> float:
    """l_j(x) = w_j sum_s (s + 1/2) P_s(x_j) P_s(x)."""
    if not 0 <= j < rule.n:
        raise IndexError(f"stage index {j} out of range for n={rule.n}")
    Px = legendre_table(rule.n - 1, [x])[:, 0]
    Pj = legendre_table(rule.n - 1, [rule.nodes[j]])[:, 0]
    s = np.arange(rule.n)
    return float(rule.weights[j] * np.sum((s + 0.5) * Pj * Px))


def lagrange_product(nodes, j: int, x):
    """Product form of the j-th Lagrange basis polynomial (used as a check).

    Accepts a scalar or an array of points.
    """
    nodes = np.asarray(nodes, dtype=float)
    others = np.delete(nodes, j)
    x = np.asarray(x, dtype=float)
    vals = np.prod((x[..., None] - others) / (nodes[j] - others), axis=-1)
    return float(vals) if vals.ndim == 0 else vals
