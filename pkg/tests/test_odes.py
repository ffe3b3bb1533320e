import math

import numpy as np
import pytest

from glirk.odes import (
    Linear,
    Lorenz,
    LorenzParams,
    Q0,
    finite_difference_jacobian,
    linear_test_rhs,
    lorenz_fixed_points,
    lorenz_jacobian,
    lorenz_rhs,
    make_system,
)

P = LorenzParams()


def test_defaults():
    assert (P.sigma, P.rho, P.beta) == (10.0, 28.0, 8.0 / 3.0)


def test_lorenz_rhs_values():
    assert np.array_equal(lorenz_rhs(P, 0.0, [0, 0, 0]), [0, 0, 0])
    assert np.allclose(lorenz_rhs(P, 0.0, Q0), [-64.28, -86.5348, -52.17952], atol=1e-12)
    r = math.sqrt(P.beta * (P.rho - 1))
    assert np.max(np.abs(lorenz_rhs(P, 0.0, [r, r, P.rho - 1]))) <= 1e-12


def test_fixed_points():
    for fp in lorenz_fixed_points(P):
        assert np.max(np.abs(lorenz_rhs(P, 0.0, fp))) <= 1e-10


def test_lorenz_jacobian_values():
    J0 = lorenz_jacobian(P, 0.0, [0, 0, 0])
    assert np.allclose(J0, [[-10, 10, 0], [28, -1, 0], [0, 0, -8 / 3]])
    J = lorenz_jacobian(P, 0.0, Q0)
    assert J[1, 0] == pytest.approx(28 - 35.82)
    assert J[2, 0] == pytest.approx(4.112)
    assert J[2, 1] == pytest.approx(10.54)


def test_lorenz_jacobian_finite_differences():
    rng = np.random.default_rng(1)
    for _ in range(100):
        y = rng.uniform(-50, 50, 3)
        fd = finite_difference_jacobian(lambda v: lorenz_rhs(P, 0.0, v), y)
        J = lorenz_jacobian(P, 0.0, y)
        assert np.max(np.abs(J - fd)) <= 1e-6 * max(1.0, np.max(np.abs(fd)))


def test_batched_forms_match():
    sys = Lorenz(LorenzParams(sigma=9.0, rho=30.0, beta=2.5))
    Y = np.random.default_rng(2).normal(size=(6, 3)) * 10
    t = np.zeros(6)
    assert np.allclose(sys.rhs_batch(t, Y), [sys.rhs(0, y) for y in Y])
    assert np.allclose(sys.jacobian_batch(t, Y), [sys.jacobian(0, y) for y in Y])


def test_linear_system():
    assert linear_test_rhs(0.0, 0.0, [3.0]).tolist() == [0.0]
    assert linear_test_rhs(1.0, 0.0, [2.0]).tolist() == [2.0]
    assert linear_test_rhs(-2.5, 0.0, [4.0]).tolist() == [-10.0]
    sys = Linear(-2.5)
    assert sys.jacobian(0.0, [4.0]).tolist() == [[-2.5]]
    assert sys.jacobian_batch(np.zeros(2), np.ones((2, 1))).shape == (2, 1, 1)


def test_make_system():
    assert make_system("lorenz", rho=20.0).p.rho == 20.0
    assert make_system("linear", **{"lambda": 2.0}).lam == 2.0
    with pytest.raises(ValueError):
        make_system("vdp")
    with pytest.raises(TypeError):
        make_system("lorenz", gamma=1.0)
