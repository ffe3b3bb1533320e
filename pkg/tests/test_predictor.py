import math

import numpy as np
import pytest

from glirk.irk import NewtonSettings, irk_residual, newton_solve, stage_times
from glirk.mlp import init_mlp
from glirk.odes import Linear, Lorenz, Q0, lorenz_rhs, LorenzParams
from glirk.predictor import (
    PredictorKind,
    make_predictor,
    predict_constant,
    predict_euler,
    predict_neural,
    predict_substep,
)
from glirk.reference import hermite_sample, lorenz_rk4, rk4_march
from glirk.tableau import build_tableau


def test_constant_predictor():
    tab = build_tableau(3)
    assert np.all(predict_constant([4.0], tab, Linear(0.0), 0.5) == 0)
    k = predict_constant(Q0, build_tableau(2), Lorenz(), 0.3)
    assert np.allclose(k, [lorenz_rhs(LorenzParams(), 0, Q0)] * 2)
    assert np.all(predict_constant([1.0], tab, Linear(1.0), 0.5) == 1.0)


def test_euler_predictor():
    sys, tab = Lorenz(), build_tableau(4)
    assert np.array_equal(predict_euler(Q0, tab, sys, 0.0), predict_constant(Q0, tab, sys, 0.0))
    k = predict_euler([1.0], build_tableau(1), Linear(1.0), 1.0)
    assert k[0, 0] == pytest.approx(1.5)


def test_substep_predictor():
    tab = build_tableau(4)
    assert np.all(predict_substep([2.0], tab, Linear(0.0), 0.5, m=10) == 0)
    k = predict_substep([1.0], tab, Linear(-1.0), 0.5, m=1000)
    # slopes are -Y, so stage states are -k
    assert np.max(np.abs(-k[:, 0] - np.exp(-tab.c * 0.5))) <= 1e-8
    with pytest.raises(ValueError):
        predict_substep([1.0], tab, Linear(-1.0), 0.5, m=0)


def test_substep_residual_decreases_with_m():
    sys, tab, h = Linear(-3.0), build_tableau(4), 0.7
    res = [np.linalg.norm(irk_residual(sys, tab, h, 0.0, [1.0], predict_substep([1.0], tab, sys, h, m=m)))
           for m in (10, 100, 1000)]
    assert res[0] > res[1] > res[2]


def test_predictors_agree_as_h_shrinks():
    sys, tab = Lorenz(), build_tableau(5)
    base = predict_constant(Q0, tab, sys, 0.0)
    prev = None
    for h in (1e-2, 1e-3, 1e-4):
        dev = max(np.max(np.abs(p(Q0, tab, sys, h) - base)) for p in (predict_euler, predict_substep))
        if prev is not None:
            assert dev < 0.2 * prev
        prev = dev


def test_rk4_reference_agrees_with_generic_march():
    p = LorenzParams()
    _, ys, _ = rk4_march(Lorenz(p), 0.0, Q0, 0.5, 500)
    assert np.allclose(lorenz_rk4(p, Q0, 0.5, 1e-3), ys[-1], atol=1e-10)


def test_hermite_sampling_is_exact_for_cubics():
    ts = np.linspace(0, 1, 5)
    f = lambda t: 2 * t**3 - t + 1
    df = lambda t: 6 * t**2 - 1
    tq = np.array([0.1, 0.33, 0.99])
    out = hermite_sample(ts, f(ts)[:, None], df(ts)[:, None], tq)
    assert np.allclose(out[:, 0], f(tq), atol=1e-14)


def test_guess_quality_ordering_substep_vs_euler():
    sys, tab, h = Lorenz(), build_tableau(50), 0.75
    sub = np.linalg.norm(irk_residual(sys, tab, h, 0, Q0, predict_substep(Q0, tab, sys, h, m=10_000)))
    eul = np.linalg.norm(irk_residual(sys, tab, h, 0, Q0, predict_euler(Q0, tab, sys, h)))
    assert sub < eul


def test_neural_predictor_data_path():
    sys, tab = Lorenz(), build_tableau(4)
    model = init_mlp(3, 4, seed=0)
    for W in model.weights:
        W[:] = 0.0
    model.biases[-1][:] = np.repeat(Q0, 5)
    k = predict_neural(model, Q0, tab, sys, 0.1)
    assert np.allclose(k, predict_constant(Q0, tab, sys, 0.1))
    with pytest.raises(ValueError):
        predict_neural(init_mlp(3, 5), Q0, tab, sys, 0.1)


def test_untrained_network_outputs_near_bias():
    sys, tab, h = Lorenz(), build_tableau(50), 0.75
    model = init_mlp(3, 50, seed=0, y_m=Q0)
    stages, y_next = model.forward(Q0)
    # hidden activations are O(1) and Glorot output weights are O(0.2)
    assert np.max(np.abs(stages - np.array(Q0))) < 1.0
    assert np.max(np.abs(y_next - np.array(Q0))) < 1.0
    guess = predict_neural(model, Q0, tab, sys, h)
    assert np.all(np.isfinite(guess)) and guess.shape == (50, 3)


def test_predictor_kind_parsing():
    assert PredictorKind.parse("substep:10000") == PredictorKind("substep", 10000)
    assert PredictorKind.parse("nn").kind == "neural"
    assert str(PredictorKind.parse("euler")) == "euler"
    for bad in ("substep:0", "rk4", "euler:3"):
        with pytest.raises(ValueError):
            PredictorKind.parse(bad)


def test_make_predictor():
    sys, tab = Linear(-1.0), build_tableau(3)
    for spec in ("constant", "euler", "substep:20"):
        k = make_predictor(PredictorKind.parse(spec), sys, tab, 0.2)([1.0], 0.0)
        assert k.shape == (3, 1)
    with pytest.raises(ValueError):
        make_predictor(PredictorKind.parse("nn"), sys, tab, 0.2)
