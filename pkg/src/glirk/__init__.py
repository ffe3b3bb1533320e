"""Gauss-Legendre implicit Runge-Kutta integration with Newton-corrected predictors."""

__version__ = "0.1.0"

from .irk import (
    DivergedState,
    IrkError,
    MaxItersExceeded,
    NewtonReport,
    NewtonSettings,
    SingularJacobian,
    advance_step,
    dense_output,
    integrate,
    irk_jacobian_assemble,
    irk_residual,
    newton_solve,
)
from .legendre import QuadratureRule, gauss_legendre_rule, interpolant_eval, legendre_eval
from .odes import Linear, Lorenz, LorenzParams, OdeSystem, Q0
from .tableau import ButcherTableau, build_tableau
