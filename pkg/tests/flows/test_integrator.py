import math

import numpy as np
import pytest

from src.errors import SolverFailure
from src.flows.integrator import step_rk4


def integrate(rhs, y, dt, steps):
    for _ in range(steps):
        y = step_rk4(y, rhs, dt)
    return y


def test_fourth_order_on_exponential():
    """Halving the step should reduce the global error by about 16."""
    errors = [abs(integrate(lambda y: y, 1.0, 1.0 / m, m) - math.e) for m in (10, 20)]
    assert 14.0 < errors[0] / errors[1] < 17.0


def test_tuple_state():
    def oscillator(state):
        q, p = state
        return p, -q

    q, p = integrate(oscillator, (np.ones(3), np.zeros(3)), 0.01, 100)
    assert np.allclose(q, math.cos(1.0), atol=1e-9)
    assert np.allclose(p, -math.sin(1.0), atol=1e-9)


def test_non_finite_stage_raises():
    with pytest.raises(SolverFailure):
        step_rk4(np.ones(4), lambda y: y * np.nan, 0.1)


def test_overflowing_update_raises():
    with pytest.raises(SolverFailure):
        step_rk4(np.full(2, 1e300), lambda y: y * 1e10, 1e10)
