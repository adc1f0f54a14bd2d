import logging
from typing import Callable, TypeVar

import numpy as np

from src.errors import SolverFailure

logger = logging.getLogger(__name__)

State = TypeVar("State")


def _finite(state) -> bool:
    if isinstance(state, (tuple, list)):
        return all(_finite(part) for part in state)
    values = getattr(state, "values", state)
    return bool(np.all(np.isfinite(values)))


def _axpy(y, a: float, k):
    """y + a k, applied componentwise to tuples of arrays."""
    if isinstance(y, tuple):
        return tuple(_axpy(yi, a, ki) for yi, ki in zip(y, k))
    return y + a * k


def step_rk4(y: State, rhs: Callable[[State], State], dt: float) -> State:
    """
    One classical Runge-Kutta step for y' = rhs(y).

    The state is an ndarray, a scalar, or a tuple of these; the right-hand side
    is autonomous.

    Raises:
        SolverFailure: if any stage or the update is not finite.
    """
    stages = []
    arg = y
    for weight in (0.5, 0.5, 1.0, None):
        k = rhs(arg)
        if not _finite(k):
            logger.error(f"Non-finite RK4 stage {len(stages) + 1}")
            raise SolverFailure(f"Non-finite values in RK4 stage {len(stages) + 1}")
        stages.append(k)
        if weight is not None:
            arg = _axpy(y, weight * dt, k)

    k1, k2, k3, k4 = stages
    increment = _axpy(_axpy(_axpy(k1, 2.0, k2), 2.0, k3), 1.0, k4)
    result = _axpy(y, dt / 6.0, increment)
    if not _finite(result):
        raise SolverFailure("Non-finite values after RK4 update")
    return result
