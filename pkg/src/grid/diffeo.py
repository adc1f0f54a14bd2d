import logging
from dataclasses import dataclass, field

import numpy as np

from src.errors import DiffeomorphismError
from src.grid.periodic import (
    PeriodicFunction,
    derivative,
    evaluate,
    evaluate_with_slope,
    grid_points,
)

logger = logging.getLogger(__name__)

SLOPE_FLOOR = 1e-8
INVERSION_TOL = 1e-12
MAX_NEWTON_ITERATIONS = 60


@dataclass(frozen=True, eq=False)
class DiffeoS1:
    """
    Orientation-preserving circle diffeomorphism stored through its periodic
    displacement p, so that the lift is phi(x) = x + p(x) and phi(x + 1) = phi(x) + 1
    holds by construction.
    """

    displacement: PeriodicFunction
    min_slope: float = field(init=False)

    def __post_init__(self):
        if not isinstance(self.displacement, PeriodicFunction):
            object.__setattr__(
                self, "displacement", PeriodicFunction(self.displacement)
            )
        min_slope = float(np.min(self.slope().values))
        if not min_slope > 0:
            raise DiffeomorphismError(
                f"Lift is not strictly increasing (min slope {min_slope:.3e})",
                min_slope=min_slope,
            )
        object.__setattr__(self, "min_slope", min_slope)

    @property
    def n(self) -> int:
        return self.displacement.n

    def lift_values(self) -> np.ndarray:
        return grid_points(self.n) + self.displacement.values

    def slope(self) -> PeriodicFunction:
        """phi_x = 1 + p_x."""
        return 1.0 + derivative(self.displacement, 1)

    def curvature(self) -> PeriodicFunction:
        """phi_xx = p_xx."""
        return derivative(self.displacement, 2)

    def lift(self, points: np.ndarray, interpolant: str = "trig") -> np.ndarray:
        x = np.asarray(points, dtype=float)
        return x + evaluate(self.displacement, x, interpolant)


def identity(n: int) -> DiffeoS1:
    return DiffeoS1(PeriodicFunction(np.zeros(n)))


def rotation(n: int, shift: float) -> DiffeoS1:
    return DiffeoS1(PeriodicFunction(np.full(n, float(shift))))


def compose(
    f: PeriodicFunction, phi: DiffeoS1, interpolant: str = "trig"
) -> PeriodicFunction:
    """Grid samples of f(phi(x_j)), the lift reduced mod 1 by the interpolant."""
    return PeriodicFunction(evaluate(f, phi.lift_values(), interpolant))


def compose_diffeo(
    phi: DiffeoS1, psi: DiffeoS1, interpolant: str = "trig"
) -> DiffeoS1:
    """The group product phi o psi."""
    inner = psi.lift_values()
    shifted = evaluate(phi.displacement, inner, interpolant)
    return DiffeoS1(PeriodicFunction(psi.displacement.values + shifted))


def invert_diffeo(
    phi: DiffeoS1,
    slope_floor: float = SLOPE_FLOOR,
    tol: float = INVERSION_TOL,
    interpolant: str = "trig",
) -> DiffeoS1:
    """
    Inverts a circle diffeomorphism node by node.

    For each node y_j the monotone equation phi(x) = y_j is solved by Newton's
    method safeguarded with bisection inside [y_j - r, y_j + r], r the
    displacement amplitude.

    Raises:
        DiffeomorphismError: if the slope is below slope_floor or the iteration
            does not converge.
    """
    if phi.min_slope <= slope_floor:
        raise DiffeomorphismError(
            f"Cannot invert: min slope {phi.min_slope:.3e} <= floor {slope_floor:.1e}",
            min_slope=phi.min_slope,
        )

    p = phi.displacement
    y = grid_points(phi.n)
    radius = 1.1 * float(np.max(np.abs(p.values))) + 1e-12
    lo, hi = _bracket(p, y, radius, interpolant)

    x = np.clip(y - p.values, lo, hi)
    for iteration in range(1, MAX_NEWTON_ITERATIONS + 1):
        value, slope = evaluate_with_slope(p, x, interpolant)
        residual = x + value - y
        slope = 1.0 + slope

        above = residual > 0
        hi = np.where(above, x, hi)
        lo = np.where(above, lo, x)

        newton = x - residual / np.where(slope > 0, slope, np.inf)
        inside = (newton >= lo) & (newton <= hi) & (slope > 0)
        candidate = np.where(inside, newton, 0.5 * (lo + hi))
        step = np.max(np.abs(candidate - x))
        x = candidate
        if step <= tol:
            logger.debug(f"Inversion converged after {iteration} iterations")
            return DiffeoS1(PeriodicFunction(x - y))

    raise DiffeomorphismError(
        f"Inversion did not converge in {MAX_NEWTON_ITERATIONS} iterations "
        f"(last step {step:.3e})",
        min_slope=phi.min_slope,
    )


def _bracket(p: PeriodicFunction, y: np.ndarray, radius: float, interpolant: str):
    """Widens [y - r, y + r] until the lift brackets every target."""
    for _ in range(8):
        lo, hi = y - radius, y + radius
        g_lo = lo + evaluate(p, lo, interpolant) - y
        g_hi = hi + evaluate(p, hi, interpolant) - y
        if np.all(g_lo <= 0) and np.all(g_hi >= 0):
            return lo, hi
        radius *= 2.0
    raise DiffeomorphismError("Could not bracket the inverse; lift is not monotone")
