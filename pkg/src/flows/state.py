import logging
from dataclasses import dataclass

from src.errors import GridError
from src.grid.diffeo import (
    INVERSION_TOL,
    DiffeoS1,
    compose,
    identity,
    invert_diffeo,
)
from src.grid.periodic import PeriodicFunction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlowState:
    """Lagrangian state (phi, xi) of the geodesic system at time t."""

    phi: DiffeoS1
    xi: PeriodicFunction
    t: float = 0.0

    def __post_init__(self):
        if self.phi.n != self.xi.n:
            raise GridError(f"phi has n={self.phi.n} but xi has n={self.xi.n}")

    @property
    def n(self) -> int:
        return self.xi.n

    @classmethod
    def at_identity(cls, u0: PeriodicFunction) -> "FlowState":
        return cls(identity(u0.n), u0, 0.0)


def eulerian_velocity(
    state: FlowState, interpolant: str = "trig", tol: float = INVERSION_TOL
) -> PeriodicFunction:
    """u = xi o phi^-1, with phi inverted to the stopping tolerance tol."""
    phi_inv = invert_diffeo(state.phi, tol=tol, interpolant=interpolant)
    return compose(state.xi, phi_inv, interpolant)


def reverse_state(state: FlowState) -> FlowState:
    """(phi, xi) -> (phi, -xi); the reversed state retraces the flow backwards."""
    return FlowState(state.phi, -state.xi, state.t)
