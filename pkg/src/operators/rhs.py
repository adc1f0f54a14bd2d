import logging
from enum import Enum
from typing import Union

from src.grid.periodic import PeriodicFunction, derivative, mean, product
from src.operators.inertia import InverseLike, apply_A, invert_A

logger = logging.getLogger(__name__)


class RhsMode(str, Enum):
    """The three equivalent ways of writing u_t for the muDP equation."""

    MOMENTUM_FORM = "momentum_form"
    TRANSPORT_PLUS_P = "transport_plus_P"
    QUASILINEAR = "quasilinear"

    @classmethod
    def parse(cls, value: Union[str, "RhsMode"]) -> "RhsMode":
        """Accepts the tag itself or the short command-line alias."""
        if isinstance(value, RhsMode):
            return value
        aliases = {
            "momentum": cls.MOMENTUM_FORM,
            "transport": cls.TRANSPORT_PLUS_P,
            "quasilinear": cls.QUASILINEAR,
        }
        if value in aliases:
            return aliases[value]
        return cls(value)


def apply_Q(f: PeriodicFunction, dealias: bool = False) -> PeriodicFunction:
    """Q(f) = 3 (f_x f_xx + (Af) f_x)."""
    f_x = derivative(f, 1)
    f_xx = derivative(f, 2)
    return 3.0 * (product(f_x, f_xx, dealias) + product(apply_A(f), f_x, dealias))


def apply_P(
    f: PeriodicFunction, inverse: InverseLike = "spectral", dealias: bool = False
) -> PeriodicFunction:
    """P(f) = A^-1 Q(f)."""
    return invert_A(apply_Q(f, dealias), inverse)


def _momentum_flux(
    v: PeriodicFunction, w: PeriodicFunction, dealias: bool
) -> PeriodicFunction:
    """v (Aw)_x + 3 (Aw) v_x, half of the symmetric expression inside B."""
    Aw = apply_A(w)
    return product(v, derivative(Aw, 1), dealias) + 3.0 * product(
        Aw, derivative(v, 1), dealias
    )


def apply_B(
    v: PeriodicFunction,
    w: PeriodicFunction,
    inverse: InverseLike = "spectral",
    dealias: bool = False,
) -> PeriodicFunction:
    """
    B(v, w) = 1/2 A^-1 (v (Aw)_x + w (Av)_x + 3 (Av) w_x + 3 (Aw) v_x).

    The two halves are summed in an order-independent way, so B(v, w) and
    B(w, v) agree bit for bit.
    """
    flux = _momentum_flux(v, w, dealias) + _momentum_flux(w, v, dealias)
    return 0.5 * invert_A(flux, inverse)


def mudp_rhs(
    u: PeriodicFunction,
    mode: Union[RhsMode, str] = RhsMode.MOMENTUM_FORM,
    inverse: InverseLike = "spectral",
    dealias: bool = False,
) -> PeriodicFunction:
    """
    Time derivative u_t of the muDP equation.

    Args:
        u: Current velocity field.
        mode: momentum_form  -A^-1(u (Au)_x + 3 (Au) u_x)
              transport_plus_P  -(u u_x + P(u))
              quasilinear  -(u u_x + 3 mean(u) d/dx A^-1 u)
        inverse: Realization of A^-1.
        dealias: Apply the 2/3 rule to quadratic products.
    """
    mode = RhsMode.parse(mode)
    if mode is RhsMode.MOMENTUM_FORM:
        return -invert_A(_momentum_flux(u, u, dealias), inverse)

    transport = product(u, derivative(u, 1), dealias)
    if mode is RhsMode.TRANSPORT_PLUS_P:
        return -(transport + apply_P(u, inverse, dealias))
    return -(transport + 3.0 * mean(u) * derivative(invert_A(u, inverse), 1))
