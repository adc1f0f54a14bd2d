import logging
from typing import Callable, Union

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.special import roots_legendre

from src.errors import MuDPError
from src.grid.periodic import (
    PeriodicFunction,
    derivative,
    evaluate,
    grid_points,
    mean,
    wavenumbers,
)

logger = logging.getLogger(__name__)

InverseLike = Union[str, Callable[[PeriodicFunction], PeriodicFunction]]

QUADRATURE_RULES = ("gauss_legendre", "simpson")
DEFAULT_REFINEMENT = 4
GAUSS_POINTS = 6


def apply_A(u: PeriodicFunction, scheme: str = "spectral") -> PeriodicFunction:
    """A u = mean(u) - u_xx."""
    return mean(u) - derivative(u, 2, scheme)


def invert_A_spectral(f: PeriodicFunction) -> PeriodicFunction:
    """Mode 0 is kept (A fixes means); mode k != 0 is divided by (2 pi k)^2."""
    coeffs = np.fft.rfft(f.values)
    k = wavenumbers(f.n)
    coeffs[1:] /= (2 * np.pi * k[1:]) ** 2
    return PeriodicFunction(np.fft.irfft(coeffs, f.n))


def invert_A_closed(
    f: PeriodicFunction,
    refinement: int = DEFAULT_REFINEMENT,
    rule: str = "gauss_legendre",
) -> PeriodicFunction:
    """
    Explicit inverse of A = mean - d^2/dx^2:

        (A^-1 f)(x) = (x^2/2 - x/2 + 13/12) I + (x - 1/2) J(1) - J(x) + K

    with I = int_0^1 f, J(x) = int_0^x int_0^a f and K the triple iterated
    integral over [0, 1]. The iterated integrals are reduced to single weighted
    integrals, J(x) = int_0^x (x - s) f(s) ds and K = int_0^1 (1 - s)^2 / 2 f(s) ds,
    and computed by a composite rule applied to the trigonometric interpolant
    on a grid refined `refinement` times.
    """
    if refinement < 1:
        raise MuDPError(f"Quadrature refinement must be >= 1, got {refinement}")
    logger.debug(f"Closed-form A^-1: rule={rule}, refinement={refinement}")

    if rule == "gauss_legendre":
        F0, F1, K = _cumulative_gauss(f, refinement)
    elif rule == "simpson":
        F0, F1, K = _cumulative_simpson(f, refinement)
    else:
        raise MuDPError(
            f"Unknown quadrature rule '{rule}', expected {QUADRATURE_RULES}"
        )

    x = grid_points(f.n)
    total = F0[-1]
    J = x * F0[:-1] - F1[:-1]
    J1 = F0[-1] - F1[-1]
    values = (0.5 * x**2 - 0.5 * x + 13.0 / 12.0) * total + (x - 0.5) * J1 - J + K
    return PeriodicFunction(values)


def _cumulative_gauss(f: PeriodicFunction, refinement: int):
    """Cumulative int f and int s f at grid nodes (plus x = 1), and K."""
    cells = refinement * f.n
    h = 1.0 / cells
    nodes, weights = roots_legendre(GAUSS_POINTS)
    left = np.arange(cells) * h
    s = left[:, None] + 0.5 * h * (nodes[None, :] + 1.0)
    w = 0.5 * h * weights[None, :]
    values = evaluate(f, s)

    cell_f = np.sum(w * values, axis=1)
    cell_sf = np.sum(w * s * values, axis=1)
    K = float(np.sum(w * 0.5 * (1.0 - s) ** 2 * values))

    F0 = np.concatenate(([0.0], np.cumsum(cell_f)))[::refinement]
    F1 = np.concatenate(([0.0], np.cumsum(cell_sf)))[::refinement]
    return F0, F1, K


def _cumulative_simpson(f: PeriodicFunction, refinement: int):
    cells = refinement * f.n
    s = np.linspace(0.0, 1.0, cells + 1)
    values = evaluate(f, s)

    F0 = cumulative_simpson(values, x=s, initial=0.0)[::refinement]
    F1 = cumulative_simpson(s * values, x=s, initial=0.0)[::refinement]
    K = float(cumulative_simpson(0.5 * (1.0 - s) ** 2 * values, x=s)[-1])
    return F0, F1, K


def invert_A(
    f: PeriodicFunction, inverse: InverseLike = "spectral"
) -> PeriodicFunction:
    """Dispatches to a named realization of A^-1 or to a supplied callable."""
    if callable(inverse):
        return inverse(f)
    if inverse == "spectral":
        return invert_A_spectral(f)
    if inverse == "closed":
        return invert_A_closed(f)
    raise MuDPError(f"Unknown A^-1 realization '{inverse}'")
