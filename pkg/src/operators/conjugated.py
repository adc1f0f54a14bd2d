import logging
from typing import List

import numpy as np
import scipy.linalg
from scipy.linalg.lapack import dgecon

from src.errors import DiffeomorphismError, LinearSolveError, MuDPError
from src.grid.diffeo import (
    INVERSION_TOL,
    SLOPE_FLOOR,
    DiffeoS1,
    compose,
    invert_diffeo,
)
from src.grid.periodic import (
    PeriodicFunction,
    derivative,
    mean,
    product,
    spectral_multiplier,
)
from src.operators.inertia import InverseLike
from src.operators.rhs import apply_P

logger = logging.getLogger(__name__)

STRATEGIES = ("compose", "recursion")
CONDITION_WARNING = 1e12


def conjugated_mean(xi: PeriodicFunction, phi: DiffeoS1) -> float:
    """mean(xi o phi^-1) computed as the grid mean of xi * phi_x, no inversion."""
    return mean(xi * phi.slope())


def lagrangian_derivatives(
    xi: PeriodicFunction,
    phi: DiffeoS1,
    r: int,
    slope_floor: float = SLOPE_FLOOR,
) -> List[PeriodicFunction]:
    """
    Returns [a_1, ..., a_r] with a_k = ((xi o phi^-1)^(k)) o phi, from the
    recursion a_1 = xi_x / phi_x, a_{k+1} = (a_k)_x / phi_x.
    """
    if r not in (1, 2, 3):
        raise MuDPError(f"Recursion depth must be 1, 2 or 3, got {r}")
    if phi.min_slope <= slope_floor:
        raise DiffeomorphismError(
            f"min slope {phi.min_slope:.3e} <= floor {slope_floor:.1e}",
            min_slope=phi.min_slope,
        )
    slope = phi.slope()
    terms = []
    a = xi
    for _ in range(r):
        a = derivative(a, 1) / slope
        terms.append(a)
    return terms


def apply_P_conjugated(
    xi: PeriodicFunction,
    phi: DiffeoS1,
    strategy: str = "compose",
    inverse: InverseLike = "spectral",
    dealias: bool = False,
    interpolant: str = "trig",
    slope_floor: float = SLOPE_FLOOR,
    tol: float = INVERSION_TOL,
) -> PeriodicFunction:
    """
    P_phi(xi) = (P(xi o phi^-1)) o phi.

    Args:
        strategy: "compose" inverts phi and conjugates explicitly; "recursion"
            builds Q_phi from the Lagrangian derivatives and solves
            A_phi(eta) = Q_phi(xi) as a dense linear system.
        tol: Stopping tolerance of the phi inversion (compose only).

    Raises:
        DiffeomorphismError: if phi cannot be inverted or is too degenerate.
        LinearSolveError: if the dense conjugated solve fails.
    """
    if strategy == "compose":
        phi_inv = invert_diffeo(
            phi, slope_floor=slope_floor, tol=tol, interpolant=interpolant
        )
        w = compose(xi, phi_inv, interpolant)
        return compose(apply_P(w, inverse, dealias), phi, interpolant)
    if strategy == "recursion":
        return _conjugated_recursion(xi, phi, dealias, slope_floor)
    raise MuDPError(f"Unknown conjugation strategy '{strategy}', expected {STRATEGIES}")


def _conjugated_recursion(
    xi: PeriodicFunction, phi: DiffeoS1, dealias: bool, slope_floor: float
) -> PeriodicFunction:
    a1, a2 = lagrangian_derivatives(xi, phi, 2, slope_floor)
    m = conjugated_mean(xi, phi)
    rhs = 3.0 * (product(a1, a2, dealias) + product(m - a2, a1, dealias))

    matrix = conjugated_inertia_matrix(phi)
    try:
        factors = scipy.linalg.lu_factor(matrix)
    except (np.linalg.LinAlgError, ValueError) as e:
        logger.error(f"Conjugated factorization failed: {e}")
        raise LinearSolveError(f"Dense A_phi factorization failed: {e}") from e

    condition = _condition(matrix, factors)
    if not np.isfinite(condition):
        logger.error("A_phi is singular")
        raise LinearSolveError("Dense A_phi is singular", condition=condition)
    if condition > CONDITION_WARNING:
        logger.warning(f"A_phi is ill-conditioned: {condition:.3e}")

    eta = scipy.linalg.lu_solve(factors, rhs.values)
    if not np.all(np.isfinite(eta)):
        logger.error(
            f"Conjugated solve produced non-finite values (condition {condition:.3e})"
        )
        raise LinearSolveError(
            "Dense A_phi solve produced non-finite values", condition=condition
        )
    return PeriodicFunction(eta)


def _condition(matrix: np.ndarray, factors) -> float:
    """1-norm condition estimate from the LU factors (LAPACK gecon)."""
    lu, _ = factors
    anorm = float(np.linalg.norm(matrix, 1))
    rcond, _ = dgecon(lu, anorm, norm="1")
    return 1.0 / rcond if rcond > 0 else float("inf")


def conjugated_inertia_matrix(phi: DiffeoS1) -> np.ndarray:
    """
    Dense matrix of A_phi(eta) = conjugated_mean(eta, phi) - a_2(eta), where
    a_2(eta) = eta_xx / phi_x^2 - eta_x phi_xx / phi_x^3. The mean term is the
    rank-one part (1/n) 1 phi_x^T.
    """
    n = phi.n
    slope = phi.slope().values
    curvature = phi.curvature().values
    D1 = _spectral_matrix(n, 1)
    D2 = _spectral_matrix(n, 2)
    second = D2 / slope[:, None] ** 2 - D1 * (curvature / slope**3)[:, None]
    return np.outer(np.ones(n), slope) / n - second


def _spectral_matrix(n: int, order: int) -> np.ndarray:
    coeffs = np.fft.rfft(np.eye(n), axis=0) * spectral_multiplier(n, order)[:, None]
    return np.fft.irfft(coeffs, n, axis=0)


def condition_estimate(phi: DiffeoS1) -> float:
    """1-norm condition estimate of the dense A_phi, logged when large."""
    matrix = conjugated_inertia_matrix(phi)
    condition = _condition(matrix, scipy.linalg.lu_factor(matrix))
    if condition > CONDITION_WARNING:
        logger.warning(f"A_phi is ill-conditioned: {condition:.3e}")
    return condition
