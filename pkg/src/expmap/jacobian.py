import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed
from tqdm import tqdm

from src.errors import MuDPError
from src.expmap.variational import variational_flow
from src.flows.config import SolverConfig
from src.grid.periodic import PeriodicFunction, from_fourier

logger = logging.getLogger(__name__)


@dataclass
class ExpJacobian:
    """
    D exp(u) restricted to span{1, cos 2 pi j x, sin 2 pi j x : j <= modes}.
    Column k holds the basis coefficients of the displacement response to the
    k-th basis perturbation, in the order 1, cos1, sin1, cos2, sin2, ...
    """

    modes: int
    matrix: np.ndarray
    base_u: PeriodicFunction
    method: str = "sensitivity_ode"
    singular_values: np.ndarray = field(init=False)

    def __post_init__(self):
        size = 2 * self.modes + 1
        if self.matrix.shape != (size, size):
            raise MuDPError(f"Expected a {size}x{size} matrix, got {self.matrix.shape}")
        if not np.all(np.isfinite(self.matrix)):
            raise MuDPError("Jacobian has non-finite entries")
        self.singular_values = scipy.linalg.svdvals(self.matrix)

    @property
    def smallest_singular_value(self) -> float:
        return float(self.singular_values[-1])

    def labels(self) -> List[str]:
        return basis_labels(self.modes)


def basis_labels(modes: int) -> List[str]:
    labels = ["1"]
    for j in range(1, modes + 1):
        labels += [f"cos{j}", f"sin{j}"]
    return labels


def basis_function(n: int, k: int) -> PeriodicFunction:
    """k-th element of 1, cos 2 pi x, sin 2 pi x, cos 4 pi x, ..."""
    if k == 0:
        return from_fourier(n, [(0, 1.0, 0.0)])
    j = (k + 1) // 2
    if k % 2:
        return from_fourier(n, [(j, 1.0, 0.0)])
    return from_fourier(n, [(j, 0.0, 1.0)])


def basis_coefficients(f: PeriodicFunction, modes: int) -> np.ndarray:
    """Coefficients (a0, a1, b1, ..., aM, bM) of f in the truncated real basis."""
    c = np.fft.rfft(f.values) / f.n
    coeffs = [c[0].real]
    for j in range(1, modes + 1):
        coeffs += [2.0 * c[j].real, -2.0 * c[j].imag]
    return np.asarray(coeffs)


def _column(u: PeriodicFunction, k: int, modes: int, method: str, cfg: SolverConfig):
    psi = variational_flow(u, basis_function(u.n, k), 1.0, method, cfg)
    return basis_coefficients(psi, modes)


def jacobian_expmap(
    u: PeriodicFunction,
    modes: int,
    cfg: SolverConfig,
    method: str = "sensitivity_ode",
    n_jobs: int = 1,
    progress: bool = False,
) -> ExpJacobian:
    """
    Truncated-basis Jacobian of the exponential map at u.

    Every column is an independent variational integration to t = 1, so the
    columns fan out over joblib workers; results come back in basis order.

    Raises:
        OutOfDomainError: if the geodesic of u breaks down before t = 1.
    """
    if modes < 1 or modes > u.n // 4:
        raise MuDPError(f"modes must be in [1, n/4 = {u.n // 4}], got {modes}")
    size = 2 * modes + 1
    logger.info(f"Computing {size} Jacobian columns ({method}, n_jobs={n_jobs})")
    columns = Parallel(n_jobs=n_jobs)(
        delayed(_column)(u, k, modes, method, cfg)
        for k in tqdm(range(size), desc="Jacobian columns", disable=not progress)
    )
    jacobian = ExpJacobian(
        modes=modes, matrix=np.column_stack(columns), base_u=u, method=method
    )
    logger.info(f"Smallest singular value: {jacobian.smallest_singular_value:.6f}")
    return jacobian
