import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from src.errors import GridError

logger = logging.getLogger(__name__)

MIN_GRID_SIZE = 8
SCHEMES = ("spectral", "finite_difference")
INTERPOLANTS = ("trig", "spline")

Scalar = Union[int, float]


@dataclass(frozen=True, eq=False)
class PeriodicFunction:
    """
    Real function on the circle R/Z sampled on the uniform grid x_j = j/n.
    Samples are copied on construction and stored read-only.
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise GridError(f"Expected 1-D samples, got shape {values.shape}")
        n = values.size
        if n < MIN_GRID_SIZE or n % 2:
            raise GridError(f"Grid size must be even and >= {MIN_GRID_SIZE}, got {n}")
        if not np.all(np.isfinite(values)):
            raise GridError("Samples contain non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.size

    def _other(self, other) -> np.ndarray:
        if isinstance(other, PeriodicFunction):
            if other.n != self.n:
                raise GridError(f"Grid mismatch: {self.n} vs {other.n}")
            return other.values
        return other

    def __add__(self, other) -> "PeriodicFunction":
        return PeriodicFunction(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other) -> "PeriodicFunction":
        return PeriodicFunction(self.values - self._other(other))

    def __rsub__(self, other) -> "PeriodicFunction":
        return PeriodicFunction(self._other(other) - self.values)

    def __mul__(self, other) -> "PeriodicFunction":
        return PeriodicFunction(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "PeriodicFunction":
        return PeriodicFunction(self.values / self._other(other))

    def __neg__(self) -> "PeriodicFunction":
        return PeriodicFunction(-self.values)


def grid_points(n: int) -> np.ndarray:
    return np.arange(n) / n


def sample(func: Callable[[np.ndarray], np.ndarray], n: int) -> PeriodicFunction:
    """Samples a vectorized callable on the n-point grid."""
    x = grid_points(n)
    return PeriodicFunction(np.broadcast_to(func(x), x.shape))


def constant(n: int, value: float) -> PeriodicFunction:
    return PeriodicFunction(np.full(n, float(value)))


def from_fourier(n: int, terms: Iterable[Tuple[int, float, float]]) -> PeriodicFunction:
    """
    Builds sum of a_k cos(2 pi k x) + b_k sin(2 pi k x) from (k, a_k, b_k) triples.
    For k = 0 the cosine coefficient is the constant term.
    """
    x = grid_points(n)
    values = np.zeros(n)
    for k, a, b in terms:
        if k < 0:
            raise GridError(f"Negative wavenumber {k}")
        values += a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)
    return PeriodicFunction(values)


def wavenumbers(n: int) -> np.ndarray:
    """Non-negative wavenumbers 0..n/2 matching numpy's rfft layout."""
    return np.arange(n // 2 + 1)


def mean(f: PeriodicFunction) -> float:
    return float(np.mean(f.values))


def sup_norm(f: Union[PeriodicFunction, np.ndarray]) -> float:
    values = f.values if isinstance(f, PeriodicFunction) else np.asarray(f)
    return float(np.max(np.abs(values)))


def sup_diff(f: PeriodicFunction, g: PeriodicFunction) -> float:
    return sup_norm(f.values - g.values)


def spectral_multiplier(n: int, order: int) -> np.ndarray:
    """(2 pi i k)^order on the rfft layout, Nyquist zeroed for odd orders."""
    mult = (2j * np.pi * wavenumbers(n)) ** order
    if order % 2:
        mult[-1] = 0.0
    return mult


def derivative(
    f: PeriodicFunction, order: int = 1, scheme: str = "spectral"
) -> PeriodicFunction:
    """
    Periodic derivative of order 1, 2 or 3.

    Args:
        f: Sampled function.
        order: Derivative order.
        scheme: "spectral" (exact for band-limited data) or "finite_difference"
            (centered second-order stencils).
    """
    if order not in (1, 2, 3):
        raise GridError(f"Derivative order must be 1, 2 or 3, got {order}")
    if scheme == "spectral":
        coeffs = np.fft.rfft(f.values) * spectral_multiplier(f.n, order)
        return PeriodicFunction(np.fft.irfft(coeffs, f.n))
    if scheme == "finite_difference":
        return PeriodicFunction(_finite_difference(f.values, order))
    raise GridError(f"Unknown derivative scheme '{scheme}', expected one of {SCHEMES}")


def _finite_difference(v: np.ndarray, order: int) -> np.ndarray:
    h = 1.0 / v.size
    if order == 1:
        return (np.roll(v, -1) - np.roll(v, 1)) / (2 * h)
    if order == 2:
        return (np.roll(v, -1) - 2 * v + np.roll(v, 1)) / h**2
    return (
        np.roll(v, -2) - 2 * np.roll(v, -1) + 2 * np.roll(v, 1) - np.roll(v, 2)
    ) / (2 * h**3)


def evaluate(
    f: PeriodicFunction,
    points: Union[Iterable[float], np.ndarray],
    interpolant: str = "trig",
    order: int = 0,
) -> np.ndarray:
    """
    Evaluates the interpolant of f (or its derivative of the given order) at
    arbitrary real points, wrapped mod 1.
    """
    x = np.mod(np.asarray(points, dtype=float), 1.0)
    logger.debug(f"Evaluating {interpolant} interpolant (n={f.n}) at {x.size} points")
    if interpolant == "trig":
        return _trig_evaluate(f.values, x, order)
    if interpolant == "spline":
        return _spline(f.values)(x, order)
    raise GridError(
        f"Unknown interpolant '{interpolant}', expected one of {INTERPOLANTS}"
    )


def evaluate_with_slope(
    f: PeriodicFunction, points: np.ndarray, interpolant: str = "trig"
) -> Tuple[np.ndarray, np.ndarray]:
    """Interpolant value and first derivative at the same points."""
    x = np.mod(np.asarray(points, dtype=float), 1.0)
    if interpolant == "trig":
        phases = _phases(f.n, x)
        return (
            _trig_sum(f.values, phases, 0).reshape(x.shape),
            _trig_sum(f.values, phases, 1).reshape(x.shape),
        )
    if interpolant == "spline":
        spline = _spline(f.values)
        return spline(x), spline(x, 1)
    raise GridError(
        f"Unknown interpolant '{interpolant}', expected one of {INTERPOLANTS}"
    )


def _phases(n: int, x: np.ndarray) -> np.ndarray:
    return np.exp(2j * np.pi * np.multiply.outer(x.ravel(), wavenumbers(n)))


def _trig_sum(values: np.ndarray, phases: np.ndarray, order: int) -> np.ndarray:
    n = values.size
    k = wavenumbers(n)
    coeffs = np.fft.rfft(values) / n
    # rfft halves the spectrum; the zero and Nyquist modes are not doubled
    weights = np.full(k.size, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    coeffs = weights * coeffs * (2j * np.pi * k) ** order
    return np.real(phases @ coeffs)


def _trig_evaluate(values: np.ndarray, x: np.ndarray, order: int) -> np.ndarray:
    return _trig_sum(values, _phases(values.size, x), order).reshape(x.shape)


def _spline(values: np.ndarray) -> CubicSpline:
    n = values.size
    nodes = np.append(grid_points(n), 1.0)
    return CubicSpline(nodes, np.append(values, values[0]), bc_type="periodic")


def truncate(f: PeriodicFunction, kmax: float) -> PeriodicFunction:
    """Zeroes every Fourier mode with |k| > kmax."""
    coeffs = np.fft.rfft(f.values)
    coeffs[wavenumbers(f.n) > kmax] = 0.0
    return PeriodicFunction(np.fft.irfft(coeffs, f.n))


def product(
    f: PeriodicFunction, g: PeriodicFunction, dealias: bool = False
) -> PeriodicFunction:
    """
    Pointwise product. With dealias, both factors and the result are truncated
    to |k| <= n/3 (2/3 rule).
    """
    if not dealias:
        return f * g
    kmax = f.n / 3
    return truncate(truncate(f, kmax) * truncate(g, kmax), kmax)
