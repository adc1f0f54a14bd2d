import logging
from enum import Enum
from typing import Union

import numpy as np
from scipy.integrate import trapezoid

from src.errors import MuDPError
from src.flows.config import SolverConfig
from src.flows.state import FlowState, eulerian_velocity
from src.flows.trajectory import Trajectory
from src.grid.diffeo import INVERSION_TOL, compose
from src.grid.periodic import PeriodicFunction, derivative, sup_diff, sup_norm
from src.operators.conjugated import conjugated_mean, lagrangian_derivatives
from src.operators.inertia import apply_A

logger = logging.getLogger(__name__)

MOMENTUM_PATHS = ("inversion_free", "compose")


class BlowupStatus(str, Enum):
    OK = "ok"
    BLOWUP_DETECTED = "blowup_detected"


def momentum_density(
    state: FlowState,
    path: str = "inversion_free",
    interpolant: str = "trig",
    tol: float = INVERSION_TOL,
) -> PeriodicFunction:
    """(Au o phi) phi_x^3, which the flow keeps equal to m0 = A u0."""
    if path == "inversion_free":
        _, a2 = lagrangian_derivatives(state.xi, state.phi, 2)
        transported = conjugated_mean(state.xi, state.phi) - a2
    elif path == "compose":
        u = eulerian_velocity(state, interpolant, tol)
        transported = compose(apply_A(u), state.phi, interpolant)
    else:
        raise MuDPError(f"Unknown momentum path '{path}', expected {MOMENTUM_PATHS}")
    slope = state.phi.slope()
    return transported * slope * slope * slope


def momentum_invariant(
    state: FlowState,
    m0: PeriodicFunction,
    path: str = "inversion_free",
    interpolant: str = "trig",
    tol: float = INVERSION_TOL,
) -> float:
    """Relative drift sup|(Au o phi) phi_x^3 - m0| / (1 + sup|m0|)."""
    density = momentum_density(state, path, interpolant, tol)
    return sup_diff(density, m0) / (1.0 + sup_norm(m0))


def gradient_sup(state: Union[PeriodicFunction, FlowState]) -> float:
    """sup|u_x|; for a Lagrangian state this is sup|xi_x / phi_x|, no inversion."""
    if isinstance(state, FlowState):
        return sup_norm(derivative(state.xi, 1) / state.phi.slope())
    return sup_norm(derivative(state, 1))


def detect_blowup(
    state: Union[PeriodicFunction, FlowState], cfg: SolverConfig
) -> BlowupStatus:
    """
    Flags a state that is about to leave the resolvable regime: slope
    collapse of phi or gradient growth of u past the configured caps.
    """
    if isinstance(state, FlowState) and state.phi.min_slope <= cfg.slope_floor:
        logger.debug(f"min slope {state.phi.min_slope:.3e} <= {cfg.slope_floor:.1e}")
        return BlowupStatus.BLOWUP_DETECTED
    sup_ux = gradient_sup(state)
    if not np.isfinite(sup_ux) or sup_ux >= cfg.u_x_cap:
        logger.debug(f"sup|u_x| = {sup_ux:.3e} >= {cfg.u_x_cap:.1e}")
        return BlowupStatus.BLOWUP_DETECTED
    return BlowupStatus.OK


def _history(trajectory: Trajectory, t: float):
    if trajectory.kind != "lagrangian":
        raise MuDPError("Reconstruction needs a Lagrangian trajectory")
    trajectory.require_dense()
    k = trajectory.index_at(t)
    return np.asarray(trajectory.times[: k + 1]), trajectory.snapshots[: k + 1]


def _initial_momentum(trajectory: Trajectory) -> np.ndarray:
    if trajectory.m0 is not None:
        return trajectory.m0.values
    return apply_A(trajectory.u0).values


def _integral(times: np.ndarray, samples: list) -> np.ndarray:
    """Trapezoidal time integral of grid-valued samples from times[0] to times[-1]."""
    if len(samples) < 2:
        return np.zeros_like(samples[0])
    return trapezoid(np.stack(samples), x=times, axis=0)


def reconstruct_phixx(trajectory: Trajectory, t: float) -> PeriodicFunction:
    """
    phi_xx(t) = phi_x(t) (int_0^t mean(u) phi_x ds - m0 int_0^t phi_x^-2 ds),
    the time integrals taken by the trapezoidal rule over the stored steps.

    Raises:
        InsufficientSnapshotDensity: if the run did not store every step.
    """
    times, states = _history(trajectory, t)
    m0 = _initial_momentum(trajectory)
    slopes = [s.phi.slope().values for s in states]
    mean_u = [conjugated_mean(s.xi, s.phi) for s in states]
    # phi_xx / phi_x at the first snapshot, zero when the run starts at the identity
    start = states[0].phi.curvature().values / slopes[0]

    drift = _integral(times, [mu * slope for mu, slope in zip(mean_u, slopes)])
    stretch = _integral(times, [slope**-2 for slope in slopes])
    return PeriodicFunction(slopes[-1] * (start + drift - m0 * stretch))


def reconstruct_xixx(trajectory: Trajectory, t: float) -> PeriodicFunction:
    """
    xi_xx(t) = xi_x phi_xx / phi_x + phi_x (mean(u) phi_x - m0 phi_x^-2), with
    phi_xx taken from reconstruct_phixx.
    """
    phixx = reconstruct_phixx(trajectory, t).values
    state = trajectory.snapshots[trajectory.index_at(t)]
    m0 = _initial_momentum(trajectory)
    slope = state.phi.slope().values
    xi_x = derivative(state.xi, 1).values
    mean_u = conjugated_mean(state.xi, state.phi)
    return PeriodicFunction(
        xi_x * phixx / slope + slope * (mean_u * slope - m0 / slope**2)
    )


def phixx_residual(trajectory: Trajectory, t: float) -> float:
    """sup-diff of the reconstruction against the spectral phi_xx of the stored lift."""
    state = trajectory.snapshots[trajectory.index_at(t)]
    return sup_diff(reconstruct_phixx(trajectory, t), state.phi.curvature())


def xixx_residual(trajectory: Trajectory, t: float) -> float:
    state = trajectory.snapshots[trajectory.index_at(t)]
    return sup_diff(reconstruct_xixx(trajectory, t), derivative(state.xi, 2))
