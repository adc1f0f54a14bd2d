import logging
from typing import Callable, Optional, Tuple

import numpy as np
from tqdm import tqdm

from src.errors import (
    DiffeomorphismError,
    GridError,
    LinearSolveError,
    SolverFailure,
)
from src.flows.config import SolverConfig
from src.flows.integrator import step_rk4
from src.flows.monitors import (
    BlowupStatus,
    detect_blowup,
    gradient_sup,
    momentum_density,
    momentum_invariant,
)
from src.flows.state import FlowState
from src.flows.trajectory import MonitorRecord, Termination, Trajectory
from src.grid.diffeo import DiffeoS1
from src.grid.periodic import PeriodicFunction
from src.operators.conjugated import apply_P_conjugated, conjugated_mean
from src.operators.inertia import InverseLike

logger = logging.getLogger(__name__)

GeodesicState = Tuple[np.ndarray, np.ndarray]


def geodesic_field(
    cfg: SolverConfig, inverse: Optional[InverseLike] = None
) -> Callable[[GeodesicState], GeodesicState]:
    """
    Right-hand side of phi_t = xi, xi_t = -P_phi(xi) on (displacement, xi)
    sample arrays. A stage that leaves the diffeomorphism group raises
    DiffeomorphismError; other numerical breakdowns raise SolverFailure.
    """
    inverse = inverse if inverse is not None else cfg.inverse_operator()

    def field(state: GeodesicState) -> GeodesicState:
        p, xi = state
        try:
            phi = DiffeoS1(PeriodicFunction(p))
            accel = apply_P_conjugated(
                PeriodicFunction(xi),
                phi,
                strategy=cfg.strategy,
                inverse=inverse,
                dealias=cfg.dealias,
                interpolant=cfg.interpolant,
                tol=cfg.inversion_tol,
            )
        except (GridError, LinearSolveError) as e:
            raise SolverFailure(str(e)) from e
        return xi, -accel.values

    return field


def integrate_geodesic(
    start: FlowState,
    cfg: SolverConfig,
    inverse: Optional[InverseLike] = None,
    progress: bool = False,
) -> Trajectory:
    """
    Integrates the geodesic system from an arbitrary state for cfg.t_end.

    Snapshot times are start.t + k h. Monitors track the drift of the mean
    of u and of the momentum density relative to the starting state.
    """
    if start.n != cfg.n:
        raise GridError(f"State has n={start.n} but the configuration has n={cfg.n}")
    field = geodesic_field(cfg, inverse)
    steps = cfg.n_steps()
    h = cfg.step_size()

    m0 = momentum_density(
        start, cfg.momentum_path, cfg.interpolant, cfg.inversion_tol
    )
    mu0 = conjugated_mean(start.xi, start.phi)

    def monitor(state: FlowState) -> MonitorRecord:
        try:
            drift = momentum_invariant(
                state, m0, cfg.momentum_path, cfg.interpolant, cfg.inversion_tol
            )
        except DiffeomorphismError:
            drift = float("nan")
        return MonitorRecord(
            t=state.t,
            mean_drift=abs(conjugated_mean(state.xi, state.phi) - mu0),
            momentum_drift=drift,
            min_slope=state.phi.min_slope,
            sup_ux=gradient_sup(state),
        )

    logger.info(
        f"Lagrangian run: n={cfg.n}, steps={steps}, h={h:.3e}, strategy={cfg.strategy}"
    )
    at_identity = not np.any(start.phi.displacement.values)
    u0 = start.xi if at_identity else None
    trajectory = Trajectory(kind="lagrangian", config=cfg, u0=u0, m0=m0)
    trajectory.record(start.t, start, monitor(start))

    y = (start.phi.displacement.values, start.xi.values)
    for k in tqdm(range(1, steps + 1), desc="Geodesic RK4", disable=not progress):
        t = start.t + k * h
        try:
            y = step_rk4(y, field, h)
            phi = DiffeoS1(PeriodicFunction(y[0]))
            state = FlowState(phi, PeriodicFunction(y[1]), t)
        except DiffeomorphismError as e:
            logger.warning(f"Diffeomorphism lost at t={t:.6f}: {e}")
            trajectory.termination = Termination.BLOWUP_DETECTED
            trajectory.message = str(e)
            break
        except (SolverFailure, GridError) as e:
            logger.error(f"Solver failure at t={t:.6f}: {e}")
            trajectory.termination = Termination.SOLVER_FAILURE
            trajectory.message = str(e)
            break

        blown_up = detect_blowup(state, cfg) is BlowupStatus.BLOWUP_DETECTED
        if blown_up or k % cfg.monitor_every == 0 or k == steps:
            trajectory.record(t, state, monitor(state))
        if blown_up:
            logger.warning(
                f"Blow-up detected at t={t:.6f} (min slope {state.phi.min_slope:.3e})"
            )
            trajectory.termination = Termination.BLOWUP_DETECTED
            trajectory.message = (
                f"min slope {state.phi.min_slope:.3e} or sup|u_x| past the caps "
                f"at t={t:.6f}"
            )
            break

    logger.info(
        f"Lagrangian run finished: {trajectory.termination.value} "
        f"at t={trajectory.final_time:.6f}"
    )
    return trajectory


def solve_lagrangian(
    u0: PeriodicFunction,
    cfg: SolverConfig,
    inverse: Optional[InverseLike] = None,
    progress: bool = False,
) -> Trajectory:
    """Geodesic from (identity, u0); see integrate_geodesic."""
    return integrate_geodesic(FlowState.at_identity(u0), cfg, inverse, progress)
