import logging
from typing import Optional

import numpy as np
from tqdm import tqdm

from src.errors import GridError, SolverFailure
from src.flows.config import SolverConfig
from src.flows.integrator import step_rk4
from src.flows.monitors import BlowupStatus, detect_blowup, gradient_sup
from src.flows.trajectory import MonitorRecord, Termination, Trajectory
from src.grid.periodic import PeriodicFunction, mean
from src.operators.inertia import InverseLike
from src.operators.rhs import mudp_rhs

logger = logging.getLogger(__name__)


def solve_eulerian(
    u0: PeriodicFunction,
    cfg: SolverConfig,
    inverse: Optional[InverseLike] = None,
    progress: bool = False,
) -> Trajectory:
    """
    Method-of-lines RK4 integration of u_t = mudp_rhs(u, cfg.rhs_mode).

    Blow-up and non-finite values end the run early; the trajectory keeps
    everything recorded up to that point and states why it stopped.

    Args:
        u0: Initial velocity on the cfg.n grid.
        cfg: Run configuration.
        inverse: Overrides the A^-1 realization chosen by cfg.
        progress: Show a progress bar.
    """
    if u0.n != cfg.n:
        raise GridError(f"u0 has n={u0.n} but the configuration asks for n={cfg.n}")
    inverse = inverse if inverse is not None else cfg.inverse_operator()
    steps = cfg.n_steps()
    h = cfg.step_size()
    mu0 = mean(u0)

    def rhs(values: np.ndarray) -> np.ndarray:
        try:
            u = PeriodicFunction(values)
            return mudp_rhs(u, cfg.rhs_mode, inverse, cfg.dealias).values
        except GridError as e:
            raise SolverFailure(str(e)) from e

    def monitor(t: float, u: PeriodicFunction) -> MonitorRecord:
        return MonitorRecord(
            t=t, mean_drift=abs(mean(u) - mu0), sup_ux=gradient_sup(u)
        )

    logger.info(
        f"Eulerian run: n={cfg.n}, steps={steps}, h={h:.3e}, mode={cfg.rhs_mode.value}"
    )
    trajectory = Trajectory(kind="eulerian", config=cfg, u0=u0)
    trajectory.record(0.0, u0, monitor(0.0, u0))

    y = u0.values
    for k in tqdm(range(1, steps + 1), desc="Eulerian RK4", disable=not progress):
        t = k * h
        try:
            y = step_rk4(y, rhs, h)
        except SolverFailure as e:
            logger.error(f"Solver failure at t={t:.6f}: {e}")
            trajectory.termination = Termination.SOLVER_FAILURE
            trajectory.message = str(e)
            break

        u = PeriodicFunction(y)
        blown_up = detect_blowup(u, cfg) is BlowupStatus.BLOWUP_DETECTED
        if blown_up or k % cfg.monitor_every == 0 or k == steps:
            trajectory.record(t, u, monitor(t, u))
        if blown_up:
            logger.warning(f"Blow-up detected at t={t:.6f}")
            trajectory.termination = Termination.BLOWUP_DETECTED
            trajectory.message = f"sup|u_x| reached the cap {cfg.u_x_cap} at t={t:.6f}"
            break

    logger.info(
        f"Eulerian run finished: {trajectory.termination.value} "
        f"at t={trajectory.final_time:.6f}"
    )
    return trajectory
