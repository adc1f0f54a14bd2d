import logging
from typing import Optional

from src.errors import OutOfDomainError
from src.flows.config import SolverConfig
from src.flows.lagrangian import solve_lagrangian
from src.flows.trajectory import Trajectory
from src.grid.diffeo import DiffeoS1
from src.grid.periodic import PeriodicFunction, sup_diff
from src.operators.inertia import InverseLike

logger = logging.getLogger(__name__)


def flow_to(
    u: PeriodicFunction,
    t: float,
    cfg: SolverConfig,
    inverse: Optional[InverseLike] = None,
) -> Trajectory:
    """
    Geodesic from (identity, u) integrated to time t.

    Raises:
        OutOfDomainError: if the run stops before t.
    """
    trajectory = solve_lagrangian(u, cfg.updated(t_end=t), inverse)
    if not trajectory.completed:
        raise OutOfDomainError(
            f"Geodesic stopped at t={trajectory.final_time:.6f} < {t} "
            f"({trajectory.termination.value}: {trajectory.message})"
        )
    return trajectory


def exp_map(
    u0: PeriodicFunction, cfg: SolverConfig, inverse: Optional[InverseLike] = None
) -> DiffeoS1:
    """exp(u0) = phi(1) of the geodesic starting at the identity with velocity u0."""
    return flow_to(u0, 1.0, cfg, inverse).final.phi


def homogeneity_check(u: PeriodicFunction, s: float, cfg: SolverConfig) -> float:
    """
    sup|exp(s u) - phi_u(s)| over the lift, where phi_u is the geodesic of u.
    Both sides agree exactly in the continuum since geodesics are homogeneous.
    """
    scaled = exp_map(s * u, cfg)
    direct = flow_to(u, s, cfg).final.phi
    residual = sup_diff(scaled.displacement, direct.displacement)
    logger.info(f"Homogeneity residual at s={s}: {residual:.3e}")
    return residual
