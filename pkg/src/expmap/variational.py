import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.integrate import trapezoid

from src.errors import (
    DiffeomorphismError,
    InsufficientSnapshotDensity,
    MuDPError,
    OutOfDomainError,
    SolverFailure,
)
from src.expmap.exponential import flow_to
from src.flows.config import SolverConfig
from src.flows.integrator import step_rk4
from src.flows.lagrangian import geodesic_field
from src.flows.state import FlowState
from src.grid.diffeo import DiffeoS1, identity
from src.grid.periodic import PeriodicFunction, derivative, mean, sup_diff
from src.operators.inertia import apply_A

logger = logging.getLogger(__name__)

METHODS = ("finite_difference", "sensitivity_ode")


@dataclass
class VariationalTrajectory:
    """psi(s) = d/d eps of the lift of exp(s (u + eps w)), with the base flow."""

    u: PeriodicFunction
    w: PeriodicFunction
    method: str
    dense: bool
    times: List[float] = field(default_factory=list)
    psi: List[PeriodicFunction] = field(default_factory=list)
    base: List[FlowState] = field(default_factory=list)


def _sensitivity_field(cfg: SolverConfig):
    """
    Augmented field for (p, xi, dp, dxi). The directional derivative of
    -P_phi(xi) is taken by a central difference of step cfg.sensitivity_step;
    the one of phi_t = xi is exact.
    """
    geodesic = geodesic_field(cfg)
    h = cfg.sensitivity_step

    def augmented(state):
        p, xi, dp, dxi = state
        _, accel = geodesic((p, xi))
        _, forward = geodesic((p + h * dp, xi + h * dxi))
        _, backward = geodesic((p - h * dp, xi - h * dxi))
        return xi, accel, dxi, (forward - backward) / (2 * h)

    return augmented


def _integrate_sensitivity(
    u: PeriodicFunction, w: PeriodicFunction, cfg: SolverConfig
) -> VariationalTrajectory:
    augmented = _sensitivity_field(cfg)
    steps = cfg.n_steps()
    h = cfg.step_size()
    result = VariationalTrajectory(
        u=u, w=w, method="sensitivity_ode", dense=cfg.monitor_every == 1
    )
    zeros = np.zeros(u.n)
    result.times.append(0.0)
    result.psi.append(PeriodicFunction(zeros))
    result.base.append(FlowState(identity(u.n), u, 0.0))

    y = (zeros, u.values, zeros, w.values)
    for k in range(1, steps + 1):
        t = k * h
        try:
            y = step_rk4(y, augmented, h)
            phi = DiffeoS1(PeriodicFunction(y[0]))
        except (DiffeomorphismError, SolverFailure) as e:
            raise OutOfDomainError(
                f"Base geodesic left the domain at t={t:.6f}: {e}"
            ) from e
        if k % cfg.monitor_every == 0 or k == steps:
            result.times.append(t)
            result.psi.append(PeriodicFunction(y[2]))
            result.base.append(FlowState(phi, PeriodicFunction(y[1]), t))
    return result


def _finite_difference_trajectory(
    u: PeriodicFunction, w: PeriodicFunction, cfg: SolverConfig
) -> VariationalTrajectory:
    eps = cfg.fd_epsilon
    base = flow_to(u, cfg.t_end, cfg)
    plus = flow_to(u + eps * w, cfg.t_end, cfg)
    minus = flow_to(u - eps * w, cfg.t_end, cfg)
    result = VariationalTrajectory(
        u=u, w=w, method="finite_difference", dense=cfg.monitor_every == 1
    )
    for t, state, up, down in zip(
        base.times, base.snapshots, plus.snapshots, minus.snapshots
    ):
        spread = up.phi.displacement - down.phi.displacement
        result.times.append(t)
        result.psi.append(spread / (2 * eps))
        result.base.append(state)
    return result


def variational_trajectory(
    u: PeriodicFunction,
    w: PeriodicFunction,
    cfg: SolverConfig,
    method: str = "sensitivity_ode",
) -> VariationalTrajectory:
    """
    psi at every stored step on [0, cfg.t_end].

    Raises:
        OutOfDomainError: if the base or a perturbed geodesic breaks down.
    """
    logger.debug(f"Variational flow by {method} to t={cfg.t_end}")
    if method == "sensitivity_ode":
        return _integrate_sensitivity(u, w, cfg)
    if method == "finite_difference":
        return _finite_difference_trajectory(u, w, cfg)
    raise MuDPError(f"Unknown variational method '{method}', expected {METHODS}")


def variational_flow(
    u: PeriodicFunction,
    w: PeriodicFunction,
    t: float,
    method: str,
    cfg: SolverConfig,
) -> PeriodicFunction:
    """psi(t) = L(t, u) w, the response of exp(t (u + eps w)) to eps at eps = 0."""
    return variational_trajectory(u, w, cfg.updated(t_end=t), method).psi[-1]


def psi_xx_formula_check(
    u: PeriodicFunction,
    w: PeriodicFunction,
    t: float,
    cfg: SolverConfig,
    method: str = "sensitivity_ode",
) -> float:
    """
    Residual sup|rhs - psi_xx(t)| where, with all time integrals over [0, t],

        rhs = psi_x [mean(u) int phi_x - m0 int phi_x^-2]
              + phi_x [mean(w) int phi_x + mean(u) int psi_x]
              - phi_x [(mean(w) - w_xx) int phi_x^-2 - 2 m0 int psi_x phi_x^-3]

    and m0 = A u. Time integrals use the trapezoidal rule over every step.
    """
    history = variational_trajectory(u, w, cfg.updated(t_end=t), method)
    if not history.dense:
        raise InsufficientSnapshotDensity(
            "psi_xx check needs snapshots at every step (monitor_every=1)"
        )
    times = np.asarray(history.times)
    slopes = np.stack([s.phi.slope().values for s in history.base])
    psi_x = np.stack([derivative(p, 1).values for p in history.psi])

    def integral(samples: np.ndarray) -> np.ndarray:
        if len(times) < 2:
            return np.zeros(samples.shape[1])
        return trapezoid(samples, x=times, axis=0)

    m0 = apply_A(u).values
    mu_u, mu_w = mean(u), mean(w)
    w_xx = derivative(w, 2).values
    int_slope = integral(slopes)
    int_stretch = integral(slopes**-2)
    int_psi_x = integral(psi_x)
    int_mixed = integral(psi_x * slopes**-3)

    slope_t, psi_x_t = slopes[-1], psi_x[-1]
    rhs = (
        psi_x_t * (mu_u * int_slope - m0 * int_stretch)
        + slope_t * (mu_w * int_slope + mu_u * int_psi_x)
        - slope_t * ((mu_w - w_xx) * int_stretch - 2.0 * m0 * int_mixed)
    )
    residual = sup_diff(PeriodicFunction(rhs), derivative(history.psi[-1], 2))
    logger.info(f"psi_xx formula residual at t={t}: {residual:.3e}")
    return residual
