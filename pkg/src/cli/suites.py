import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np
from tabulate import tabulate

from src.errors import MuDPError
from src.expmap.exponential import exp_map, homogeneity_check
from src.expmap.jacobian import jacobian_expmap
from src.expmap.variational import psi_xx_formula_check
from src.flows.config import SolverConfig
from src.flows.eulerian import solve_eulerian
from src.flows.lagrangian import solve_lagrangian
from src.flows.monitors import phixx_residual, xixx_residual
from src.flows.state import eulerian_velocity
from src.flows.trajectory import Trajectory
from src.grid.diffeo import DiffeoS1, invert_diffeo
from src.grid.periodic import (
    PeriodicFunction,
    derivative,
    evaluate,
    from_fourier,
    grid_points,
    mean,
    sample,
    sup_diff,
    sup_norm,
)
from src.operators.conjugated import apply_P_conjugated
from src.operators.inertia import (
    InverseLike,
    apply_A,
    invert_A_closed,
    invert_A_spectral,
)
from src.operators.rhs import RhsMode, apply_B, mudp_rhs

logger = logging.getLogger(__name__)

FAULT_SIZE = 1e-3
SEED = 20240611
DUALITY_TIME = 0.5


def faulty_inverse(f: PeriodicFunction) -> PeriodicFunction:
    """A^-1 perturbed by FAULT_SIZE times the identity."""
    return invert_A_spectral(f) + FAULT_SIZE * f


def random_trig(
    rng: np.random.Generator,
    n: int,
    degree: int,
    offset: float = 0.0,
    amplitude: float = 1.0,
) -> PeriodicFunction:
    """Trig polynomial of the given degree with coefficients decaying like 1/k."""
    terms = [(0, offset, 0.0)]
    for k in range(1, degree + 1):
        a, b = rng.uniform(-1.0, 1.0, size=2) * amplitude / k
        terms.append((k, a, b))
    return from_fourier(n, terms)


@dataclass
class CheckResult:
    name: str
    group: str
    anchor: str
    measured: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.measured) and self.measured <= self.tolerance)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "group": self.group,
            "paper_anchor": self.anchor,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class Check:
    name: str
    group: str
    anchor: str
    tolerance: float
    measure: Callable[["SuiteContext"], float]


class SuiteContext:
    """
    Shared inputs of a validation run. The reference trajectories are computed
    lazily and reused by every check that needs them.
    """

    def __init__(
        self,
        n: int = 256,
        dt: float = 1e-3,
        inject_fault: bool = False,
        n_jobs: int = 1,
    ):
        self.n = n
        self.dt = dt
        self.inject_fault = inject_fault
        self.n_jobs = n_jobs
        self.inverse: InverseLike = faulty_inverse if inject_fault else "spectral"

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(SEED)

    @cached_property
    def reference_config(self) -> SolverConfig:
        return SolverConfig(n=self.n, dt=self.dt, t_end=1.0, monitor_every=1)

    @cached_property
    def reference_u0(self) -> PeriodicFunction:
        return from_fourier(self.n, [(0, 0.2, 0.0), (1, 0.05, 0.0)])

    @cached_property
    def eulerian(self) -> Trajectory:
        return solve_eulerian(self.reference_u0, self.reference_config, self.inverse)

    @cached_property
    def lagrangian(self) -> Trajectory:
        return solve_lagrangian(self.reference_u0, self.reference_config, self.inverse)


# grid


def _derivative_check(ctx: SuiteContext) -> float:
    f = sample(lambda x: np.cos(2 * np.pi * x), 64)
    exact = sample(lambda x: -2 * np.pi * np.sin(2 * np.pi * x), 64)
    return sup_diff(derivative(f, 1), exact)


def _interpolation_check(ctx: SuiteContext) -> float:
    rng = ctx.rng()
    coeffs = rng.uniform(-1.0, 1.0, size=(6, 2))
    terms = [(k, a, b) for k, (a, b) in enumerate(coeffs)]
    f = from_fourier(64, terms)
    points = rng.uniform(-2.0, 3.0, size=100)
    exact = sum(
        a * np.cos(2 * np.pi * k * points) + b * np.sin(2 * np.pi * k * points)
        for k, a, b in terms
    )
    return sup_norm(evaluate(f, points) - exact)


def _inversion_check(ctx: SuiteContext) -> float:
    phi = DiffeoS1(sample(lambda x: 0.1 * np.sin(2 * np.pi * x), 256))
    phi_inv = invert_diffeo(phi)
    round_trip = phi.lift_values() + evaluate(phi_inv.displacement, phi.lift_values())
    return sup_norm(round_trip - grid_points(256))


# operators


def _inverse_realizations(ctx: SuiteContext) -> float:
    rng = ctx.rng()
    worst = 0.0
    for _ in range(20):
        f = random_trig(rng, 128, 16, offset=rng.uniform(-1, 1))
        closed = invert_A_closed(f)
        worst = max(worst, sup_diff(closed, _invert(ctx, f)))
    return worst


def _invert(ctx: SuiteContext, f: PeriodicFunction) -> PeriodicFunction:
    if callable(ctx.inverse):
        return ctx.inverse(f)
    return invert_A_spectral(f)


def _two_sided_inverse(ctx: SuiteContext) -> float:
    rng = ctx.rng()
    worst = 0.0
    for _ in range(20):
        f = random_trig(rng, 128, 32, offset=rng.uniform(-0.1, 0.1))
        worst = max(worst, sup_diff(apply_A(_invert(ctx, f)), f))
        worst = max(worst, sup_diff(_invert(ctx, apply_A(f)), f))
    return worst


def _smooth_inputs(ctx: SuiteContext, count: int = 20) -> Iterable[PeriodicFunction]:
    rng = ctx.rng()
    for _ in range(count):
        yield random_trig(
            rng, 128, 8, offset=rng.uniform(-0.5, 0.5), amplitude=rng.uniform(0.05, 0.2)
        )


def _rhs_cross_mode(ctx: SuiteContext) -> float:
    worst = 0.0
    for u in _smooth_inputs(ctx):
        values = [mudp_rhs(u, mode, ctx.inverse) for mode in RhsMode]
        for i in range(len(values)):
            for j in range(i + 1, len(values)):
                worst = max(worst, sup_diff(values[i], values[j]))
    return worst


def _b_diagonal(ctx: SuiteContext) -> float:
    worst = 0.0
    for u in _smooth_inputs(ctx):
        rhs = mudp_rhs(u, RhsMode.MOMENTUM_FORM, ctx.inverse)
        worst = max(worst, sup_norm(apply_B(u, u, ctx.inverse) + rhs))
    return worst


def _rhs_mean_zero(ctx: SuiteContext) -> float:
    worst = 0.0
    for u in _smooth_inputs(ctx):
        for mode in RhsMode:
            worst = max(worst, abs(mean(mudp_rhs(u, mode, ctx.inverse))))
    return worst


def _conjugation_strategies(ctx: SuiteContext) -> float:
    rng = ctx.rng()
    worst = 0.0
    for _ in range(10):
        xi = random_trig(rng, 256, 3, offset=rng.uniform(-0.3, 0.3), amplitude=0.1)
        a, b = rng.uniform(-1.0, 1.0, size=2) * 0.05
        phi = DiffeoS1(from_fourier(256, [(0, rng.uniform(-0.5, 0.5), 0.0), (1, a, b)]))
        if phi.min_slope < 0.5:
            raise MuDPError(f"Sampled diffeomorphism too degenerate ({phi.min_slope})")
        composed = apply_P_conjugated(xi, phi, "compose", ctx.inverse)
        recursed = apply_P_conjugated(xi, phi, "recursion")
        worst = max(worst, sup_diff(composed, recursed))
    return worst


# flows


def _momentum_drift(ctx: SuiteContext) -> float:
    return max(m.momentum_drift for m in ctx.lagrangian.monitors)


def _mean_drift(ctx: SuiteContext) -> float:
    return max(m.mean_drift for m in ctx.eulerian.monitors)


def _duality(ctx: SuiteContext) -> float:
    u_e = ctx.eulerian.snapshots[ctx.eulerian.index_at(DUALITY_TIME)]
    state = ctx.lagrangian.snapshots[ctx.lagrangian.index_at(DUALITY_TIME)]
    cfg = ctx.reference_config
    return sup_diff(u_e, eulerian_velocity(state, cfg.interpolant, cfg.inversion_tol))


def _phixx(ctx: SuiteContext) -> float:
    return phixx_residual(ctx.lagrangian, DUALITY_TIME)


def _xixx(ctx: SuiteContext) -> float:
    return xixx_residual(ctx.lagrangian, DUALITY_TIME)


# expmap


def _exp_zero(ctx: SuiteContext) -> float:
    cfg = ctx.reference_config
    phi = exp_map(PeriodicFunction(np.zeros(cfg.n)), cfg, ctx.inverse)
    return sup_norm(phi.displacement)


def _exp_constant(ctx: SuiteContext) -> float:
    cfg = ctx.reference_config
    phi = exp_map(PeriodicFunction(np.full(cfg.n, 0.3)), cfg, ctx.inverse)
    return sup_norm(phi.displacement - 0.3)


def _homogeneity(s: float) -> Callable[[SuiteContext], float]:
    def measure(ctx: SuiteContext) -> float:
        u = from_fourier(ctx.n, [(1, 0.1, 0.0)])
        return homogeneity_check(u, s, ctx.reference_config)

    return measure


def _dexp_identity(ctx: SuiteContext) -> float:
    u = PeriodicFunction(np.zeros(ctx.n))
    # the base flow is stationary, so RK4 is exact for any step
    cfg = ctx.reference_config.updated(dt=0.05)
    jacobian = jacobian_expmap(u, 8, cfg, n_jobs=ctx.n_jobs)
    return float(np.max(np.abs(jacobian.matrix - np.eye(jacobian.matrix.shape[0]))))


def _psi_analytic(ctx: SuiteContext) -> float:
    u = PeriodicFunction(np.zeros(ctx.n))
    w = from_fourier(ctx.n, [(1, 1.0, 0.0)])
    return psi_xx_formula_check(u, w, 1.0, ctx.reference_config.updated(dt=0.01))


def _psi_generic(ctx: SuiteContext) -> float:
    u = from_fourier(ctx.n, [(1, 0.1, 0.0)])
    w = from_fourier(ctx.n, [(2, 0.0, 1.0)])
    return psi_xx_formula_check(u, w, 0.5, ctx.reference_config)


CHECKS: List[Check] = [
    Check(
        "derivative_single_mode",
        "grid",
        "d/dx cos 2 pi x = -2 pi sin 2 pi x",
        1e-12,
        _derivative_check,
    ),
    Check(
        "trig_interpolation",
        "grid",
        "interpolant reproduces trig polynomials",
        1e-10,
        _interpolation_check,
    ),
    Check("diffeo_round_trip", "grid", "phi^-1 o phi = id", 1e-10, _inversion_check),
    Check(
        "inverse_realizations",
        "operators",
        "closed-form A^-1 = Fourier A^-1",
        1e-8,
        _inverse_realizations,
    ),
    Check(
        "two_sided_inverse",
        "operators",
        "A A^-1 = A^-1 A = id",
        1e-11,
        _two_sided_inverse,
    ),
    Check(
        "rhs_cross_mode",
        "rhs",
        "all forms of u_t agree",
        1e-10,
        _rhs_cross_mode,
    ),
    Check("b_diagonal", "rhs", "B(u, u) = -u_t", 1e-11, _b_diagonal),
    Check("rhs_mean_zero", "rhs", "mean(u_t) = 0", 1e-12, _rhs_mean_zero),
    Check(
        "conjugation_strategies",
        "conjugation",
        "P_phi by composition = P_phi by recursion",
        1e-7,
        _conjugation_strategies,
    ),
    Check(
        "momentum_drift",
        "conservation",
        "(Au o phi) phi_x^3 = m0",
        1e-8,
        _momentum_drift,
    ),
    Check(
        "mean_drift",
        "conservation",
        "mean(u(t)) = mean(u0)",
        1e-11,
        _mean_drift,
    ),
    Check("eulerian_lagrangian", "duality", "u = xi o phi^-1", 1e-5, _duality),
    Check(
        "phixx_reconstruction",
        "reconstruction",
        "phi_xx from the time history",
        1e-6,
        _phixx,
    ),
    Check(
        "xixx_reconstruction",
        "reconstruction",
        "xi_xx from the time history",
        1e-6,
        _xixx,
    ),
    Check("exp_zero", "expmap", "exp(0) = id", 1e-14, _exp_zero),
    Check("exp_constant", "expmap", "exp(c) = rotation by c", 1e-9, _exp_constant),
    *[
        Check(
            f"homogeneity_{s}",
            "expmap",
            "exp(s u) = phi_u(s)",
            1e-6,
            _homogeneity(s),
        )
        for s in (0.25, 0.5, 0.75)
    ],
    Check(
        "dexp_identity",
        "expmap",
        "D exp(0) = id on 8 modes",
        1e-4,
        _dexp_identity,
    ),
    Check(
        "psi_xx_analytic",
        "expmap",
        "psi_xx expansion, u = 0",
        1e-8,
        _psi_analytic,
    ),
    Check(
        "psi_xx_generic",
        "expmap",
        "psi_xx expansion, u = 0.1 cos 2 pi x",
        1e-4,
        _psi_generic,
    ),
]


def select_checks(only: Optional[Iterable[str]] = None) -> List[Check]:
    """Checks whose name or group is listed in `only`; all checks when empty."""
    wanted = set(only or [])
    if not wanted:
        return list(CHECKS)
    known = {c.name for c in CHECKS} | {c.group for c in CHECKS}
    unknown = wanted - known
    if unknown:
        raise MuDPError(f"Unknown checks or groups: {sorted(unknown)}")
    return [c for c in CHECKS if c.name in wanted or c.group in wanted]


def run_checks(
    ctx: SuiteContext, only: Optional[Iterable[str]] = None
) -> List[CheckResult]:
    results = []
    for check in select_checks(only):
        logger.info(f"Running check {check.name}")
        try:
            measured = float(check.measure(ctx))
        except MuDPError as e:
            logger.error(f"Check {check.name} raised: {e}")
            measured = float("nan")
        results.append(
            CheckResult(
                check.name, check.group, check.anchor, measured, check.tolerance
            )
        )
    return results


def report(results: List[CheckResult], ctx: SuiteContext) -> Dict:
    return {
        "n": ctx.n,
        "dt": ctx.dt,
        "inject_fault": ctx.inject_fault,
        "checks": [r.as_dict() for r in results],
        "passed": all(r.passed for r in results),
    }


def summary_table(results: List[CheckResult]) -> str:
    rows = [
        (
            r.name,
            r.group,
            f"{r.measured:.3e}",
            f"{r.tolerance:.1e}",
            "PASS" if r.passed else "FAIL",
        )
        for r in results
    ]
    return tabulate(rows, headers=["check", "group", "measured", "tolerance", "status"])
