import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Union

import pandas as pd
from joblib import Parallel, delayed
from tabulate import tabulate
from tqdm import tqdm

from src.errors import ConvergenceSpecError, OutOfDomainError, SolverFailure
from src.flows.config import SolverConfig
from src.flows.eulerian import solve_eulerian
from src.flows.lagrangian import solve_lagrangian
from src.flows.trajectory import Termination, Trajectory
from src.grid.periodic import PeriodicFunction, evaluate, grid_points, sup_norm

logger = logging.getLogger(__name__)

LADDER_KINDS = ("dt", "n")
SOLVERS = ("eulerian", "lagrangian")
MIN_LADDER = 3


@dataclass
class ConvergenceReport:
    """
    Refinement study of one quantity along a dt or n ladder, ordered coarse to fine.

    errors[i] is the sup distance of rung i to the finest rung, differences[i] the
    distance between rungs i and i + 1. orders[i] is the Richardson estimate from
    the triplet (i, i + 1, i + 2) and drop_factors[i] is
    differences[i] / differences[i + 1].
    """

    ladder: str
    solver: str
    values: List[float]
    errors: List[float]
    differences: List[float]
    orders: List[float] = field(default_factory=list)
    drop_factors: List[float] = field(default_factory=list)

    @property
    def observed_order(self) -> float:
        """Estimate from the finest triplet."""
        return self.orders[-1]

    def frame(self) -> pd.DataFrame:
        pad = [float("nan")]
        return pd.DataFrame(
            {
                self.ladder: self.values,
                "error_vs_finest": self.errors,
                "consecutive_diff": self.differences + pad,
                "observed_order": self.orders + pad * 2,
                "drop_factor": self.drop_factors + pad * 2,
            }
        )

    def as_dict(self) -> Dict:
        return {
            "ladder": self.ladder,
            "solver": self.solver,
            "values": self.values,
            "error_vs_finest": self.errors,
            "consecutive_diff": self.differences,
            "observed_orders": self.orders,
            "drop_factors": self.drop_factors,
            "observed_order": self.observed_order,
        }

    def table(self) -> str:
        return tabulate(self.frame(), headers="keys", showindex=False, floatfmt=".4e")


def parse_ladder(kind: str, values: Sequence[float]) -> List[float]:
    """
    Validates a ladder and orders it coarse to fine (dt decreasing, n increasing).

    Raises:
        ConvergenceSpecError: unknown kind, fewer than three rungs, repeated or
            non-positive values, or a non-integer grid size.
    """
    if kind not in LADDER_KINDS:
        raise ConvergenceSpecError(
            f"Unknown ladder '{kind}', expected one of {LADDER_KINDS}"
        )
    if len(values) < MIN_LADDER:
        raise ConvergenceSpecError(
            f"A {kind} ladder needs at least {MIN_LADDER} values, got {len(values)}"
        )
    if len(set(values)) != len(values):
        raise ConvergenceSpecError(
            f"Repeated values in the {kind} ladder: {list(values)}"
        )
    if any(v <= 0 for v in values):
        raise ConvergenceSpecError(f"Ladder values must be positive: {list(values)}")
    if kind == "n":
        if any(float(v) != int(v) for v in values):
            raise ConvergenceSpecError(f"Grid sizes must be integers: {list(values)}")
        return sorted(int(v) for v in values)
    return sorted((float(v) for v in values), reverse=True)


def _final_fields(trajectory: Trajectory) -> Dict[str, PeriodicFunction]:
    if trajectory.termination is Termination.BLOWUP_DETECTED:
        raise OutOfDomainError(
            f"Rung n={trajectory.config.n}, dt={trajectory.config.dt} blew up: "
            f"{trajectory.message}"
        )
    if trajectory.termination is Termination.SOLVER_FAILURE:
        raise SolverFailure(trajectory.message or "solver failure")
    final = trajectory.final
    if trajectory.kind == "eulerian":
        return {"u": final}
    return {"displacement": final.phi.displacement, "xi": final.xi}


def _rung(
    cfg: SolverConfig, solver: str, initial: Callable[[int], PeriodicFunction]
) -> Dict[str, PeriodicFunction]:
    # only the endpoint is needed
    cfg = cfg.updated(monitor_every=max(1, cfg.n_steps()))
    solve = solve_eulerian if solver == "eulerian" else solve_lagrangian
    return _final_fields(solve(initial(cfg.n), cfg))


def _distance(
    coarse: Dict[str, PeriodicFunction], fine: Dict[str, PeriodicFunction]
) -> float:
    """Sup distance over all fields, measured at the nodes of the coarser grid."""
    worst = 0.0
    for name, f in coarse.items():
        g = fine[name]
        if g.n == f.n:
            diff = f.values - g.values
        else:
            diff = f.values - evaluate(g, grid_points(f.n))
        worst = max(worst, sup_norm(diff))
    return worst


def _ratio(a: float, b: float) -> float:
    return a / b if b > 0 else float("inf")


def run_convergence(
    base: SolverConfig,
    initial: Callable[[int], PeriodicFunction],
    ladder: str,
    values: Sequence[float],
    solver: str = "eulerian",
    n_jobs: int = 1,
    progress: bool = False,
) -> ConvergenceReport:
    """
    Runs one solve per ladder rung and measures self-convergence.

    Args:
        base: Configuration shared by every rung; the laddered field is replaced.
        initial: Builds u0 on a grid of the given size; picklable when n_jobs != 1.
        ladder: "dt" or "n".
        values: Rung values, in any order.
        solver: "eulerian" or "lagrangian".
        n_jobs: joblib workers; rung results come back in ladder order.
        progress: Show a progress bar.

    Raises:
        ConvergenceSpecError: invalid ladder or solver.
        OutOfDomainError: a rung blew up before t_end.
        SolverFailure: a rung produced non-finite values.
    """
    if solver not in SOLVERS:
        raise ConvergenceSpecError(
            f"Unknown solver '{solver}', expected one of {SOLVERS}"
        )
    rungs = parse_ladder(ladder, values)
    configs = [base.updated(**{ladder: v}) for v in rungs]
    logger.info(f"Convergence study over {ladder} = {rungs} ({solver})")

    results = Parallel(n_jobs=n_jobs)(
        delayed(_rung)(cfg, solver, initial)
        for cfg in tqdm(configs, desc=f"{ladder} ladder", disable=not progress)
    )

    finest = results[-1]
    errors = [_distance(r, finest) for r in results]
    differences = [_distance(a, b) for a, b in zip(results, results[1:])]
    orders, drops = [], []
    for i in range(len(differences) - 1):
        drop = _ratio(differences[i], differences[i + 1])
        refinement = (
            rungs[i] / rungs[i + 1] if ladder == "dt" else rungs[i + 1] / rungs[i]
        )
        if 0 < drop < math.inf:
            orders.append(math.log(drop) / math.log(refinement))
        else:
            orders.append(float("nan"))
        drops.append(drop)

    report = ConvergenceReport(
        ladder=ladder,
        solver=solver,
        values=[float(v) for v in rungs],
        errors=errors,
        differences=differences,
        orders=orders,
        drop_factors=drops,
    )
    logger.info(f"Observed order {report.observed_order:.3f}, drops {drops}")
    return report


def write_dat(path: Union[str, Path], report: ConvergenceReport) -> Path:
    """Whitespace-separated columns for external plotting; missing entries as nan."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report.frame().to_csv(path, sep=" ", index=False, na_rep="nan", lineterminator="\n")
    logger.info(f"Wrote {path}")
    return path
