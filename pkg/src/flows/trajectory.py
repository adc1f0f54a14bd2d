import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Union

import numpy as np

from src.errors import InsufficientSnapshotDensity, MuDPError
from src.flows.config import SolverConfig
from src.flows.state import FlowState
from src.grid.periodic import PeriodicFunction

logger = logging.getLogger(__name__)

TIME_MATCH_TOL = 1e-9


class Termination(str, Enum):
    COMPLETED = "completed"
    BLOWUP_DETECTED = "blowup_detected"
    SOLVER_FAILURE = "solver_failure"


@dataclass(frozen=True)
class MonitorRecord:
    """One row of the monitor series. Quantities a solver does not track are NaN."""

    t: float
    mean_drift: float
    momentum_drift: float = float("nan")
    min_slope: float = float("nan")
    sup_ux: float = float("nan")

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "mean_drift": self.mean_drift,
            "momentum_drift": self.momentum_drift,
            "min_slope": self.min_slope,
            "sup_ux": self.sup_ux,
        }


Snapshot = Union[PeriodicFunction, FlowState]


@dataclass
class Trajectory:
    """
    Time-indexed snapshots of one run together with its monitor series.

    Attributes:
        kind: "eulerian" (snapshots are u) or "lagrangian" (snapshots are FlowState).
        config: The configuration of the run.
        u0: Initial velocity, None for a run started away from the identity.
        m0: Momentum density (Au o phi) phi_x^3 of the initial state.
        times: Strictly increasing snapshot times.
        snapshots: One entry per time.
        monitors: One record per time.
        termination: How the run ended.
        message: Diagnostic for a run that did not complete.
    """

    kind: str
    config: SolverConfig
    u0: Optional[PeriodicFunction]
    m0: Optional[PeriodicFunction] = None
    times: List[float] = field(default_factory=list)
    snapshots: List[Snapshot] = field(default_factory=list)
    monitors: List[MonitorRecord] = field(default_factory=list)
    termination: Termination = Termination.COMPLETED
    message: Optional[str] = None

    def record(self, t: float, snapshot: Snapshot, monitor: MonitorRecord):
        if self.times and t <= self.times[-1]:
            raise MuDPError(f"Snapshot time {t} does not advance past {self.times[-1]}")
        self.times.append(t)
        self.snapshots.append(snapshot)
        self.monitors.append(monitor)

    @property
    def final(self) -> Snapshot:
        return self.snapshots[-1]

    @property
    def final_time(self) -> float:
        return self.times[-1]

    @property
    def completed(self) -> bool:
        return self.termination is Termination.COMPLETED

    def index_at(self, t: float) -> int:
        """Index of the snapshot stored at time t."""
        times = np.asarray(self.times)
        idx = int(np.argmin(np.abs(times - t)))
        if abs(times[idx] - t) > TIME_MATCH_TOL * max(1.0, abs(t)):
            raise MuDPError(f"No snapshot stored at t={t} (nearest {times[idx]})")
        return idx

    def require_dense(self):
        """Time quadratures over the history need a snapshot at every step."""
        if self.config.monitor_every != 1:
            raise InsufficientSnapshotDensity(
                f"monitor_every={self.config.monitor_every}; time quadrature "
                "needs snapshots at every step (monitor_every=1)"
            )
