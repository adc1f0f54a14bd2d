import logging
import platform
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import orjson
import pandas as pd
from pydantic import BaseModel, Field

from src import __version__
from src.flows.config import SolverConfig
from src.flows.state import FlowState
from src.flows.trajectory import Trajectory
from src.grid.periodic import grid_points

logger = logging.getLogger(__name__)

JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY
CSV_LINE_END = "\r\n"


class RunManifest(BaseModel):
    """Everything needed to reproduce and interpret the files of one command."""

    command: str
    code_version: str = __version__
    config: Dict[str, Any] = Field(default_factory=dict)
    choices: Dict[str, Any] = Field(default_factory=dict)
    tolerances: Dict[str, float] = Field(default_factory=dict)
    termination: str = "completed"
    message: Optional[str] = None
    files: List[str] = Field(default_factory=list)
    extra: Dict[str, Any] = Field(default_factory=dict)
    python: str = platform.python_version()
    wall_time: float = 0.0

    @classmethod
    def for_config(cls, command: str, cfg: SolverConfig, **kwargs) -> "RunManifest":
        """Manifest echoing cfg, with scheme choices and tolerances split out."""
        return cls(
            command=command,
            config=cfg.model_dump(mode="json"),
            choices={
                "derivative_scheme": "spectral",
                "interpolant": cfg.interpolant,
                "inverse": cfg.inverse,
                "quadrature_rule": cfg.quadrature_rule,
                "quadrature_refinement": cfg.quadrature_refinement,
                "rhs_mode": cfg.rhs_mode.value,
                "strategy": cfg.strategy,
                "momentum_path": cfg.momentum_path,
                "dealias": cfg.dealias,
                "time_integrator": "rk4",
                "time_quadrature": "trapezoid",
            },
            tolerances={
                "slope_floor": cfg.slope_floor,
                "u_x_cap": cfg.u_x_cap,
                "inversion_tol": cfg.inversion_tol,
                "fd_epsilon": cfg.fd_epsilon,
                "sensitivity_step": cfg.sensitivity_step,
            },
            **kwargs,
        )


def write_json(path: Union[str, Path], payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    path.write_bytes(orjson.dumps(payload, option=JSON_OPTIONS) + b"\n")
    logger.info(f"Wrote {path}")
    return path


def write_csv(path: Union[str, Path], frame: pd.DataFrame) -> Path:
    """RFC-4180 line endings, '.' decimals, shortest round-trip floats, NaN as empty."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator=CSV_LINE_END)
    logger.info(f"Wrote {path} ({len(frame)} rows)")
    return path


def monitors_frame(trajectory: Trajectory) -> pd.DataFrame:
    columns = ["t", "mean_drift", "momentum_drift", "min_slope", "sup_ux"]
    return pd.DataFrame([m.as_dict() for m in trajectory.monitors], columns=columns)


def _fields(snapshot) -> Dict[str, np.ndarray]:
    if isinstance(snapshot, FlowState):
        return {
            "displacement": snapshot.phi.displacement.values,
            "xi": snapshot.xi.values,
        }
    return {"u": snapshot.values}


def trajectory_frame(trajectory: Trajectory, layout: str = "long") -> pd.DataFrame:
    """
    Snapshots as a table.

    long: one row per (t, x) with one column per field (u, or displacement and xi).
    wide: one row per snapshot and field, columns t, [field,] x_0 .. x_{n-1}.
    """
    n = trajectory.config.n
    x = grid_points(n)
    if layout == "long":
        blocks = []
        for t, snapshot in zip(trajectory.times, trajectory.snapshots):
            block = {"t": np.full(n, t), "x": x}
            block.update(_fields(snapshot))
            blocks.append(pd.DataFrame(block))
        return pd.concat(blocks, ignore_index=True)

    if layout == "wide":
        node_columns = [f"x_{j}" for j in range(n)]
        rows = []
        for t, snapshot in zip(trajectory.times, trajectory.snapshots):
            for name, values in _fields(snapshot).items():
                rows.append({"t": t, "field": name, **dict(zip(node_columns, values))})
        frame = pd.DataFrame(rows, columns=["t", "field", *node_columns])
        if trajectory.kind == "eulerian":
            frame = frame.drop(columns="field")
        return frame
    raise ValueError(f"Unknown layout '{layout}', expected 'long' or 'wide'")
