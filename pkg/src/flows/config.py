import logging
import math
from functools import partial
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.operators.inertia import (
    DEFAULT_REFINEMENT,
    InverseLike,
    invert_A_closed,
)
from src.operators.rhs import RhsMode

logger = logging.getLogger(__name__)

# Steps whose ratio t_end/dt is this close to an integer are not rounded up.
HORIZON_SLACK = 1e-9


class SolverConfig(BaseModel):
    """
    Everything that determines a run: resolution, horizon, operator choices,
    blow-up thresholds and the tolerances of the derived quantities.
    Defaults are the reference configuration.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(256, ge=8, description="Grid size (even)")
    dt: float = Field(1e-3, gt=0, description="Time step")
    t_end: float = Field(1.0, ge=0, description="Horizon")
    rhs_mode: RhsMode = RhsMode.MOMENTUM_FORM
    strategy: Literal["compose", "recursion"] = "compose"
    momentum_path: Literal["inversion_free", "compose"] = "inversion_free"
    interpolant: Literal["trig", "spline"] = "trig"
    inverse: Literal["spectral", "closed"] = "spectral"
    quadrature_rule: Literal["gauss_legendre", "simpson"] = "gauss_legendre"
    quadrature_refinement: int = Field(DEFAULT_REFINEMENT, ge=1)
    dealias: bool = False
    slope_floor: float = Field(1e-3, gt=0)
    u_x_cap: float = Field(1e3, gt=0)
    monitor_every: int = Field(1, ge=1)
    inversion_tol: float = Field(1e-12, gt=0)
    fd_epsilon: float = Field(1e-5, gt=0)
    sensitivity_step: float = Field(1e-6, gt=0)

    @field_validator("n")
    @classmethod
    def _even_grid(cls, value: int) -> int:
        if value % 2:
            raise ValueError(f"grid size must be even, got {value}")
        return value

    @field_validator("rhs_mode", mode="before")
    @classmethod
    def _rhs_alias(cls, value):
        return RhsMode.parse(value)

    def n_steps(self) -> int:
        """Number of uniform steps covering [0, t_end]; 0 for a zero horizon."""
        if self.t_end == 0:
            return 0
        return max(1, math.ceil(self.t_end / self.dt - HORIZON_SLACK))

    def step_size(self) -> float:
        """The step actually used, t_end / n_steps (equal to dt when it divides)."""
        steps = self.n_steps()
        if steps == 0:
            return self.dt
        h = self.t_end / steps
        if abs(h - self.dt) > HORIZON_SLACK * self.dt:
            logger.warning(
                f"Horizon {self.t_end} is not a multiple of dt={self.dt}; "
                f"using {steps} steps of {h:.6e}"
            )
        return h

    def inverse_operator(self) -> InverseLike:
        """A^-1 realization as accepted by the operators module."""
        if self.inverse == "closed":
            return partial(
                invert_A_closed,
                refinement=self.quadrature_refinement,
                rule=self.quadrature_rule,
            )
        return "spectral"

    def updated(self, **changes) -> "SolverConfig":
        """Validated copy with some fields replaced."""
        return self.model_validate({**self.model_dump(), **changes})
