import numpy as np
import pytest

from src.errors import MuDPError
from src.flows.config import SolverConfig
from src.flows.lagrangian import solve_lagrangian
from src.flows.monitors import (
    BlowupStatus,
    detect_blowup,
    gradient_sup,
    momentum_density,
    momentum_invariant,
)
from src.flows.state import FlowState
from src.flows.trajectory import MonitorRecord, Trajectory
from src.grid.diffeo import DiffeoS1
from src.grid.periodic import constant, from_fourier, sample, sup_diff
from src.operators.inertia import apply_A


@pytest.fixture
def u0():
    return from_fourier(64, [(0, 0.2, 0.0), (1, 0.05, 0.0)])


@pytest.fixture
def flowed_state(u0):
    return solve_lagrangian(u0, SolverConfig(n=64, dt=0.05, t_end=0.5)).final


def test_momentum_density_at_identity_is_Au(u0):
    state = FlowState.at_identity(u0)
    assert sup_diff(momentum_density(state), apply_A(u0)) <= 1e-12


def test_momentum_paths_agree(flowed_state):
    """The inversion-free density matches the one computed through phi^-1."""
    direct = momentum_density(flowed_state, "inversion_free")
    composed = momentum_density(flowed_state, "compose")
    assert sup_diff(direct, composed) <= 1e-9


def test_unknown_momentum_path(u0):
    with pytest.raises(MuDPError):
        momentum_density(FlowState.at_identity(u0), "quadrature")


def test_momentum_invariant_is_relative(u0):
    state = FlowState.at_identity(u0)
    assert momentum_invariant(state, apply_A(u0)) <= 1e-13
    shifted = apply_A(u0) + 1.0
    expected = 1.0 / (1.0 + np.max(np.abs(shifted.values)))
    assert momentum_invariant(state, shifted) == pytest.approx(expected)


def test_gradient_sup_without_inversion(u0):
    phi = DiffeoS1(from_fourier(64, [(1, 0.05, 0.0)]))
    state = FlowState(phi, u0)
    expected = np.max(np.abs(0.1 * np.pi * np.sin(2 * np.pi * np.arange(64) / 64)))
    assert gradient_sup(FlowState.at_identity(u0)) == pytest.approx(expected)
    assert gradient_sup(state) > 0.0


def test_detect_blowup():
    cfg = SolverConfig(n=64, u_x_cap=10.0, slope_floor=0.5)
    assert detect_blowup(constant(64, 1.0), cfg) is BlowupStatus.OK
    steep = sample(lambda x: 2.0 * np.sin(2 * np.pi * x), 64)
    assert detect_blowup(steep, cfg) is BlowupStatus.BLOWUP_DETECTED
    squeezed = DiffeoS1(sample(lambda x: 0.1 * np.sin(2 * np.pi * x), 64))
    state = FlowState(squeezed, constant(64, 0.0))
    assert detect_blowup(state, cfg) is BlowupStatus.BLOWUP_DETECTED


def test_trajectory_rejects_non_increasing_times(u0):
    trajectory = Trajectory(kind="eulerian", config=SolverConfig(n=64), u0=u0)
    trajectory.record(0.0, u0, MonitorRecord(t=0.0, mean_drift=0.0))
    with pytest.raises(MuDPError):
        trajectory.record(0.0, u0, MonitorRecord(t=0.0, mean_drift=0.0))
    with pytest.raises(MuDPError):
        trajectory.index_at(0.3)
