import numpy as np
import pytest

from src.errors import GridError
from src.flows.config import SolverConfig
from src.flows.eulerian import solve_eulerian
from src.flows.trajectory import Termination
from src.grid.periodic import constant, from_fourier, sample, sup_diff, sup_norm


@pytest.fixture
def reference_u0():
    return from_fourier(64, [(0, 0.2, 0.0), (1, 0.05, 0.0)])


def test_constant_data_is_stationary():
    cfg = SolverConfig(n=16, dt=0.1, t_end=0.5)
    trajectory = solve_eulerian(constant(16, 0.3), cfg)
    assert trajectory.completed
    assert trajectory.times == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    for u in trajectory.snapshots:
        assert sup_norm(u - 0.3) <= 1e-14


def test_mean_is_conserved(reference_u0):
    cfg = SolverConfig(n=64, dt=1e-2, t_end=0.5)
    trajectory = solve_eulerian(reference_u0, cfg)
    assert max(m.mean_drift for m in trajectory.monitors) <= 1e-12
    assert np.isnan(trajectory.monitors[-1].momentum_drift)


@pytest.mark.parametrize("mode", ["transport", "quasilinear"])
def test_modes_give_the_same_trajectory(reference_u0, mode):
    cfg = SolverConfig(n=64, dt=2e-2, t_end=0.4)
    base = solve_eulerian(reference_u0, cfg).final
    other = solve_eulerian(reference_u0, cfg.updated(rhs_mode=mode)).final
    assert sup_diff(base, other) <= 1e-10


def test_temporal_order_is_four():
    """Richardson estimate from a dt ladder should be close to four."""
    u0 = from_fourier(32, [(0, 0.2, 0.0), (1, 0.05, 0.0)])
    finals = [
        solve_eulerian(u0, SolverConfig(n=32, dt=dt, t_end=1.0)).final
        for dt in (0.05, 0.025, 0.0125)
    ]
    coarse = sup_diff(finals[0], finals[1])
    fine = sup_diff(finals[1], finals[2])
    assert np.log2(coarse / fine) == pytest.approx(4.0, abs=0.3)


def test_monitor_cadence(reference_u0):
    cfg = SolverConfig(n=64, dt=0.1, t_end=1.0, monitor_every=3)
    trajectory = solve_eulerian(reference_u0, cfg)
    assert trajectory.times == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])


def test_steep_data_is_flagged_as_blowup():
    """A large mean-free wave steepens like Burgers and hits the gradient cap."""
    u0 = sample(lambda x: 5.0 * np.sin(2 * np.pi * x), 64)
    cfg = SolverConfig(n=64, dt=1e-3, t_end=0.1, u_x_cap=200.0)
    trajectory = solve_eulerian(u0, cfg)
    assert trajectory.termination is Termination.BLOWUP_DETECTED
    assert trajectory.final_time < 0.1
    assert trajectory.monitors[-1].sup_ux >= 200.0


def test_grid_mismatch(reference_u0):
    with pytest.raises(GridError):
        solve_eulerian(reference_u0, SolverConfig(n=32))
