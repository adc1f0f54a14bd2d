import numpy as np
import pytest

from src.errors import OutOfDomainError
from src.expmap.exponential import exp_map, flow_to, homogeneity_check
from src.flows.config import SolverConfig
from src.grid.periodic import constant, from_fourier, sample, sup_norm


@pytest.fixture
def cfg():
    return SolverConfig(n=32, dt=1e-2)


def test_exp_of_zero_is_identity(cfg):
    phi = exp_map(constant(32, 0.0), cfg)
    assert sup_norm(phi.displacement) == 0.0


def test_exp_of_constant_is_rotation():
    """Constant velocities are stationary, so exp(c) rotates by exactly c."""
    phi = exp_map(constant(32, 0.3), SolverConfig(n=32, dt=0.1))
    assert sup_norm(phi.displacement - 0.3) <= 1e-9


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_homogeneity(cfg, s):
    """exp(s u) lands where the geodesic of u is at time s."""
    u = from_fourier(32, [(1, 0.1, 0.0)])
    assert homogeneity_check(u, s, cfg) <= 1e-6


def test_flow_to_stops_at_the_requested_time(cfg):
    u = from_fourier(32, [(1, 0.1, 0.0)])
    trajectory = flow_to(u, 0.4, cfg)
    assert trajectory.final_time == pytest.approx(0.4)


def test_blowup_before_one_is_out_of_domain():
    u = sample(lambda x: 5.0 * np.sin(2 * np.pi * x), 64)
    cfg = SolverConfig(n=64, dt=1e-3, u_x_cap=200.0)
    with pytest.raises(OutOfDomainError):
        exp_map(u, cfg)
