import logging

import pytest
from pydantic import ValidationError

from src.flows.config import SolverConfig
from src.grid.periodic import constant, sup_diff
from src.operators.inertia import invert_A_closed
from src.operators.rhs import RhsMode


def test_defaults_are_the_reference_configuration():
    cfg = SolverConfig()
    assert cfg.n == 256
    assert cfg.dt == 1e-3
    assert cfg.t_end == 1.0
    assert cfg.rhs_mode is RhsMode.MOMENTUM_FORM
    assert cfg.strategy == "compose"
    assert cfg.interpolant == "trig"
    assert cfg.monitor_every == 1


@pytest.mark.parametrize(
    "field, value",
    [
        ("dt", 0.0),
        ("dt", -1e-3),
        ("n", 33),
        ("n", 4),
        ("t_end", -1.0),
        ("strategy", "shooting"),
        ("monitor_every", 0),
        ("rhs_mode", "burgers"),
    ],
)
def test_invalid_fields_name_themselves(field, value):
    with pytest.raises(ValidationError) as exc:
        SolverConfig(**{field: value})
    assert field in str(exc.value)


def test_unknown_fields_are_rejected():
    with pytest.raises(ValidationError):
        SolverConfig(tolerance=1e-3)


def test_is_frozen():
    cfg = SolverConfig()
    with pytest.raises(ValidationError):
        cfg.dt = 0.5


def test_rhs_aliases():
    assert SolverConfig(rhs_mode="quasilinear").rhs_mode is RhsMode.QUASILINEAR


def test_step_count_covers_the_horizon():
    assert SolverConfig(dt=0.1, t_end=1.0).n_steps() == 10
    assert SolverConfig(dt=0.3, t_end=1.0).n_steps() == 4
    assert SolverConfig(t_end=0.0).n_steps() == 0


def test_step_size_warns_when_dt_does_not_divide(caplog):
    cfg = SolverConfig(dt=0.3, t_end=1.0)
    with caplog.at_level(logging.WARNING):
        assert cfg.step_size() == pytest.approx(0.25)
    assert "not a multiple" in caplog.text


def test_updated_validates():
    cfg = SolverConfig().updated(n=64, dt=0.01)
    assert (cfg.n, cfg.dt) == (64, 0.01)
    with pytest.raises(ValidationError):
        SolverConfig().updated(dt=0)


def test_inverse_operator():
    assert SolverConfig().inverse_operator() == "spectral"
    closed = SolverConfig(inverse="closed", quadrature_refinement=2).inverse_operator()
    f = constant(16, 1.5)
    assert sup_diff(closed(f), invert_A_closed(f, refinement=2)) == 0.0
