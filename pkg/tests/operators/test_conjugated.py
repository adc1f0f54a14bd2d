import logging

import numpy as np
import pytest

from src.errors import DiffeomorphismError, MuDPError
from src.grid.diffeo import DiffeoS1, compose, identity, invert_diffeo
from src.grid.periodic import derivative, from_fourier, mean, sup_diff
from src.operators.conjugated import (
    apply_P_conjugated,
    condition_estimate,
    conjugated_inertia_matrix,
    conjugated_mean,
    lagrangian_derivatives,
)
from src.operators.inertia import apply_A
from src.operators.rhs import apply_P


@pytest.fixture
def xi():
    return from_fourier(128, [(0, 0.2, 0.0), (1, 0.05, -0.03), (2, 0.0, 0.02)])


@pytest.fixture
def phi():
    return DiffeoS1(from_fourier(128, [(0, 0.1, 0.0), (1, 0.04, 0.02)]))


@pytest.mark.parametrize("strategy", ["compose", "recursion"])
def test_conjugation_by_identity_is_plain_P(xi, strategy):
    conjugated = apply_P_conjugated(xi, identity(128), strategy)
    assert sup_diff(conjugated, apply_P(xi)) <= 1e-10


def test_strategies_agree(xi, phi):
    """Composition with phi^-1 and the Lagrangian recursion give the same P_phi."""
    composed = apply_P_conjugated(xi, phi, "compose")
    recursed = apply_P_conjugated(xi, phi, "recursion")
    assert sup_diff(composed, recursed) <= 1e-7


def test_strategies_agree_on_random_pairs():
    rng = np.random.default_rng(3)
    for _ in range(4):
        a, b = rng.uniform(-0.05, 0.05, size=2)
        shift = rng.uniform(-0.5, 0.5)
        phi = DiffeoS1(from_fourier(128, [(0, shift, 0.0), (1, a, b)]))
        xi = from_fourier(128, [(0, 0.1, 0.0), (1, *rng.uniform(-0.1, 0.1, size=2))])
        assert phi.min_slope >= 0.5
        composed = apply_P_conjugated(xi, phi, "compose")
        assert sup_diff(composed, apply_P_conjugated(xi, phi, "recursion")) <= 1e-7


def test_lagrangian_derivatives_match_eulerian(xi, phi):
    """a_k should equal the k-th derivative of u = xi o phi^-1, composed with phi."""
    u = compose(xi, invert_diffeo(phi))
    a1, a2, a3 = lagrangian_derivatives(xi, phi, 3)
    for order, a in ((1, a1), (2, a2), (3, a3)):
        assert sup_diff(a, compose(derivative(u, order), phi)) <= 1e-8


def test_conjugated_mean_needs_no_inversion(xi, phi):
    u = compose(xi, invert_diffeo(phi))
    assert abs(conjugated_mean(xi, phi) - mean(u)) <= 1e-12


def test_recursion_depth_is_bounded(xi, phi):
    with pytest.raises(MuDPError):
        lagrangian_derivatives(xi, phi, 4)


def test_slope_floor(xi, phi):
    with pytest.raises(DiffeomorphismError):
        lagrangian_derivatives(xi, phi, 2, slope_floor=0.9)
    with pytest.raises(DiffeomorphismError):
        apply_P_conjugated(xi, phi, "compose", slope_floor=0.9)


def test_unknown_strategy(xi, phi):
    with pytest.raises(MuDPError):
        apply_P_conjugated(xi, phi, "shooting")


def test_inertia_matrix_at_identity_is_A():
    eta = from_fourier(32, [(0, 0.4, 0.0), (2, 0.1, 0.3)])
    matrix = conjugated_inertia_matrix(identity(32))
    assert np.allclose(matrix @ eta.values, apply_A(eta).values, atol=1e-10)


def test_condition_estimate_warns_when_ill_conditioned(phi, caplog, monkeypatch):
    assert np.isfinite(condition_estimate(phi))
    monkeypatch.setattr("src.operators.conjugated.CONDITION_WARNING", 1.0)
    with caplog.at_level(logging.WARNING):
        condition_estimate(phi)
    assert "ill-conditioned" in caplog.text


def test_recursion_solve_reports_conditioning(xi, phi, caplog, monkeypatch):
    monkeypatch.setattr("src.operators.conjugated.CONDITION_WARNING", 1.0)
    with caplog.at_level(logging.WARNING):
        apply_P_conjugated(xi, phi, "recursion")
    assert "ill-conditioned" in caplog.text


def test_compose_honours_the_inversion_tolerance(xi, phi):
    """A loose stopping tolerance ends the phi inversion early and shows up in P_phi."""
    tight = apply_P_conjugated(xi, phi, "compose")
    loose = apply_P_conjugated(xi, phi, "compose", tol=0.5)
    assert sup_diff(loose, tight) > 1e-10
    assert sup_diff(apply_P_conjugated(xi, phi, "compose", tol=1e-13), tight) <= 1e-12
