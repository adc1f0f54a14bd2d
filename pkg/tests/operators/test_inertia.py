import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.errors import MuDPError
from src.grid.periodic import constant, from_fourier, mean, sup_diff
from src.operators.inertia import (
    apply_A,
    invert_A,
    invert_A_closed,
    invert_A_spectral,
)

coefficient = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False)


def random_trig(rng, n, degree):
    terms = [(0, rng.uniform(-1, 1), 0.0)]
    terms += [(k, *(rng.uniform(-1, 1, size=2) / k)) for k in range(1, degree + 1)]
    return from_fourier(n, terms)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def test_A_on_constants_and_modes():
    """A c = c and A cos 2 pi k x = (2 pi k)^2 cos 2 pi k x."""
    assert sup_diff(apply_A(constant(32, 0.7)), constant(32, 0.7)) <= 1e-15
    f = from_fourier(32, [(3, 1.0, 0.0)])
    assert sup_diff(apply_A(f), (6 * np.pi) ** 2 * f) <= 1e-9


def test_spectral_inverse_is_two_sided(rng):
    for _ in range(5):
        f = random_trig(rng, 64, 16)
        assert sup_diff(apply_A(invert_A_spectral(f)), f) <= 1e-11
        assert sup_diff(invert_A_spectral(apply_A(f)), f) <= 1e-11


@pytest.mark.parametrize("refinement", [2, 4])
def test_closed_form_matches_spectral(rng, refinement):
    """The explicit double/triple-integral inverse agrees with the Fourier one."""
    for _ in range(5):
        f = random_trig(rng, 64, 16)
        closed = invert_A_closed(f, refinement=refinement)
        assert sup_diff(closed, invert_A_spectral(f)) <= 1e-8


def test_closed_form_with_simpson(rng):
    f = random_trig(rng, 64, 2)
    closed = invert_A_closed(f, refinement=4, rule="simpson")
    assert sup_diff(closed, invert_A_spectral(f)) <= 1e-6


def test_closed_form_of_constant():
    """A^-1 fixes constants; the 13/12 and 1/2 weights must cancel exactly."""
    assert sup_diff(invert_A_closed(constant(16, 2.5)), constant(16, 2.5)) <= 1e-13


def test_closed_form_rejects_bad_arguments():
    with pytest.raises(MuDPError):
        invert_A_closed(constant(16, 1.0), rule="trapezoid")
    with pytest.raises(MuDPError):
        invert_A_closed(constant(16, 1.0), refinement=0)


def test_dispatch(rng):
    f = random_trig(rng, 32, 4)
    assert sup_diff(invert_A(f, "spectral"), invert_A_spectral(f)) == 0.0
    assert sup_diff(invert_A(f, "closed"), invert_A_closed(f)) == 0.0
    assert sup_diff(invert_A(f, lambda g: 2.0 * g), 2.0 * f) == 0.0
    with pytest.raises(MuDPError):
        invert_A(f, "multigrid")


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.tuples(coefficient, coefficient), min_size=1, max_size=8),
    coefficient,
)
def test_inverse_is_linear_and_mean_preserving(coeffs, scale):
    f = from_fourier(32, [(k, a, b) for k, (a, b) in enumerate(coeffs)])
    g = from_fourier(32, [(2, 0.3, 0.1)])
    lhs = invert_A_spectral(scale * f + g)
    rhs = scale * invert_A_spectral(f) + invert_A_spectral(g)
    assert sup_diff(lhs, rhs) <= 1e-12
    assert abs(mean(invert_A_spectral(f)) - mean(f)) <= 1e-12
