import math

import numpy as np
import pytest

from copolymer import entropy, registry
from copolymer.errors import DomainError

GRID = [(u, l) for u in (1.2, 1.5, 2.0, 3.0, 4.5, 7.0, 12.0) for l in (0.0, 0.1, 0.5, 1.0, 2.0, 3.5) if u > 1 + l]


def test_flat_speed_has_no_entropy():
    assert entropy.kappa(1.0, 0.0) == 0.0


def test_maximum_at_zero_slope():
    value, argmax = entropy.max_kappa_zero_slope()
    assert argmax == pytest.approx(2.0, abs=1e-9)
    assert value == pytest.approx(math.asinh(1.0), abs=1e-12)
    assert entropy.kappa(2.0, 0.0) == pytest.approx(0.881373587, abs=1e-9)


def test_symmetric_in_slope():
    assert entropy.kappa(3.0, -1.0) == entropy.kappa(3.0, 1.0)


def test_bounded_by_log3():
    for u, l in GRID:
        assert 0.0 <= entropy.kappa(u, l) <= entropy.LOG3


def test_below_boundary_rejected():
    with pytest.raises(DomainError):
        entropy.kappa(1.5, 1.0)
    # the boundary itself is allowed
    assert entropy.kappa(2.0, 1.0) == pytest.approx(math.log(2.0))


def test_vectorized_growth_matches_scalar():
    us = np.array([u for u, _ in GRID])
    ls = np.array([l for _, l in GRID])
    expected = [entropy.path_growth(u, l) for u, l in GRID]
    assert np.allclose(entropy.growth_array(us, ls), expected, rtol=1e-13, atol=1e-14)
    assert entropy.growth_array(1.0, 0.5) == -np.inf


def test_derivative_matches_finite_differences():
    h = 1e-5
    for l in (0.5, 1.0, 2.0):
        for v in np.linspace(1.3 + l, 9.0 + l, 7):
            central = (entropy.path_growth(v + h, l) - entropy.path_growth(v - h, l)) / (2 * h)
            assert entropy.kappa_derivative(v, l) == pytest.approx(central, rel=1e-6)


def test_derivative_closed_forms_agree():
    for u, l in GRID:
        assert entropy.kappa_derivative(u, l) == pytest.approx(entropy.growth_slope(u, l), rel=1e-7)
        if l > 0:
            assert entropy.kappa_G(u / l, 1 / l) == pytest.approx(entropy.kappa_derivative(u, l), rel=1e-10)


def test_kappa_g_domain():
    with pytest.raises(DomainError):
        entropy.kappa_G(2.0, 1.0)


def test_chi_inverse_round_trip():
    for l in (0.0, 0.5, 1.0, 2.0):
        for c in (0.01, 0.1, 0.5, 1.0, 3.0, 10.0):
            v = entropy.chi_inverse(c, l)
            assert v > 1.0 + l
            assert entropy.kappa_derivative(v, l) == pytest.approx(c, abs=1e-8)


def test_chi_inverse_is_decreasing():
    speeds = [entropy.chi_inverse(c, 1.0) for c in (0.05, 0.2, 0.8, 3.2)]
    assert speeds == sorted(speeds, reverse=True)
    with pytest.raises(DomainError):
        entropy.chi_inverse(0.0, 1.0)


def test_growth_is_strictly_concave():
    for l in (0.0, 0.5, 2.0):
        for a, b in ((1.1 + l, 1.9 + l), (2.0 + l, 6.0 + l), (1.0 + l, 3.0 + l)):
            mid = entropy.path_growth((a + b) / 2, l)
            chord = (entropy.path_growth(a, l) + entropy.path_growth(b, l)) / 2
            assert mid - chord > 1e-8


def test_tilts():
    x, y = entropy.kappa_tilts(2.0, 0.0)
    assert y == 1.0
    assert 0.0 < x < 1.0
    _, y_up = entropy.kappa_tilts(3.0, 1.0)
    _, y_down = entropy.kappa_tilts(3.0, -1.0)
    assert y_up > 1.0
    assert y_down == pytest.approx(1.0 / y_up)
    assert entropy.kappa_tilts(2.0, 1.0).y == math.inf


def test_finite_ladder_approaches_limit():
    for u, l in ((2.0, 0.0), (3.0, 1.0)):
        limit = entropy.kappa(u, l)
        values = [entropy.kappa_finite(L, u, l) for L in (8, 16, 32, 64)]
        assert all(v <= limit for v in values)
        assert values[1:] == sorted(values[1:])
        assert limit - values[-1] < 5e-2


def test_finite_off_lattice():
    with pytest.raises(DomainError):
        entropy.kappa_finite(8, 2.0, 0.0625)


def test_extrapolation():
    estimate, points = entropy.extrapolate_kappa(2.0, 0.0)
    assert sorted(points) == [8, 16, 32, 64]
    assert estimate == pytest.approx(entropy.kappa(2.0, 0.0), abs=1e-3)
    assert entropy.extrapolate_kappa(1.0, 0.0)[0] == 0.0


def test_restricted_entropy_matches_with_room():
    assert entropy.kappa_finite_restricted(8, 2.0, 0.0, 4.0) == entropy.kappa_finite(8, 2.0, 0.0)
    assert entropy.kappa_finite_restricted(8, 2.0, 0.0, 0.125) < entropy.kappa_finite(8, 2.0, 0.0)


def test_evaluator_is_shared_and_cached():
    registry.register_evaluator("coarse", ladder=(8, 16, 32))
    registry.register_evaluator("same", ladder=(8, 16, 32))
    evaluator = registry.get_evaluator("coarse")
    assert registry.get_evaluator("same") is evaluator
    assert evaluator.kappa(2.0, 0.0) == entropy.kappa(2.0, 0.0)
    assert evaluator.kappa_finite(8, 2, 0) == entropy.kappa_finite(8, 2, 0)
    evaluator.clear()
    assert evaluator.chi_inverse(1.0, 0.5) == entropy.chi_inverse(1.0, 0.5)
