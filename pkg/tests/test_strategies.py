import pytest

from copolymer.oracle import A
from copolymer.strategies import StrategySampler, measure_family_from_disorder
from copolymer.varform import SlopeMeasure, rho_hor

COLUMNS = 300


def test_all_a_family_avoids_b():
    family = measure_family_from_disorder(1.0, 1, 5, strategies=12, columns=COLUMNS)
    assert len(family) == 12
    assert all(rho.b_mass == 0 for rho in family)
    assert SlopeMeasure.delta_A(0.0) in family
    assert family[0] == rho_hor(1.0)


def test_all_b_family_has_no_a_and_no_interface():
    family = measure_family_from_disorder(0.0, 1, 5, strategies=6, columns=COLUMNS)
    assert len(family) == 6
    assert family[0] == rho_hor(0.0)
    for rho in family:
        assert rho.atomsA == ()
        assert rho.wI == 0.0
        assert rho.b_mass == pytest.approx(1.0)


def test_family_is_reproducible():
    first = measure_family_from_disorder(0.5, 1, 7, strategies=6, columns=COLUMNS)
    second = measure_family_from_disorder(0.5, 1, 7, strategies=6, columns=COLUMNS)
    assert first == second
    assert first[0] == rho_hor(0.5)
    for rho in first:
        assert rho.total == pytest.approx(1.0)


def test_walks_respect_vertical_cap():
    sampler = StrategySampler(0.5, 2, 3, columns=COLUMNS)
    for walk in sampler.walks(8):
        assert len(walk) == COLUMNS
        assert all(abs(b - a) <= 2 for a, b in zip(walk.rows, walk.rows[1:]))


def test_a_seeking_stays_in_a_when_possible():
    sampler = StrategySampler(1.0, 1, 3, columns=50)
    walk = sampler.a_seeking()
    assert sampler.avoids_b(walk)
    assert all(sampler.label(j, k) == A for j, k in enumerate(walk.rows))


def test_column_measure_is_normalized():
    sampler = StrategySampler(0.5, 1, 11, columns=COLUMNS)
    rho = sampler.column_measure(sampler.interface_hugging())
    assert sum(w for _, w in rho.atoms) == pytest.approx(1.0)
    assert rho.label.startswith("interface_hugging")
