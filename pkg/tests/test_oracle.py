import math
from fractions import Fraction

import numpy as np
import pytest

from copolymer import oracle
from copolymer.column import ColumnType
from copolymer.config import model_params
from copolymer.errors import BudgetExceeded, DisorderTooShort, DomainError


def lattice(L, budget):
    for n in range(L, budget + 1):
        vertical = n - L
        for d in range(-vertical, vertical + 1, 2):
            yield Fraction(n, L), Fraction(d, L)


def test_lattice_sizes():
    assert oracle.lattice_sizes(2, "5/2", "1/2") == (5, 3, 1)
    with pytest.raises(DomainError):
        oracle.lattice_sizes(2, 2.0, 0.5)
    with pytest.raises(DomainError):
        oracle.lattice_sizes(2, 1.5, 0.0)


def test_directed_path_rejects_reversal():
    with pytest.raises(DomainError):
        oracle.DirectedPath.from_word("ENS")
    path = oracle.DirectedPath.from_word("ENNE")
    assert path.vertices()[-1] == (2, 3)
    assert len(path.bonds()) == 4


def test_enumerate_paths_count():
    # words over {E, N, S} without N/S reversals: a_n = 2a_{n-1} + a_{n-2}
    counts = [sum(1 for _ in oracle.enumerate_paths(n)) for n in range(1, 7)]
    assert counts == [3, 7, 17, 41, 99, 239]


def test_stretch_form_matches_enumeration():
    for L in range(1, 5):
        for u, l in lattice(L, 16):
            assert oracle.enumerate_column_paths(L, u, l, budget=16) == oracle.count_paths_stretch_form(L, u, l)


@pytest.mark.slow
def test_stretch_form_matches_enumeration_full_budget():
    for L in range(1, 5):
        for u, l in lattice(L, 24):
            assert oracle.enumerate_column_paths(L, u, l) == oracle.count_paths_stretch_form(L, u, l)


def test_flat_path_is_unique():
    assert oracle.count_paths_stretch_form(3, 1, 0) == 1
    # one vertical step up at any of the L + 1 columns of sites
    assert oracle.count_paths_stretch_form(3, Fraction(4, 3), Fraction(1, 3)) == 4


def test_budget_enforced():
    with pytest.raises(BudgetExceeded):
        oracle.enumerate_column_paths(4, 7, 0, budget=24)


def test_restricted_counts_grow_to_full():
    full = oracle.count_paths_stretch_form(4, 3, 0)
    counts = [oracle.count_paths_restricted(4, 3, 0, cap) for cap in (0, 0.5, 1, 2)]
    assert counts == sorted(counts)
    assert counts[-1] == full
    assert counts[0] < full


def test_meso_field_is_order_independent():
    first = oracle.MesoField(3, 0.5, radius=4)
    second = oracle.MesoField(3, 0.5, radius=4)
    late = second.column(7).copy()
    assert np.array_equal(first.column(7), late)
    assert first.window(2, 0, 1) == tuple(first.label(2, k) for k in (-1, 0, 1))
    with pytest.raises(DisorderTooShort):
        first.label(0, 5)


def test_meso_field_density():
    field = oracle.MesoField(1, 1.0, radius=3)
    assert all(field.label(j, k) == oracle.A for j in range(5) for k in range(-3, 4))


def test_disorder_reproducible():
    a = oracle.DisorderPair.generate(11, 20, 0.5)
    b = oracle.DisorderPair.generate(11, 20, 0.5)
    assert np.array_equal(a.omega, b.omega)
    assert not np.array_equal(oracle.draw_omega(11, 20), oracle.draw_omega(11, 20, stream=1))


def test_partition_dp_matches_brute_force():
    params = model_params(alpha=1.5, beta=0.5, p=0.5, M=1)
    dis = oracle.DisorderPair.generate(4, 10, 0.5, radius=16)
    for L_n in (1, 2, 3):
        for n in range(1, 8):
            dp = oracle.finite_free_energy(n, L_n, dis, params)
            brute = oracle.brute_force_free_energy(n, L_n, dis, params)
            assert dp == pytest.approx(brute, abs=1e-12)


def test_partition_all_a_is_entropy():
    params = model_params(alpha=2.0, beta=1.0, p=1.0)
    dis = oracle.DisorderPair.from_labels("AB" * 4, oracle.FixedMeso())
    admissible = sum(1 for path in oracle.enumerate_paths(6) if oracle.is_admissible(path, 2, params.M))
    assert oracle.finite_free_energy(6, 2, dis, params) == pytest.approx(math.log(admissible) / 6)


def test_hamiltonian_charges_b_bonds():
    params = model_params(alpha=2.0, beta=1.0)
    meso = oracle.FixedMeso(default=oracle.B)
    dis = oracle.DisorderPair.from_labels("ABA", meso)
    path = oracle.DirectedPath.from_word("EEE")
    assert oracle.hamiltonian(path, dis, params, 2) == pytest.approx(-2.0 + 1.0 - 2.0)


def test_column_partition_counts_paths_without_charges():
    theta = ColumnType("AAAAA", 0, "1/2", "1/2")
    charges = np.zeros((6, 1))
    logz = oracle.column_log_partition(theta, 3, 2, charges)
    # 6 steps from height 1 to 1 across width 2, all inside the window
    assert math.exp(logz[0]) == pytest.approx(oracle.count_paths_stretch_form(2, 3, 0))


def test_column_free_energy_finite_has_error_bar():
    params = model_params(alpha=1.0, beta=0.0)
    theta = ColumnType("AAABB", 1, "1/2", "1/2")
    mean, stderr = oracle.column_free_energy_finite(theta, 2, 2, 16, 0, params)
    assert math.isfinite(mean)
    assert stderr >= 0.0
