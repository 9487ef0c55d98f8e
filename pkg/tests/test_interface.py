import math
from fractions import Fraction

import numpy as np
import pytest

from copolymer import entropy, interface, registry
from copolymer.config import model_params
from copolymer.errors import DomainError, TableMissing, ValidationError
from copolymer.interface import InterfaceTable, build_interface_table, snap_mu


def test_entropic_table_is_exact(entropic_table):
    assert entropic_table.exact
    assert entropic_table.envelope is None
    assert entropic_table.min_slope == 0.0
    assert entropic_table.growth(3.0) == entropy.path_growth(3.0, 0.0)
    assert entropic_table.value(2.0) == pytest.approx(entropy.kappa(2.0, 0.0))
    assert entropic_table.value(1.0) == 0.0


def test_entropic_conjugate_closed_form(entropic_table):
    for c in (0.3, 1.0, 2.5):
        found = entropic_table.conjugate(c)
        assert found.v == entropy.chi_inverse(c, 0.0)
        assert found.value == pytest.approx(entropy.path_growth(found.v, 0.0) - c * (found.v - 1.0), abs=1e-10)
        assert not found.saturated


def test_snap_mu():
    assert snap_mu(2.05, 8) == Fraction(2)
    assert snap_mu(2.3, 8) == Fraction(9, 4)
    assert snap_mu(0.5, 8) == 1


def test_phi_finite_without_charges_is_entropy():
    params = model_params(alpha=0.0, beta=0.0)
    mean, stderr = interface.phi_finite(8, 2, 6, 3, params)
    assert mean == pytest.approx(entropy.kappa_finite(8, 2, 0), abs=1e-12)
    assert stderr == pytest.approx(0.0, abs=1e-12)


def test_phi_finite_below_zero_is_at_most_entropy():
    params = model_params(alpha=1.0, beta=-0.5)
    mean, stderr = interface.phi_finite(8, 2, 8, 3, params)
    assert mean <= entropy.kappa_finite(8, 2, 0) + 1e-12
    assert stderr >= 0.0
    with pytest.raises(DomainError):
        interface.phi_finite(8, 2, 1, 3, params)


def test_phi_at_flat_speed():
    assert interface.phi(1.0, model_params(2.0, 1.0)) == (0.0, 0.0, ())


def test_envelope_is_concave_and_covers_estimates(synthetic_table):
    report = synthetic_table.concavity_report()
    assert report["concave"]
    assert report["flagged"] == []
    for mu, estimate in zip(synthetic_table.grid, synthetic_table.estimates):
        assert synthetic_table.growth(mu) >= mu * estimate - 1e-12
        assert synthetic_table.growth(mu) >= entropy.path_growth(mu, 0.0) - 1e-12


def test_conjugate_maximizes_over_grid(synthetic_table):
    c = 0.5
    found = synthetic_table.conjugate(c)
    assert not found.saturated
    assert found.value == pytest.approx(synthetic_table.growth(found.v) - c * (found.v - 1.0))
    for mu in synthetic_table.grid:
        assert found.value >= synthetic_table.growth(mu) - c * (mu - 1.0) - 1e-12
    assert synthetic_table.v_I_of_c(c) == found.v


def test_small_slopes_saturate(synthetic_table):
    located = synthetic_table.locate(1e-9)
    assert located.saturated
    assert located.v > synthetic_table.mu_max
    with pytest.raises(DomainError):
        synthetic_table.conjugate(0.0)


def test_growth_domain(synthetic_table):
    with pytest.raises(DomainError):
        synthetic_table.growth(0.5)
    assert synthetic_table.growth_array(np.array([0.5]))[0] == -np.inf
    assert np.allclose(
        synthetic_table.growth_array(np.array([1.5, 2.5, 20.0])),
        [synthetic_table.growth(mu) for mu in (1.5, 2.5, 20.0)],
    )


def test_json_round_trip(synthetic_table):
    restored = InterfaceTable.from_json(synthetic_table.to_json())
    assert restored.params == synthetic_table.params
    assert np.array_equal(restored.estimates, synthetic_table.estimates)
    assert restored.growth(2.5) == synthetic_table.growth(2.5)


@pytest.mark.parametrize("text", ["not json", "[]", '{"version": 99}', '{"version": 1}'])
def test_from_json_rejects_bad_input(text):
    with pytest.raises(ValidationError):
        InterfaceTable.from_json(text)


def test_malformed_grid(params):
    with pytest.raises(ValidationError):
        InterfaceTable(params, [1.5, 2.0], [0.1, 0.2], [0.0, 0.0])
    with pytest.raises(ValidationError):
        InterfaceTable(params, [1.0], [0.0], [0.0])


def test_build_below_zero_is_entropic():
    table = build_interface_table(model_params(2.0, -1.0))
    assert table.exact


def test_build_small_table(params):
    table = build_interface_table(params, ladder=(4, 8), samples=4, seed=1, mu_max=2.0, mu_step=0.5)
    assert not table.exact
    assert table.grid.tolist() == [1.0, 1.5, 2.0]
    assert table.estimates[0] == 0.0
    for mu, estimate, error in zip(table.grid[1:], table.estimates[1:], table.errors[1:]):
        assert estimate >= entropy.kappa(mu, 0.0) - 1e-12
        assert math.isfinite(error) and error >= 0.0
    assert table.sizes[1] == (4, 8)


def test_registered_table_lookup(entropic_table):
    with pytest.raises(TableMissing):
        interface.v_I_of_c(1.0)
    registry.register_table(entropic_table)
    assert interface.v_I_of_c(1.0) == entropy.chi_inverse(1.0, 0.0)
