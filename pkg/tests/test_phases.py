import math

import pytest

from copolymer import entropy, interface, phases
from copolymer.config import load_config
from copolymer.errors import (
    EmptySaturatedFamily,
    NoCrossing,
    NonPositive,
    StatisticallyUndecided,
    TableSaturation,
)
from copolymer.varform import SlopeMeasure, rho_hor


def test_delocalized_free_energy_depends_on_gap_only(a_only_family):
    solver = phases.delocalized_solver(1.5)
    assert solver.shift == pytest.approx(-0.75)
    assert solver.table.exact
    assert phases.f_delocalized(a_only_family, 1.5) == phases.f_delocalized(a_only_family, 3.5 - 2.0)


def test_full_dominates_delocalized(a_only_family, entropic_table):
    report = phases.bounds_report(2.0, 1.0, a_only_family, table=entropic_table)
    assert report["entropic_lower_bound"]
    assert report["uniform_upper_bound"]
    assert report["gap_only"]


def test_no_localization_below_zero(a_only_family):
    for beta in (-1.0, 0.0):
        point = phases.classify(2.0, beta, 0.5, a_only_family)
        assert point.phase in ("D1", "D2", "boundary")
        assert point.regime == "subcritical"
        assert "lower-bound" in point.flags
        assert point.K == 3


def test_phase_point_csv_row(a_only_family):
    point = phases.classify(1.0, -0.5, 0.8, a_only_family)
    row = point.csv_row()
    assert len(row) == len(phases.PhasePoint.CSV_COLUMNS)
    assert row[-1] == "lower-bound"
    assert point.regime == "supercritical"


def test_saturated_family(a_only_family):
    assert [rho.label for rho in phases.saturated_family(a_only_family)] == ["a-steep", "a-one"]
    with pytest.raises(EmptySaturatedFamily):
        phases.saturated_family([rho_hor(0.5)])
    assert phases.saturated_family([rho_hor(0.5)], subcritical=True)[0].label == "hor"
    subcritical = phases.saturated_family(a_only_family, subcritical=True)
    assert [rho.label for rho in subcritical] == ["a-steep", "a-one"]


def test_alpha_star_brackets_the_crossing(a_only_family):
    found = phases.alpha_star(a_only_family, alpha_max=20.0, tol=1e-3)
    assert not found.boundary
    lo, hi = found.bracket
    assert 0.0 < found.value < 20.0
    assert hi - lo <= 1e-3
    saturated = phases.f_saturated(a_only_family)
    assert phases.f_delocalized(a_only_family, hi) <= saturated + 1e-12


def test_alpha_star_without_crossing(a_only_family):
    with pytest.raises(NoCrossing) as excinfo:
        phases.alpha_star(a_only_family, alpha_max=0.01)
    assert excinfo.value.bracket == (0.0, 0.01)


def test_alpha_star_on_the_boundary(a_only_family):
    family = [SlopeMeasure.delta_A(), a_only_family[1]]
    found = phases.alpha_star(family)
    assert found.boundary
    assert found.value == 0.0


def test_family_optimum_needs_a_positive_member():
    family = [rho_hor(0.5), rho_hor(0.3)]
    with pytest.raises(NonPositive):
        phases.family_optimum(family, [-math.inf, -math.inf], False)
    best = phases.family_optimum(family, [0.2, 0.4], False)
    assert (best.index, best.runner_up) == (1, 0.2)


def test_saturation_diagnostic(a_only_family):
    report = phases.hypothesis2_diagnostic(a_only_family, l_max=10.0, points=41, alpha=1.0)
    assert report["g0_positive"]
    assert report["sign_change"] is not None
    assert report["maximizer"] in ("a-steep", "a-one")
    assert report["b_charging_ratio"] is not None
    assert "maximizer_interface_mass" in report
    with pytest.raises(EmptySaturatedFamily):
        phases.hypothesis2_diagnostic([rho_hor(0.5)])


def test_scan_grid_keeps_the_cone():
    config = load_config(
        overrides={
            "scan_alpha_min": 0.0,
            "scan_alpha_max": 2.0,
            "scan_alpha_steps": 3,
            "scan_beta_min": -2.0,
            "scan_beta_max": 2.0,
            "scan_beta_steps": 5,
        }
    )
    points = phases.scan_grid(config)
    assert len(points) == 9
    assert all(a >= abs(b) for a, b in points)


def test_scan_below_zero(a_only_family):
    config = load_config(
        overrides={
            "p": 0.5,
            "scan_alpha_min": 1.0,
            "scan_alpha_max": 2.0,
            "scan_alpha_steps": 2,
            "scan_beta_min": -1.0,
            "scan_beta_max": 0.0,
            "scan_beta_steps": 2,
        }
    )
    points = phases.scan_phase_diagram(config, a_only_family)
    assert len(points) == 4
    assert all(not point.phase.startswith("L") for point in points)


def fake_phi(crossing, error=0.0, weak=None):
    """φ_I with an excess max(β - crossing(α), 0) over the entropic floor;
    ``weak`` is the excess reported below the crossing."""
    calls = []

    def phi(mu, params, ladder, samples, seed):
        alpha, beta = params.alpha - params.beta, params.beta
        calls.append((beta, tuple(ladder)))
        threshold = crossing(alpha)
        if threshold is None:
            excess = 0.0
        elif beta > threshold:
            excess = beta - threshold if weak is None else 10 * error
        else:
            excess = 0.0 if weak is None else weak
        return interface.PhiEstimate(entropy.kappa(mu, 0.0) + excess, error, tuple(ladder))

    phi.calls = calls
    return phi


def test_beta_c_bisects_the_extrapolated_excess(monkeypatch, a_only_family):
    phi = fake_phi(lambda alpha: 0.5 + 0.5 * alpha)
    monkeypatch.setattr(interface, "phi", phi)
    found = phases.beta_c(1.0, a_only_family, samples=8, ladder=[4, 8], tol=0.01)
    assert found.decided
    assert found.ladder == (4, 8)
    lo, hi = found.interval
    assert lo <= 1.0 <= hi
    assert hi - lo <= 0.01
    assert found.value == pytest.approx(1.0, abs=0.01)
    assert found.vbar == entropy.chi_inverse(phases.f_delocalized(a_only_family, 1.0), 0.0)
    assert {ladder for _, ladder in phi.calls} == {(4, 8)}
    assert phi.calls[0][0] == 7.0


def test_beta_c_without_localization(monkeypatch, a_only_family):
    monkeypatch.setattr(interface, "phi", fake_phi(lambda alpha: None))
    with pytest.raises(NoCrossing) as raised:
        phases.beta_c(1.0, a_only_family, ladder=[4], beta_max=3.0)
    assert raised.value.bracket == (0.0, 3.0)


def test_beta_c_undecided(monkeypatch, a_only_family):
    # below β = 1 the excess sits between one and two error bars
    monkeypatch.setattr(interface, "phi", fake_phi(lambda alpha: 1.0, error=0.1, weak=0.15))
    with pytest.raises(StatisticallyUndecided) as raised:
        phases.beta_c(1.0, a_only_family, ladder=[4])
    assert raised.value.interval == (0.0, 1.75)
    found = phases.beta_c(1.0, a_only_family, ladder=[4], max_width=2.0)
    assert not found.decided
    assert found.interval == (0.0, 1.75)


def test_beta_c_beyond_the_table(a_only_family):
    with pytest.raises(TableSaturation):
        phases.beta_c(1.0, a_only_family, mu_max=1.0)


def test_critical_curve(monkeypatch, a_only_family):
    crossings = {1.0: 1.0, 2.0: 1.5, 3.0: None}
    monkeypatch.setattr(interface, "phi", fake_phi(lambda alpha: crossings[round(alpha, 6)]))
    rows, monotone = phases.critical_curve([1.0, 2.0, 3.0], a_only_family, ladder=[4, 8], tol=0.01)
    assert monotone
    assert [row[0] for row in rows] == [1.0, 2.0, 3.0]
    assert rows[0][1] == pytest.approx(1.0, abs=0.01)
    assert rows[1][1] == pytest.approx(1.5, abs=0.01)
    assert all(row[4] for row in rows[:2])
    assert math.isnan(rows[2][1]) and not rows[2][4]


@pytest.mark.slow
def test_beta_c_on_small_lattices(a_only_family):
    try:
        found = phases.beta_c(1.0, a_only_family, samples=8, ladder=[4, 8], tol=0.25, max_width=7.0)
    except NoCrossing as exc:
        assert exc.bracket == (0.0, 7.0)
    else:
        lo, hi = found.interval
        assert 0.0 <= lo <= found.value <= hi <= 7.0
        assert found.ladder == (4, 8)


def test_localized_phases(a_only_family, localizing_table):
    point = phases.classify(2.0, 1.0, 0.5, a_only_family, table=localizing_table)
    assert point.phase == "L1"
    assert point.f - point.fD > 2 * point.margin
    assert point.f - point.fL2 > 2 * point.margin

    # the best member charges no B, so it survives in the saturated subfamily
    family = [
        SlopeMeasure([(0.0, 0.5)], wI=0.5, label="a-interface"),
        SlopeMeasure([(1.0, 1.0)], label="a-one"),
    ]
    point = phases.classify(2.0, 1.0, 0.5, family, table=localizing_table)
    assert point.phase == "L2"
    assert point.f == point.fL2
