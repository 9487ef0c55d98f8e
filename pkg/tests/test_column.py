from fractions import Fraction

import pytest

from copolymer import entropy, oracle
from copolymer.column import (
    INT,
    ColumnMenu,
    ColumnSolver,
    ColumnType,
    classify_column,
    geometry,
    grid_search_psi,
    psi_bounds,
)
from copolymer.errors import DomainError, MalformedWindow
from copolymer.varform import interface_column, single_column

CROSSING = ColumnType("AAABB", 1, "1/2", "1/2")


def test_crossing_geometry():
    geo = geometry(CROSSING)
    assert geo.interfaces == (1,)
    assert geo.k == 1
    assert geo.t == 2
    assert (geo.lA, geo.lB) == (Fraction(1, 2), Fraction(1, 2))
    assert geo.nint_class == INT


def test_interface_column_geometry():
    geo = geometry(interface_column())
    assert geo.k == 0
    assert geo.t == 1
    assert geo.lA == geo.lB == 0
    assert geo.nint_class == "nint(A,2)"


def test_single_column_geometry():
    theta = single_column("B", "1/2")
    geo = geometry(theta)
    assert geo.nint_class == "nint(B,1)"
    assert geo.lB == Fraction(1, 2)
    assert geo.t == Fraction(3, 2)
    assert classify_column(single_column("A", 2)) == "nint(A,1)"


def test_x2_route_through_the_nearest_interface():
    # from mid-row 0 up to the interface at height 1 and back down
    theta = ColumnType("AAABB", 0, "1/2", "1/2", 2)
    assert geometry(theta).t == 2


@pytest.mark.parametrize(
    "args",
    [
        ("AAAA", 0, "1/2", "1/2"),
        ("AAC", 0, "1/2", "1/2"),
        ("AAAAA", 0, 0, "1/2"),
        ("AAAAA", 0, "1/2", "1/2", 3),
    ],
)
def test_malformed_types(args):
    with pytest.raises(MalformedWindow):
        ColumnType(*args)


@pytest.mark.parametrize(
    "theta",
    [
        ColumnType("AAAAA", 2, "1/2", "1/2"),
        ColumnType("AAAAA", 0, "1/2", "1/2", 2),
        ColumnType("AAABB", 1, "1/2", "1/2", 2),
        ColumnType("AAABB", 0, 1, "1/2", 1),
    ],
)
def test_malformed_geometry(theta):
    with pytest.raises(MalformedWindow):
        geometry(theta)


def test_window_labels():
    assert CROSSING.window == "AAABB"
    assert CROSSING.radius == 2
    with pytest.raises(MalformedWindow):
        CROSSING.label(3)


def test_single_solvent_psi(params, entropic_table):
    solver = ColumnSolver(params, entropic_table)
    theta = single_column("B", "1/2")
    result = solver.psi(theta, 3.0)
    assert result.value == pytest.approx(entropy.kappa(3.0, 0.5) + params.half_gap)
    assert result.h == (0.0, 1.0, 0.0)
    assert solver.value(single_column("A", 0), 2.0) == entropy.kappa(2.0, 0.0)


def test_psi_below_t_rejected(params, entropic_table):
    solver = ColumnSolver(params, entropic_table)
    with pytest.raises(DomainError):
        solver.psi(CROSSING, 1.5)


def test_interface_column_psi_is_table_value(params, synthetic_table):
    solver = ColumnSolver(params, synthetic_table)
    assert solver.value(interface_column(), 2.5) == pytest.approx(synthetic_table.value(2.5))


@pytest.mark.parametrize("u", [2.5, 4.0])
def test_dual_beats_grid_search(params, entropic_table, u):
    solver = ColumnSolver(params, entropic_table)
    result = solver.psi(CROSSING, u)
    assert sum(result.h) == pytest.approx(1.0)
    assert sum(result.a) == pytest.approx(u)
    assert result.value >= grid_search_psi(solver, CROSSING, u, points=20).value - 1e-9
    assert solver.objective(CROSSING, u, result.h, result.a) == pytest.approx(result.value)


def test_psi_bounds(params, entropic_table):
    solver = ColumnSolver(params, entropic_table)
    report = psi_bounds(solver, single_column("A", "1/2"), u_values=(None, 3.0))
    assert report["uniform_ok"]
    assert report["decay_ok"]
    assert report["decay_value"] < 0.15


def test_locate_u_inverts_the_slope(params, entropic_table):
    solver = ColumnSolver(params, entropic_table)
    theta = single_column("A", "1/2")
    located = solver.locate_u(theta, 0.4)
    assert not located.saturated
    assert located.u == entropy.chi_inverse(0.4, 0.5)
    assert solver.slope(theta, located.u) == pytest.approx(0.4)


def test_locate_u_caps_speed(params, entropic_table):
    solver = ColumnSolver(params, entropic_table, u_cap=4.0)
    located = solver.locate_u(single_column("A", 0), 0.01)
    assert located == (4.0, True)
    with pytest.raises(DomainError):
        solver.locate_u(CROSSING, 0.0)


def test_menu():
    menu = ColumnMenu([CROSSING, interface_column(), CROSSING])
    assert len(menu) == 2
    assert CROSSING in menu
    assert menu.by_class(INT) == [CROSSING]
    assert list(ColumnMenu.from_json(menu.to_json())) == list(menu)


FLAT_A = ColumnType("AAA", 0, 1, 1)
FLAT_B = ColumnType("BBB", 0, 1, 1)
FLAT_ON_INTERFACE = ColumnType("AAABB", 0, 1, 1, x=2)


@pytest.mark.parametrize("L", [2, 3])
@pytest.mark.parametrize("theta", [FLAT_A, FLAT_ON_INTERFACE])
def test_flat_columns_match_the_lattice(params, entropic_table, theta, L):
    solver = ColumnSolver(params, entropic_table)
    mean, stderr = oracle.column_free_energy_finite(theta, 1, L, 8, 0, params)
    assert solver.value(theta, 1.0) == 0.0
    assert mean == pytest.approx(0.0, abs=1e-12)
    assert stderr <= 1e-12


@pytest.mark.parametrize("L", [2, 3])
def test_flat_b_column_matches_the_lattice(params, entropic_table, L):
    solver = ColumnSolver(params, entropic_table)
    mean, stderr = oracle.column_free_energy_finite(FLAT_B, 1, L, 64, 0, params)
    assert solver.value(FLAT_B, 1.0) == params.half_gap
    assert stderr > 0
    assert abs(mean - params.half_gap) <= 4 * stderr


@pytest.mark.parametrize("L, u", [(2, 2), (2, 3), (3, Fraction(5, 3)), (3, Fraction(7, 3))])
def test_lattice_column_entropy_stays_below_psi(params, entropic_table, L, u):
    # finite windows lose entropy, so only the one-sided bound holds at small L
    solver = ColumnSolver(params, entropic_table)
    mean, stderr = oracle.column_free_energy_finite(FLAT_A, u, L, 4, 0, params)
    assert stderr == 0.0
    assert 0.0 < mean <= solver.value(FLAT_A, float(u)) + 1e-12


def test_solver_tolerance(params, entropic_table):
    assert ColumnSolver(params, entropic_table).tol == 1e-8
    solver = ColumnSolver(params, entropic_table, tol=1e-6)
    result = solver.psi(CROSSING, 3.0)
    assert abs(sum(result.h) - 1.0) <= solver.tol
    assert abs(sum(result.a) - 3.0) <= solver.tol * 3.0
