"""Numerical checks that the optimizers find the unique maximizers.

Uniqueness is tested as clustering: independent searches from random
starting points must land on the reported maximizer, and no random
perturbation of it may improve the objective beyond a tolerance.
"""
import logging
import math
from collections import namedtuple

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from copolymer import entropy
from copolymer.column import INT, geometry

logger = logging.getLogger(__name__)

MaximizerReport = namedtuple(
    "MaximizerReport", ["label", "value", "speeds", "min_margin", "worst_gap", "trials", "passed"]
)
ColumnReport = namedtuple(
    "ColumnReport", ["theta", "u", "value", "h", "a", "spread", "value_spread", "structural", "passed"]
)

_Z_MAX = 50.0
_H_FLOOR = 1e-12
_POLISH_GAIN = 1e-15


# -- slope measures --------------------------------------------------------


def _layout(rho):
    slots = [("A", l) for l, _ in rho.atomsA] + [("B", l) for l, _ in rho.atomsB]
    if rho.wI > 0:
        slots.append(("I", 0.0))
    return slots


def _profile(template, slots, speeds):
    vA, vB, vI = {}, {}, template.vI
    for (kind, l), speed in zip(slots, speeds):
        if kind == "A":
            vA[l] = speed
        elif kind == "B":
            vB[l] = speed
        else:
            vI = speed
    return type(template)(vA, vB, vI)


def _speeds_of(profile, slots):
    return np.array(
        [profile.vA[l] if k == "A" else profile.vB[l] if k == "B" else profile.vI for k, l in slots]
    )


def verify_inner_uniqueness(solver, rho, trials=100, seed=0, starts=8, margin_tol=1e-6, gap_tol=1e-3):
    """Perturb the fixed point and re-search from random profiles.

    ``min_margin`` is the smallest h(ρ̄) - ratio over ``trials`` random
    perturbations; ``worst_gap`` is the largest atomwise distance between
    v(h(ρ̄)) and the maximizers found from ``starts`` random profiles.
    """
    result = solver.free_energy_for_measure(rho)
    slots = _layout(rho)
    optimum = _speeds_of(result.speeds, slots)
    floors = np.array([1.0 + l for _, l in slots])
    rng = np.random.default_rng(seed)

    def ratio(speeds):
        return solver.slope_ratio(rho, _profile(result.speeds, slots, speeds))

    margins = []
    for _ in range(trials):
        speeds = optimum.copy()
        index = int(rng.integers(len(slots)))
        step = float(10.0 ** rng.uniform(-6, 0)) * (1 if rng.random() < 0.5 else -1)
        speeds[index] = max(floors[index], speeds[index] + step)
        margins.append(result.value - ratio(speeds))

    def loss(z):
        return -ratio(floors + np.exp(np.minimum(z, _Z_MAX)))

    gaps = []
    for _ in range(starts):
        start = rng.normal(0.0, 1.0, len(slots))
        found = minimize(
            loss, start, method="L-BFGS-B", options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000}
        )
        speeds = floors + np.exp(np.minimum(found.x, _Z_MAX))
        gaps.append(float(np.max(np.abs(speeds - optimum))))
    min_margin = float(min(margins)) if margins else math.inf
    worst_gap = float(max(gaps)) if gaps else 0.0
    passed = min_margin >= -margin_tol and worst_gap <= gap_tol
    if not passed:
        logger.error("inner maximizer of %r: margin %r, gap %r", rho.label, min_margin, worst_gap)
    return MaximizerReport(
        rho.label, result.value, result.speeds.to_dict(rho), min_margin, worst_gap, trials, passed
    )


# -- columns ---------------------------------------------------------------


class _ColumnProblem:
    """ψ(Θ, u) on its free coordinates (h_k, a_k) over the solvents with a
    positive distance; the interface takes the rest of both budgets."""

    def __init__(self, solver, theta, u):
        self.solver, self.theta, self.u = solver, theta, float(u)
        geo = geometry(theta)
        self.distances = (float(geo.lA), float(geo.lB))
        self.solvents = tuple(k for k, _, _ in solver.dual_solvents(geo))
        n = len(self.solvents)
        # rows g and offsets b of the constraints g·x + b ≥ 0
        rows, offsets = [], []
        for i, k in enumerate(self.solvents):
            h_row = np.zeros(2 * n)
            h_row[i] = 1.0
            rows.append(h_row)
            offsets.append(0.0)
            room = np.zeros(2 * n)
            room[i], room[n + i] = -1.0, 1.0
            rows.append(room)
            offsets.append(-self.distances[k])
        share = np.zeros(2 * n)
        share[:n] = -1.0
        rows.append(share)
        offsets.append(1.0)
        interface_room = np.zeros(2 * n)
        interface_room[:n], interface_room[n:] = 1.0, -1.0
        rows.append(interface_room)
        offsets.append(self.u - 1.0)
        self.G, self.b = np.array(rows), np.array(offsets)
        self.directions = self._directions(n)
        self.exact = solver.table.exact
        if not self.exact:
            # h·Φ(a/h) = min_j (s_j·a + c_j·h) for the concave envelope Φ
            nodes = solver.table.envelope
            self.line_slopes = np.diff(nodes[:, 1]) / np.diff(nodes[:, 0])
            self.line_offsets = nodes[:-1, 1] - self.line_slopes * nodes[:-1, 0]

    @staticmethod
    def _directions(n):
        eye = np.eye(2 * n)
        directions = list(eye)
        if n == 2:
            directions += [
                eye[0] - eye[1],
                eye[2] - eye[3],
                eye[0] + eye[2],
                eye[1] + eye[3],
                eye[0] - eye[1] + eye[2] - eye[3],
            ]
        else:
            directions.append(eye[0] + eye[1])
        return [d / np.linalg.norm(d) for d in directions]

    def unpack(self, x):
        n = len(self.solvents)
        h, a = [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]
        for i, k in enumerate(self.solvents):
            h[k], a[k] = float(x[i]), float(x[n + i])
        h[2] = 1.0 - sum(h[:2])
        a[2] = self.u - sum(a[:2])
        return h, a

    def pack(self, h, a):
        return np.array([h[k] for k in self.solvents] + [a[k] for k in self.solvents])

    def value(self, x):
        h, a = self.unpack(x)
        if np.any(self.G @ x + self.b < -1e-12):
            return -math.inf
        return self.solver.objective(self.theta, self.u, h, a)

    def loss(self, x):
        value = self.value(x)
        return -value if math.isfinite(value) else 1e10

    def random_start(self, rng):
        n = len(self.solvents)
        h = rng.dirichlet(np.ones(n + 1))
        slack = (self.u - 1.0 - sum(self.distances[k] for k in self.solvents)) * rng.dirichlet(np.ones(n + 1))
        a = [h[i] + self.distances[k] + slack[i] for i, k in enumerate(self.solvents)]
        return np.concatenate([h[:n], a])

    def _interval(self, x, d):
        lo, hi = -math.inf, math.inf
        slack = self.G @ x + self.b
        rate = self.G @ d
        for s, r in zip(slack, rate):
            if r > 0:
                lo = max(lo, -s / r)
            elif r < 0:
                hi = min(hi, -s / r)
        return lo, hi

    def ascend(self, x, cycles=200, tol=1e-14):
        best = self.value(x)
        for _ in range(cycles):
            start = best
            for d in self.directions:
                lo, hi = self._interval(x, d)
                if not hi > lo:
                    continue
                found = minimize_scalar(
                    lambda t: self.loss(x + t * d),
                    bounds=(lo, hi),
                    method="bounded",
                    options={"xatol": 1e-13},
                )
                if -found.fun > best:
                    x, best = x + found.x * d, -found.fun
            if best - start <= tol:
                break
        return x, best

    def repair(self, x):
        """Push x back onto the feasible set after round-off."""
        n = len(self.solvents)
        h = np.maximum(x[:n], _H_FLOOR)
        if h.sum() > 1.0:
            h = h / h.sum()
        floors = h + np.array([self.distances[k] for k in self.solvents])
        a = np.maximum(x[n:], floors)
        excess = float(np.sum(a - h)) - (self.u - 1.0)
        slack = a - floors
        if excess > 0 and slack.sum() > 0:
            a = a - excess * slack / slack.sum()
        return np.concatenate([h, a])

    def smooth_loss(self, z):
        """-u·ψ-objective and its gradient; the interface enters through
        the epigraph variable z[-1] unless the table is exact."""
        n = len(self.solvents)
        grad = np.zeros(len(z))
        total = 0.0
        for i, k in enumerate(self.solvents):
            value, d_h, d_a = entropy.perspective(max(z[i], _H_FLOOR), z[n + i], self.distances[k])
            shift = self.solver.shift[k]
            total += value + shift * z[n + i]
            grad[i] -= d_h
            grad[n + i] -= d_a + shift
        if self.exact:
            h_i = max(1.0 - float(np.sum(z[:n])), _H_FLOOR)
            value, d_h, d_a = entropy.perspective(h_i, self.u - float(np.sum(z[n : 2 * n])), 0.0)
            total += value
            grad[:n] += d_h
            grad[n : 2 * n] += d_a
        else:
            total += z[-1]
            grad[-1] = -1.0
        return -total, grad

    def _constraints(self, width):
        n = len(self.solvents)
        G = np.zeros((len(self.G), width))
        G[:, : 2 * n] = self.G
        constraints = [{"type": "ineq", "fun": lambda z: G @ z + self.b, "jac": lambda z: G}]
        if not self.exact:
            lines = np.zeros((len(self.line_slopes), width))
            lines[:, :n] = -self.line_offsets[:, None]
            lines[:, n : 2 * n] = -self.line_slopes[:, None]
            lines[:, -1] = -1.0
            base = self.line_slopes * self.u + self.line_offsets
            constraints.append({"type": "ineq", "fun": lambda z: lines @ z + base, "jac": lambda z: lines})
        return constraints

    def _interface_bound(self, x):
        n = len(self.solvents)
        h_i, a_i = 1.0 - float(np.sum(x[:n])), self.u - float(np.sum(x[n:]))
        return float(np.min(self.line_slopes * a_i + self.line_offsets * h_i))

    def polish(self, x, rounds=4):
        """SLSQP on the smooth reformulation, restarted until it stalls."""
        width = len(x) + (0 if self.exact else 1)
        constraints = self._constraints(width)
        best = self.value(x)
        for _ in range(rounds):
            z = x if self.exact else np.append(x, self._interface_bound(x))
            found = minimize(
                self.smooth_loss,
                z,
                jac=True,
                method="SLSQP",
                constraints=constraints,
                options={"ftol": 1e-16, "maxiter": 1000},
            )
            candidate = self.repair(found.x[: len(x)])
            value = self.value(candidate)
            if not value > best:
                break
            gain, x, best = value - best, candidate, value
            if gain <= _POLISH_GAIN:
                break
        return x


def structural_conditions(theta, u, h, a, tol=1e-9):
    """Feasibility and the zero-pair conditions of a column maximizer."""
    geo = geometry(theta)
    distances = (float(geo.lA), float(geo.lB))
    ok = abs(sum(h) - 1.0) <= tol and abs(sum(a) - float(u)) <= tol * max(1.0, float(u))
    for k in (0, 1):
        if a[k] > tol and h[k] <= 0:
            ok = False
        if h[k] > 0 and a[k] < h[k] + distances[k] - tol:
            ok = False
        dual = geo.nint_class == INT or geo.nint_class.endswith(",2)")
        if dual and distances[k] == 0 and (h[k] != 0 or a[k] != 0):
            ok = False
    if a[2] < h[2] - tol:
        ok = False
    return ok


def verify_column_uniqueness(solver, theta, u, starts=9, seed=0, tol=1e-5, value_tol=None):
    """Re-solve ψ(Θ, u) from random starts and compare with the dual solution.

    Each start is improved by coordinate ascent, then polished by SLSQP on
    the smooth epigraph form of the objective. ``spread`` is the largest
    coordinate distance of a found maximizer from the solver's, and
    ``value_spread`` the largest gap |ψ - found value|; ``value_tol``
    defaults to the solver's own tolerance.
    """
    value_tol = solver.tol if value_tol is None else float(value_tol)
    solved = solver.psi(theta, u)
    structural = structural_conditions(theta, u, solved.h, solved.a)
    geo = geometry(theta)
    problem = None if geo.nint_class.endswith(",1)") else _ColumnProblem(solver, theta, u)
    if problem is None or not problem.solvents:
        return ColumnReport(theta, u, solved.value, solved.h, solved.a, 0.0, 0.0, structural, structural)
    reference = problem.pack(solved.h, solved.a)
    rng = np.random.default_rng(seed)
    spread = value_spread = 0.0
    for _ in range(starts):
        x, _ = problem.ascend(problem.random_start(rng))
        x = problem.polish(x)
        spread = max(spread, float(np.max(np.abs(x - reference))))
        value_spread = max(value_spread, abs(solved.value - problem.value(x)))
    passed = structural and spread <= tol and value_spread <= value_tol
    if not passed:
        logger.error(
            "column maximizer of %r at u=%r: spread %r, value gap %r", theta, u, spread, value_spread
        )
    return ColumnReport(theta, u, solved.value, solved.h, solved.a, spread, value_spread, structural, passed)


def attainment_report(optimum):
    """Argmax of a family optimum and its margin over the runner-up."""
    return {
        "argmax": optimum.label,
        "index": optimum.index,
        "value": optimum.value,
        "margin": optimum.value - optimum.runner_up if math.isfinite(optimum.runner_up) else math.inf,
    }
