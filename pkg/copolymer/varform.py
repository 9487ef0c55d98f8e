"""The slope-based and column-based variational formulas.

A :class:`SlopeMeasure` says which fraction of the horizontal steps is
spent at each slope in A, at each slope in B, and along interfaces; a
:class:`SpeedProfile` says how many steps per horizontal step are spent
there. The free energy of a measure is the supremum over profiles of the
ratio N/D of energy-plus-entropy to steps. For a fixed measure this is a
fractional program whose parametric subproblem has a closed-form maximizer
v(c), so Dinkelbach's iteration c ← N(v(c))/D(v(c)) solves it.

The column-based formula works the same way over column types Θ and
per-column times u_Θ, with ψ(Θ, u) in place of the entropy terms.
"""
import logging
import math
from collections import namedtuple

from scipy.optimize import brentq

from copolymer import entropy, oracle
from copolymer.column import INT, ColumnMenu, ColumnSolver, ColumnType, geometry
from copolymer.errors import (
    ConstraintViolation,
    DomainError,
    MenuMismatch,
    NoConvergence,
    NonPositive,
    ValidationError,
)

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9
DEFAULT_MAX_ITER = 200
# coarse sweep of step multipliers used to find a positive starting ratio
START_SLOPES = (0.02, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2)
_WEIGHT_TOLERANCE = 1e-12
_MATCH_TOLERANCE = 1e-12

FreeEnergy = namedtuple("FreeEnergy", ["value", "speeds", "iterations", "trace", "saturated"])


class SlopeMeasure:
    """ρ̄ = (ρ̄_A, ρ̄_B, ρ̄_I): finitely many A- and B-atoms (slope, weight)
    and an interface mass."""

    def __init__(self, atomsA=(), atomsB=(), wI=0.0, label=""):
        self.atomsA = tuple((float(l), float(w)) for l, w in atomsA)
        self.atomsB = tuple((float(l), float(w)) for l, w in atomsB)
        self.wI = float(wI)
        self.label = label
        self.validate()

    @classmethod
    def normalized(cls, atomsA=(), atomsB=(), wI=0.0, label=""):
        """Build from unnormalized weights."""
        atomsA, atomsB = list(atomsA), list(atomsB)
        total = sum(w for _, w in atomsA) + sum(w for _, w in atomsB) + float(wI)
        if not total > 0:
            raise ValidationError("a slope measure needs positive total weight")
        return cls(
            [(l, w / total) for l, w in atomsA],
            [(l, w / total) for l, w in atomsB],
            float(wI) / total,
            label=label,
        )

    @classmethod
    def delta_A(cls, l=0.0):
        return cls([(l, 1.0)], label=f"delta_A({l})")

    def validate(self):
        errors = {}
        for name, atoms in (("atomsA", self.atomsA), ("atomsB", self.atomsB)):
            for l, w in atoms:
                if not (math.isfinite(l) and l >= 0):
                    errors[name] = ValidationError(f"slope {l} must be finite and non-negative")
                if not w > 0:
                    errors[name] = ValidationError(f"weight {w} must be positive")
        if self.wI < 0:
            errors["wI"] = ValidationError("interface weight must be non-negative")
        if abs(self.total - 1.0) > _WEIGHT_TOLERANCE:
            errors["total"] = ValidationError(f"weights sum to {self.total}, not 1")
        if errors:
            raise ValidationError("Malformed slope measure ", errors=errors)
        return self

    @property
    def total(self):
        return sum(w for _, w in self.atomsA) + sum(w for _, w in self.atomsB) + self.wI

    @property
    def b_mass(self):
        return sum(w for _, w in self.atomsB)

    def delocalized(self):
        """ρ̄_A + ρ̄_I·δ₀ with no interface mass."""
        atoms = list(self.atomsA)
        if self.wI > 0:
            atoms.append((0.0, self.wI))
        return SlopeMeasure(atoms, self.atomsB, 0.0, label=self.label)

    def to_dict(self):
        return {
            "label": self.label,
            "atomsA": [list(a) for a in self.atomsA],
            "atomsB": [list(a) for a in self.atomsB],
            "wI": self.wI,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data["atomsA"], data["atomsB"], data["wI"], label=data.get("label", ""))

    def __eq__(self, other):
        return isinstance(other, SlopeMeasure) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.atomsA, self.atomsB, self.wI))

    def __repr__(self):
        return f"SlopeMeasure(A={self.atomsA}, B={self.atomsB}, I={self.wI}, label={self.label!r})"


def rho_hor(p):
    """p²δ_{A,0} + (1-p)²δ_{B,0} + 2p(1-p)δ_I: travel straight through A-A,
    B-B and mixed block pairs."""
    p = float(p)
    atomsA = [(0.0, p * p)] if p > 0 else []
    atomsB = [(0.0, (1 - p) ** 2)] if p < 1 else []
    return SlopeMeasure(atomsA, atomsB, 2 * p * (1 - p), label="hor")


class _Speeds(dict):
    """Speeds per slope, computed on first lookup."""

    def __init__(self, compute, items=()):
        super().__init__(items)
        self._compute = compute

    def __missing__(self, l):
        value = self._compute(l)
        self[l] = value
        return value


class SpeedProfile:
    """v = (v_A, v_B, v_I): steps per horizontal step at each slope and
    along interfaces."""

    def __init__(self, vA=None, vB=None, vI=1.0, saturated=False, slope=None):
        self.vA = vA if isinstance(vA, dict) else dict(vA or {})
        self.vB = vB if isinstance(vB, dict) else dict(vB or {})
        self.vI = float(vI)
        self.saturated = bool(saturated)
        self.slope = slope

    def at(self, rho):
        """Speeds at the atoms of ``rho`` as plain lists (A, B)."""
        return [self.vA[l] for l, _ in rho.atomsA], [self.vB[l] for l, _ in rho.atomsB]

    def validate(self, rho):
        errors = {}
        for name, speeds, atoms in (("vA", self.vA, rho.atomsA), ("vB", self.vB, rho.atomsB)):
            for l, _ in atoms:
                if speeds[l] < 1.0 + l - 1e-12:
                    errors[name] = ValidationError(f"speed {speeds[l]} below 1 + {l}")
        if self.vI < 1.0 - 1e-12:
            errors["vI"] = ValidationError(f"interface speed {self.vI} below 1")
        if errors:
            raise ValidationError("Infeasible speed profile ", errors=errors)
        return self

    def replace(self, kind, l=None, value=None):
        """A copy with one speed changed (``kind`` is 'A', 'B' or 'I')."""
        vA, vB, vI = dict(self.vA), dict(self.vB), self.vI
        if kind == "A":
            vA[l] = value
        elif kind == "B":
            vB[l] = value
        else:
            vI = value
        return SpeedProfile(vA, vB, vI, self.saturated, self.slope)

    def to_dict(self, rho=None):
        vA = self.vA if rho is None else {l: self.vA[l] for l, _ in rho.atomsA}
        vB = self.vB if rho is None else {l: self.vB[l] for l, _ in rho.atomsB}
        return {
            "vA": [[l, v] for l, v in sorted(vA.items())],
            "vB": [[l, v] for l, v in sorted(vB.items())],
            "vI": self.vI,
            "saturated": self.saturated,
            "slope": self.slope,
        }

    def __repr__(self):
        return f"SpeedProfile(vA={dict(self.vA)}, vB={dict(self.vB)}, vI={self.vI})"


class ColumnMeasure:
    """ρ: finitely many column types with positive weights summing to one."""

    def __init__(self, atoms, label=""):
        merged = {}
        for theta, weight in atoms:
            merged[theta] = merged.get(theta, 0.0) + float(weight)
        self.atoms = tuple(merged.items())
        self.label = label
        errors = {}
        if not self.atoms:
            errors["atoms"] = ValidationError("a column measure needs at least one atom")
        if any(w <= 0 for _, w in self.atoms):
            errors["weights"] = ValidationError("weights must be positive")
        if abs(sum(w for _, w in self.atoms) - 1.0) > _WEIGHT_TOLERANCE:
            errors["total"] = ValidationError("weights must sum to 1")
        if errors:
            raise ValidationError("Malformed column measure ", errors=errors)

    @classmethod
    def normalized(cls, atoms, label=""):
        atoms = list(atoms)
        total = sum(float(w) for _, w in atoms)
        if not total > 0:
            raise ValidationError("a column measure needs positive total weight")
        return cls([(theta, float(w) / total) for theta, w in atoms], label=label)

    @property
    def thetas(self):
        return [theta for theta, _ in self.atoms]

    def validate(self, m):
        for theta, _ in self.atoms:
            if geometry(theta).t > m:
                raise ConstraintViolation(f"{theta!r} needs t_Θ={geometry(theta).t} > m={m}")
        return self

    def to_dict(self):
        return {
            "label": self.label,
            "atoms": [[theta.to_dict(), w] for theta, w in self.atoms],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            [(ColumnType.from_dict(t), w) for t, w in data["atoms"]], label=data.get("label", "")
        )


class FractionProfile(dict):
    """Θ ↦ (h_A, h_B, h_I), the split of a column's width between the two
    solvents and the interfaces."""

    def validate(self, rho=None):
        thetas = rho.thetas if rho is not None else list(self)
        for theta in thetas:
            if theta not in self:
                raise ConstraintViolation(f"no fractions for {theta!r}")
            h = self[theta]
            geo = geometry(theta)
            if min(h) < 0 or abs(sum(h) - 1.0) > _WEIGHT_TOLERANCE:
                raise ConstraintViolation(f"fractions {h} of {theta!r} are not a distribution")
            for k, l in ((0, geo.lA), (1, geo.lB)):
                if l > 0 and h[k] <= 0:
                    raise ConstraintViolation(f"{theta!r} crosses distance {l} with no width")
            if geo.nint_class != INT:
                k = 0 if geo.nint_class[5] == "A" else 1
                if h[1 - k] != 0:
                    raise ConstraintViolation(f"{theta!r} cannot use the other solvent")
                if geo.nint_class.endswith(",1)") and h[k] != 1:
                    raise ConstraintViolation(f"{theta!r} must stay in its solvent")
        return self

    @classmethod
    def heuristic(cls, rho, interface_floor=0.1):
        """Width proportional to the vertical distances, with ``interface_floor``
        kept on the interface wherever one may be visited."""
        profile = cls()
        for theta in rho.thetas:
            geo = geometry(theta)
            lA, lB = float(geo.lA), float(geo.lB)
            if geo.nint_class.endswith(",1)"):
                profile[theta] = (1.0, 0.0, 0.0) if geo.nint_class[5] == "A" else (0.0, 1.0, 0.0)
            elif geo.nint_class != INT:
                share = 1.0 - interface_floor if lA + lB > 0 else 0.0
                if geo.nint_class[5] == "A":
                    profile[theta] = (share, 0.0, 1.0 - share)
                else:
                    profile[theta] = (0.0, share, 1.0 - share)
            elif lA + lB == 0:
                profile[theta] = (0.0, 0.0, 1.0)
            else:
                rest = 1.0 - interface_floor
                profile[theta] = (rest * lA / (lA + lB), rest * lB / (lA + lB), interface_floor)
        return profile


def _merge(atoms):
    """Merge atoms by slope: (slope, weight, weighted-steps)."""
    merged = {}
    for l, w, steps in atoms:
        key = float(l)
        weight, total = merged.get(key, (0.0, 0.0))
        merged[key] = (weight + w, total + steps)
    return merged


def _lift(rho, fractions, budgets=None):
    entries = {0: [], 1: []}
    interface_w = interface_steps = 0.0
    for theta, w in rho.atoms:
        geo = geometry(theta)
        h = fractions[theta]
        a = budgets[theta] if budgets is not None else (0.0, 0.0, 0.0)
        for k, l in ((0, float(geo.lA)), (1, float(geo.lB))):
            if h[k] > 0:
                entries[k].append((l / h[k], w * h[k], w * a[k]))
        interface_w += w * h[2]
        interface_steps += w * a[2]
    merged = {k: _merge(entries[k]) for k in (0, 1)}
    measure = SlopeMeasure.normalized(
        [(l, wt) for l, (wt, _) in merged[0].items()],
        [(l, wt) for l, (wt, _) in merged[1].items()],
        interface_w,
        label=f"lift({rho.label})",
    )
    if budgets is None:
        return measure, None
    vA = {l: max(steps / wt, 1.0 + l) for l, (wt, steps) in merged[0].items()}
    vB = {l: max(steps / wt, 1.0 + l) for l, (wt, steps) in merged[1].items()}
    vI = max(interface_steps / interface_w, 1.0) if interface_w > 0 else 1.0
    return measure, SpeedProfile(vA, vB, vI)


def lift_measure(rho, h):
    """G_{ρ,h}: A-atoms at l_A/h_A with weight w·h_A, B-atoms likewise and
    interface mass Σ w·h_I."""
    return _lift(rho, FractionProfile(h).validate(rho))[0]


class VariationalSolver:
    """Both variational formulas at one parameter point.

    :param params: :class:`~copolymer.config.ModelParams`
    :param table: the :class:`~copolymer.interface.InterfaceTable`
    :param column_solver: shared :class:`~copolymer.column.ColumnSolver`
    :param tol: Dinkelbach stopping tolerance on successive ratios
    :param max_iter: Dinkelbach iteration cap
    """

    def __init__(self, params, table, column_solver=None, tol=DEFAULT_TOLERANCE, max_iter=DEFAULT_MAX_ITER):
        self.params = params
        self.table = table
        self.columns = column_solver or ColumnSolver(params, table)
        self.tol = float(tol)
        self.max_iter = int(max_iter)

    @property
    def shift(self):
        return self.params.half_gap

    # -- slope-based formula ---------------------------------------------

    def numerator_denominator(self, rho, v):
        vA, vB = v.at(rho)
        speeds = vA + vB + ([v.vI] if rho.wI > 0 else [])
        if any(not math.isfinite(s) for s in speeds):
            return -math.inf, math.inf
        numerator = denominator = 0.0
        for (l, w), speed in zip(rho.atomsA, vA):
            numerator += w * entropy.path_growth(speed, l)
            denominator += w * speed
        for (l, w), speed in zip(rho.atomsB, vB):
            numerator += w * (entropy.path_growth(speed, l) + self.shift * speed)
            denominator += w * speed
        if rho.wI > 0:
            numerator += rho.wI * self.table.growth(v.vI)
            denominator += rho.wI * v.vI
        return numerator, denominator

    def slope_ratio(self, rho, v):
        """N̄/D̄; -inf when a weighted speed is infinite."""
        numerator, denominator = self.numerator_denominator(rho, v)
        if not math.isfinite(denominator):
            return -math.inf
        return numerator / denominator

    def optimal_speed(self, c):
        """The maximizer v(c) of N̄ - c·D̄, evaluated lazily per slope."""
        c = float(c)
        if not c > 0:
            raise DomainError(f"slope must be positive, got {c}")
        located = self.table.locate(c)
        vA = _Speeds(lambda l: entropy.chi_inverse(c, l))
        vB = _Speeds(lambda l: entropy.chi_inverse(c - self.shift, l))
        return SpeedProfile(vA, vB, located.v, saturated=located.saturated, slope=c)

    def _best_start(self, rho):
        best, best_v = -math.inf, None
        lower = SpeedProfile(
            {l: 1.0 + l for l, _ in rho.atomsA}, {l: 1.0 + l for l, _ in rho.atomsB}, 1.0
        )
        for v in [lower] + [self.optimal_speed(c) for c in START_SLOPES]:
            ratio = self.slope_ratio(rho, v)
            if ratio > best:
                best, best_v = ratio, v
        return best, best_v

    def _dinkelbach(self, start, step, label):
        c, trace = start, [start]
        for iteration in range(1, self.max_iter + 1):
            following, point = step(c)
            trace.append(following)
            logger.debug("dinkelbach %s iteration %d: c=%r", label, iteration, following)
            if abs(following - c) <= self.tol:
                return following, point, iteration, trace
            c = following
        logger.error("dinkelbach %s did not converge in %d iterations", label, self.max_iter)
        raise NoConvergence(f"no fixed point for {label} after {self.max_iter} iterations")

    def free_energy_for_measure(self, rho):
        """h(ρ̄) = sup_v N̄/D̄ with its maximizing profile v(h(ρ̄))."""
        start, _ = self._best_start(rho)
        if not start > 0:
            raise NonPositive(f"no starting profile gives {rho!r} a positive ratio")

        def step(c):
            v = self.optimal_speed(c)
            return self.slope_ratio(rho, v), v

        value, _, iterations, trace = self._dinkelbach(start, step, rho.label or "slope measure")
        speeds = self.optimal_speed(value)
        return FreeEnergy(value, speeds, iterations, trace, speeds.saturated if rho.wI > 0 else False)

    # -- column-based formula --------------------------------------------

    def column_ratio(self, rho, u):
        """N(ρ, u)/D(ρ, u) with N = Σ w·u_Θ·ψ(Θ, u_Θ) and D = Σ w·u_Θ."""
        numerator = denominator = 0.0
        for theta, w in rho.atoms:
            speed = float(u[theta])
            numerator += w * speed * self.columns.value(theta, speed)
            denominator += w * speed
        return numerator / denominator

    def column_speeds(self, rho, c):
        located = {theta: self.columns.locate_u(theta, c) for theta in rho.thetas}
        return {theta: s.u for theta, s in located.items()}, any(s.saturated for s in located.values())

    def column_free_energy_for_measure(self, rho):
        """g(ρ) = sup_u N/D with its maximizing times u(g(ρ))."""
        best = -math.inf
        for c in START_SLOPES:
            speeds, _ = self.column_speeds(rho, c)
            best = max(best, self.column_ratio(rho, speeds))
        lower = {theta: float(geometry(theta).t) for theta in rho.thetas}
        best = max(best, self.column_ratio(rho, lower))
        if not best > 0:
            raise NonPositive(f"no starting speeds give column measure {rho.label!r} a positive ratio")

        def step(c):
            speeds, _ = self.column_speeds(rho, c)
            return self.column_ratio(rho, speeds), speeds

        value, _, iterations, trace = self._dinkelbach(best, step, rho.label or "column measure")
        speeds, saturated = self.column_speeds(rho, value)
        return FreeEnergy(value, speeds, iterations, trace, saturated)

    # -- transforms ------------------------------------------------------

    def budgets(self, theta, u, h):
        """Best step budgets (a_A, a_B, a_I) of a column at fixed fractions h."""
        geo = geometry(theta)
        u = float(u)
        distances = (float(geo.lA), float(geo.lB))
        shifts = (0.0, self.shift)
        active = [k for k in (0, 1) if h[k] > 0]
        floor = sum(h[k] + distances[k] for k in active) + h[2]
        if u < floor - 1e-12 * u:
            raise ConstraintViolation(f"u={u} cannot cover the distances of {theta!r} at fractions {h}")

        def spend(c):
            a = [0.0, 0.0, 0.0]
            for k in active:
                a[k] = h[k] * entropy.chi_inverse(c - shifts[k], distances[k] / h[k])
            if h[2] > 0:
                a[2] = h[2] * self.table.conjugate(c).v
            return a

        c_floor = max([0.0] + [shifts[k] for k in active] + ([self.table.min_slope] if h[2] > 0 else []))
        excess = lambda c: sum(spend(c)) - u  # noqa: E731
        hi = max(1.0, 2.0 * c_floor)
        while excess(hi) > 0 and hi < 700.0:
            hi *= 2.0
        if excess(hi) > 0:
            a = spend(hi)
        else:
            lo, step = hi, hi - c_floor
            while excess(lo) < 0 and step > 1e-200:
                step *= 0.5
                lo = c_floor + step
            a = spend(lo if excess(lo) < 0 else brentq(excess, lo, hi, xtol=1e-300, maxiter=500))
        # the remaining steps go to the term with the most room
        terms = list(active) + ([2] if h[2] > 0 else [])
        order = sorted(terms, key=lambda k: a[k] - h[k], reverse=True)
        a[order[0]] += u - sum(a)
        return tuple(a)

    def lift_to_slope(self, rho, u, h=None):
        """G_{ρ,h}: the slope measure and speed profile of a column measure.

        Each column contributes an A-atom at slope l_A/h_A with weight w·h_A,
        a B-atom likewise, and interface mass w·h_I; speeds are the
        conditional means a/h over the atoms merged at one slope. With
        ``h = None`` the fractions and budgets are ψ's maximizers, and the
        lifted ratio dominates the column ratio.
        """
        fractions, budgets = FractionProfile(), {}
        if h is not None:
            h = FractionProfile(h).validate(rho)
        for theta, _ in rho.atoms:
            speed = float(u[theta])
            if h is None:
                solved = self.columns.psi(theta, speed)
                fractions[theta], budgets[theta] = solved.h, solved.a
            else:
                fractions[theta] = h[theta]
                budgets[theta] = self.budgets(theta, speed, h[theta])
        return _lift(rho, fractions, budgets)

    def push_to_column(self, rho_bar, v, menu):
        """A column measure and times realizing ``(rho_bar, v)`` on ``menu``.

        Every A- or B-atom at slope l goes to a single-solvent column of that
        solvent with distance l and every unit of interface mass to a column
        that can run along an interface at no vertical cost; the time is
        u_Θ = h_A v_A + h_B v_B + h_I v_I with the single nonzero fraction.
        """
        atoms, times = [], {}

        def place(theta, weight, speed):
            atoms.append((theta, weight))
            previous_w, previous_steps = times.get(theta, (0.0, 0.0))
            times[theta] = (previous_w + weight, previous_steps + weight * speed)

        for kind, source in (("A", rho_bar.atomsA), ("B", rho_bar.atomsB)):
            speeds = v.vA if kind == "A" else v.vB
            for l, w in source:
                place(_find_single(menu, kind, l), w, speeds[l])
        if rho_bar.wI > 0:
            place(_find_interface(menu), rho_bar.wI, v.vI)
        rho = ColumnMeasure(atoms, label=f"push({rho_bar.label})")
        u = {theta: steps / weight for theta, (weight, steps) in times.items()}
        return rho, u


def _find_single(menu, kind, l):
    wanted = f"nint({kind},1)"
    for theta in menu:
        geo = geometry(theta)
        distance = float(geo.lA if kind == "A" else geo.lB)
        if geo.nint_class == wanted and abs(distance - l) <= _MATCH_TOLERANCE:
            return theta
    raise MenuMismatch(f"no {wanted} column with distance {l} in the menu")


def _find_interface(menu):
    for theta in menu:
        geo = geometry(theta)
        if geo.nint_class.endswith(",2)") and geo.lA == 0 and geo.lB == 0 and geo.t == 1:
            return theta
    raise MenuMismatch("no column in the menu runs along an interface at no vertical cost")


def single_column(kind, l, radius=2):
    """The all-``kind`` x = 1 column with vertical distance ``l``."""
    l = oracle.as_fraction(l)
    dpi = math.floor(l)
    frac = l - dpi
    radius = max(radius, dpi + 1)
    return ColumnType(kind * (2 * radius + 1), dpi, (1 - frac) / 2, (1 + frac) / 2, 1)


def interface_column(radius=2):
    """An x = 2 column entering and leaving on the interface above its entry block."""
    chi = "A" * (radius + 1) + "B" * radius
    return ColumnType(chi, 0, 1, 1, 2)


def menu_for_measure(rho_bar, radius=2):
    """A column menu on which :meth:`VariationalSolver.push_to_column` succeeds."""
    menu = ColumnMenu()
    for l, _ in rho_bar.atomsA:
        menu.add(single_column("A", l, radius))
    for l, _ in rho_bar.atomsB:
        menu.add(single_column("B", l, radius))
    if rho_bar.wI > 0:
        menu.add(interface_column(radius))
    return menu
