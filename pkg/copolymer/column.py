"""Column types Θ and the single-column free energy ψ(Θ, u).

A column of width L is crossed in uL steps. Its type records the block
labels χ of a window of rows around the entry block, the block displacement
ΔΠ between entry and exit, the entry and exit heights b₀, b₁ inside their
blocks and a tag x telling whether a path that never crosses an interface
must touch one (x = 2) or must not (x = 1).

ψ(Θ, u) maximizes, over the fractions h = (h_A, h_B, h_I) of horizontal
steps spent in A, in B and along interfaces and the matching step budgets
a = (a_A, a_B, a_I),

    [h_A·W(a_A/h_A, l_A/h_A) + h_B·W(a_B/h_B, l_B/h_B) + a_B·(β - α)/2
     + h_I·Φ(a_I/h_I)] / u

subject to Σh = 1 and Σa = u, with W(v, l) = v·κ̃(v, l) and Φ(μ) = μ·φ_I(μ).
The program is solved through its dual: for a step multiplier c and a
width multiplier θ every term has a closed-form best response, θ is fixed
by Σh = 1 (or by the interface when it is active), and c by Σa = u.
"""
import functools
import json
import logging
import math
import threading
from collections import namedtuple

import numpy as np
from scipy.optimize import brentq, minimize

from copolymer import entropy, oracle
from copolymer.errors import DomainError, MalformedWindow, ValidationError

logger = logging.getLogger(__name__)

INT = "int"
CLASSES = (INT, "nint(A,1)", "nint(A,2)", "nint(B,1)", "nint(B,2)")
DEFAULT_PSI_TOL = 1e-8
DEFAULT_U_CAP = 64.0
# beyond this step multiplier e^{-c} underflows and every speed sits on
# its lower bound
_C_MAX = 745.0
_C_MIN_STEP = 1e-200
_EPS = float(np.finfo(float).eps)

ColumnGeometry = namedtuple("ColumnGeometry", ["k", "interfaces", "t", "lA", "lB", "nint_class"])
PsiResult = namedtuple("PsiResult", ["value", "h", "a", "slope", "saturated"])
ColumnSpeed = namedtuple("ColumnSpeed", ["u", "saturated"])


class ColumnType(namedtuple("ColumnType", ["chi", "dpi", "b0", "b1", "x"])):
    """Θ = (χ, ΔΠ, b₀, b₁, x).

    ``chi`` holds the labels of rows -r..r around the entry block (r is the
    window radius) and may be given as a string such as ``"AABAA"``.
    """

    __slots__ = ()

    def __new__(cls, chi, dpi, b0, b1, x=1):
        if isinstance(chi, str):
            if set(chi) - {"A", "B"}:
                raise MalformedWindow(f"window labels must be A or B, got {chi!r}")
            chi = tuple(oracle.A if c == "A" else oracle.B for c in chi)
        chi = tuple(int(c) for c in chi)
        if len(chi) % 2 == 0 or len(chi) < 3:
            raise MalformedWindow(f"window needs an odd length of at least 3, got {len(chi)}")
        if set(chi) - {oracle.A, oracle.B}:
            raise MalformedWindow(f"window labels must be A or B, got {chi!r}")
        b0, b1 = oracle.as_fraction(b0), oracle.as_fraction(b1)
        if not (0 < b0 <= 1 and 0 < b1 <= 1):
            raise MalformedWindow(f"entry and exit heights must lie in (0, 1], got {b0}, {b1}")
        if int(x) not in (1, 2):
            raise MalformedWindow(f"x must be 1 or 2, got {x!r}")
        return super().__new__(cls, chi, int(dpi), b0, b1, int(x))

    def __getnewargs__(self):
        return tuple(self)

    @property
    def radius(self):
        return (len(self.chi) - 1) // 2

    @property
    def window(self):
        return "".join("A" if c == oracle.A else "B" for c in self.chi)

    def label(self, k):
        if abs(k) > self.radius:
            raise MalformedWindow(f"row {k} outside the window of radius {self.radius}")
        return self.chi[k + self.radius]

    def to_dict(self):
        return {
            "chi": self.window,
            "dpi": self.dpi,
            "b0": str(self.b0),
            "b1": str(self.b1),
            "x": self.x,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data["chi"], data["dpi"], data["b0"], data["b1"], data.get("x", 1))

    def __repr__(self):
        return f"ColumnType({self.window!r}, dpi={self.dpi}, b0={self.b0}, b1={self.b1}, x={self.x})"


def _block_lengths(theta, y0, y1):
    """Vertical distance walked inside A- and inside B-blocks from y0 to y1."""
    lo, hi = min(y0, y1), max(y0, y1)
    cuts = [lo] + list(range(math.floor(lo) + 1, math.ceil(hi))) + [hi]
    lengths = {oracle.A: 0, oracle.B: 0}
    for start, end in zip(cuts, cuts[1:]):
        if end > start:
            lengths[theta.label(math.ceil(end) - 1)] += end - start
    return lengths[oracle.A], lengths[oracle.B]


@functools.lru_cache(maxsize=65536)
def geometry(theta):
    """Interfaces, k_Θ, t_Θ, l_{A,Θ}, l_{B,Θ} and the class of a column type."""
    radius = theta.radius
    if abs(theta.dpi) >= radius:
        raise MalformedWindow(f"|dpi|={abs(theta.dpi)} does not fit a window of radius {radius}")
    # the interface between rows n - 1 and n sits at height n
    interfaces = tuple(
        n for n in range(-radius + 1, radius + 1) if theta.label(n - 1) != theta.label(n)
    )
    if theta.dpi >= 0:
        k = sum(1 for n in interfaces if 1 <= n <= theta.dpi)
    else:
        k = -sum(1 for n in interfaces if theta.dpi + 1 <= n <= 0)
    y0, y1 = theta.b0, theta.dpi + theta.b1
    direct = abs(y1 - y0)
    if k != 0:
        if theta.x != 1:
            raise MalformedWindow("a column crossing an interface must carry x = 1")
        lA, lB = _block_lengths(theta, y0, y1)
        return ColumnGeometry(k, interfaces, 1 + direct, lA, lB, INT)

    walls = set(interfaces)
    if theta.x == 1:
        if any(y.denominator == 1 and int(y) in walls for y in (y0, y1)):
            raise MalformedWindow("an x = 1 column cannot enter or leave on an interface")
        t = 1 + direct
    else:
        routes = []
        above = [n for n in interfaces if n >= 1]
        below = [n for n in interfaces if n <= 0]
        if above:
            routes.append(2 * min(above) - y0 - y1)
        if below:
            routes.append(y0 + y1 - 2 * max(below))
        if not routes:
            raise MalformedWindow("an x = 2 column needs an interface inside its window")
        t = 1 + min(routes)
    # the vertical distance of both nint classes is the direct displacement
    solvent = "A" if theta.label(0) == oracle.A else "B"
    lA, lB = (direct, 0 * direct) if solvent == "A" else (0 * direct, direct)
    return ColumnGeometry(0, interfaces, t, lA, lB, f"nint({solvent},{theta.x})")


def classify_column(theta):
    return geometry(theta).nint_class


def _tilt_floor(c, s):
    # 2 artanh(e^{s - c}): the width multiplier at which a solvent's
    # displacement becomes free
    return math.log1p(math.exp(s - c)) - math.log(-math.expm1(s - c))


def _solvent_response(c, delta, s, l):
    """Best (h, a) of a solvent with shift s and distance l > 0 when the
    width multiplier sits ``delta`` above its floor."""
    x = math.exp(s - c)
    floor = _tilt_floor(c, s)
    rise = floor + delta
    g = math.exp(rise)
    total = math.expm1(rise)
    disc = math.exp(floor) * math.expm1(delta) * (total + x * (g + 1.0)) / (1.0 + x)
    if disc <= 0:
        return math.inf, math.inf
    spread = math.sqrt(disc)
    h = l / spread
    squares = 0.5 * (total * total + disc)
    return h, h * (1.0 + (total + squares) / g)


def _root_above(f, floor):
    """Root of a decreasing f on (floor, ∞) with f(floor+) > 0."""
    step = 1.0
    while f(floor + step) > 0:
        step *= 2.0
        if step > 512.0:
            raise DomainError("width multiplier bracket failed")
    hi = floor + step
    lo_step = step
    while True:
        lo_step *= 0.5
        lo = floor + lo_step
        if f(lo) > 0 or lo_step < 1e-300:
            break
        hi = lo
    return brentq(f, lo, hi, xtol=1e-300, rtol=4 * _EPS, maxiter=500)


def _close_budget(u, h, a, distances):
    """Make Σa = u exact, keeping every budget on its lower bound or above."""
    floors = [h[0] + distances[0] if h[0] > 0 else 0.0, h[1] + distances[1] if h[1] > 0 else 0.0, h[2]]
    for k in range(3):
        if h[k] > 0:
            a[k] = max(a[k], floors[k])
    diff = u - sum(a)
    slack = [a[k] - floors[k] if h[k] > 0 else -1.0 for k in range(3)]
    k = max(range(3), key=lambda j: slack[j])
    a[k] = max(a[k] + diff, floors[k])


class ColumnSolver:
    """ψ(Θ, u) and the column speeds u_Θ(c) for one parameter point.

    :param params: :class:`~copolymer.config.ModelParams`
    :param table: the :class:`~copolymer.interface.InterfaceTable` to use
    :param u_cap: speeds beyond this are reported saturated
    :param cache: keep solved (Θ, u) pairs
    :param tol: accuracy expected of ψ and of the budgets Σh = 1, Σa = u
    """

    def __init__(self, params, table, u_cap=DEFAULT_U_CAP, cache=True, tol=DEFAULT_PSI_TOL):
        self.params = params
        self.table = table
        self.u_cap = float(u_cap)
        self.tol = float(tol)
        self.shift = (0.0, params.half_gap)
        self._cache = {} if cache else None
        self._lock = threading.Lock()

    def __repr__(self):
        return f"ColumnSolver(alpha={self.params.alpha}, beta={self.params.beta}, table={self.table!r})"

    # -- structure -------------------------------------------------------

    @staticmethod
    def _distances(geo):
        return float(geo.lA), float(geo.lB)

    def _single_solvent(self, geo):
        """(index, shift, distance) when the class allows one solvent only."""
        if not geo.nint_class.endswith(",1)"):
            return None
        index = 0 if geo.nint_class[5] == "A" else 1
        return index, self.shift[index], self._distances(geo)[index]

    def dual_solvents(self, geo):
        """Solvents with a positive distance that enter the dual program.

        Solvents at zero distance are dominated by the interface, whose
        envelope lies above μ·κ̃(μ, 0).
        """
        allowed = (0, 1) if geo.nint_class == INT else (0 if geo.nint_class[5] == "A" else 1,)
        distances = self._distances(geo)
        return [(k, self.shift[k], distances[k]) for k in allowed if distances[k] > 0]

    # -- objective -------------------------------------------------------

    def objective(self, theta, u, h, a):
        """The ψ-objective at a feasible ((h), (a)); -inf when infeasible."""
        geo = geometry(theta)
        u = float(u)
        distances = self._distances(geo)
        single = self._single_solvent(geo)
        total = 0.0
        for k in (0, 1):
            allowed = geo.nint_class == INT or geo.nint_class[5] == "AB"[k]
            if h[k] <= 0:
                if a[k] > 0 or distances[k] > 0:
                    return -math.inf
                continue
            if not allowed:
                return -math.inf
            try:
                total += h[k] * entropy.path_growth(a[k] / h[k], distances[k] / h[k])
            except DomainError:
                return -math.inf
            total += self.shift[k] * a[k]
        if h[2] > 0:
            if single is not None:
                return -math.inf
            try:
                total += h[2] * self.table.growth(a[2] / h[2])
            except DomainError:
                return -math.inf
        elif a[2] > 0:
            return -math.inf
        return total / u

    # -- ψ ---------------------------------------------------------------

    def _cached(self, key, compute):
        if self._cache is None:
            return compute()
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = compute()
        with self._lock:
            self._cache.setdefault(key, value)
        return value

    def psi(self, theta, u):
        """ψ(Θ, u) with its maximizer; ``slope`` is ∂_u(u·ψ) at u."""
        geo = geometry(theta)
        u = float(u)
        t = float(geo.t)
        if u < t - 1e-12 * max(1.0, u):
            raise DomainError(f"u={u} is below t_Θ={t}")
        u = max(u, t)
        return self._cached((theta, u), lambda: self._solve(theta, geo, u))

    def _solve(self, theta, geo, u):
        single = self._single_solvent(geo)
        if single is not None:
            index, s, l = single
            h, a = [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]
            h[index], a[index] = 1.0, u
            value = entropy.kappa(u, l) + s
            return PsiResult(value, tuple(h), tuple(a), entropy.growth_slope(u, l) + s, False)
        return self._solve_dual(theta, geo, u)

    def _responses(self, c, solvents):
        """Solvent (h, a) and the interface share at step multiplier c."""
        conj = self.table.conjugate(c)
        if not solvents:
            return [], [], 1.0, conj
        floors = [s + _tilt_floor(c, s) for _, s, _ in solvents]
        base = max(floors)
        offsets = [base - f for f in floors]

        def widths(delta):
            return sum(
                _solvent_response(c, delta + off, s, l)[0]
                for (_, s, l), off in zip(solvents, offsets)
            )

        lift = conj.value - base
        if lift > 0 and widths(lift) <= 1.0:
            delta, active = lift, True
        else:
            delta, active = _root_above(lambda d: widths(d) - 1.0, max(lift, 0.0)), False
        pairs = [
            _solvent_response(c, delta + off, s, l) for (_, s, l), off in zip(solvents, offsets)
        ]
        hs = [p[0] for p in pairs]
        as_ = [p[1] for p in pairs]
        share = max(0.0, 1.0 - sum(hs)) if active else 0.0
        return hs, as_, share, conj

    def _column_speed(self, c, solvents):
        hs, as_, share, conj = self._responses(c, solvents)
        return sum(as_) + share * conj.v, conj

    def _solve_dual(self, theta, geo, u):
        solvents = self.dual_solvents(geo)
        if not solvents:
            growth = self.table.growth(u)
            saturated = not self.table.exact and u > self.table.mu_max
            return PsiResult(growth / u, (0.0, 0.0, 1.0), (0.0, 0.0, u), self._interface_slope(u), saturated)

        def residual(c):
            hs, as_, share, conj = self._responses(c, solvents)
            return (u - 1.0) - sum(a - h for h, a in zip(hs, as_)) - share * (conj.v - 1.0)

        c_floor = self.table.min_slope
        saturated = False
        c_hi = max(1.0, 2.0 * c_floor)
        while residual(c_hi) < 0 and c_hi < _C_MAX:
            c_hi = min(2.0 * c_hi, _C_MAX)
        if residual(c_hi) < 0:
            c = _C_MAX
        elif residual(c_hi) == 0:
            c = c_hi
        else:
            step = c_hi - c_floor
            c_lo = c_hi
            while residual(c_lo) > 0:
                step *= 0.5
                if step < _C_MIN_STEP:
                    saturated = True
                    break
                c_hi, c_lo = c_lo, c_floor + step
            c = c_lo if saturated else brentq(residual, c_lo, c_hi, xtol=1e-300, rtol=4 * _EPS, maxiter=500)
        logger.debug("psi %r u=%r: multiplier c=%r", theta, u, c)

        hs, as_, share, conj = self._responses(c, solvents)
        h, a = [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]
        for (k, _, _), hk, ak in zip(solvents, hs, as_):
            h[k], a[k] = hk, ak
        if share > 1e-14:
            h[2] = 1.0 - h[0] - h[1]
            a[2] = max(u - a[0] - a[1], h[2])
        else:
            norm = h[0] + h[1]
            h[0], h[1] = h[0] / norm, h[1] / norm
        _close_budget(u, h, a, self._distances(geo))
        if abs(sum(h) - 1.0) > self.tol or abs(sum(a) - u) > self.tol * max(1.0, u):
            logger.warning("psi %r u=%r: budgets off by %r, %r", theta, u, sum(h) - 1.0, sum(a) - u)
        value = self.objective(theta, u, h, a)
        saturated = saturated or conj.saturated
        if saturated:
            logger.warning("psi %r u=%r uses the interface table beyond mu_max", theta, u)
        return PsiResult(value, tuple(h), tuple(a), c if c < _C_MAX else math.inf, saturated)

    def _interface_slope(self, mu):
        if self.table.exact:
            return entropy.growth_slope(mu, 0.0)
        nodes = self.table.envelope
        index = int(np.searchsorted(nodes[:, 0], mu, side="right")) - 1
        index = min(max(index, 0), len(nodes) - 2)
        return float((nodes[index + 1, 1] - nodes[index, 1]) / (nodes[index + 1, 0] - nodes[index, 0]))

    def value(self, theta, u):
        return self.psi(theta, u).value

    def slope(self, theta, u):
        return self.psi(theta, u).slope

    # -- speeds ----------------------------------------------------------

    def locate_u(self, theta, c):
        """The u ≥ t_Θ at which ∂_u(u·ψ(Θ, u)) crosses c, with a saturation
        flag when it lies beyond ``u_cap`` or beyond the interface table."""
        c = float(c)
        if not c > 0:
            raise DomainError(f"slope must be positive, got {c}")
        geo = geometry(theta)
        t = float(geo.t)
        single = self._single_solvent(geo)
        saturated = False
        if single is not None:
            _, s, l = single
            u = entropy.chi_inverse(c - s, l) if c > s else math.inf
        elif c <= self.table.min_slope:
            u, saturated = math.inf, True
        else:
            u, conj = self._column_speed(c, self.dual_solvents(geo))
            saturated = conj.saturated
        if u > self.u_cap:
            logger.warning("column speed for %r at c=%r exceeds u_cap=%r", theta, c, self.u_cap)
            return ColumnSpeed(self.u_cap, True)
        return ColumnSpeed(max(u, t), saturated)

    def u_theta_of_c(self, theta, c):
        return self.locate_u(theta, c).u


def _simplex_grid(points):
    i, j = np.meshgrid(np.arange(points + 1), np.arange(points + 1), indexing="ij")
    keep = i + j <= points
    return i[keep] / points, j[keep] / points


def _grid_values(solver, theta, u, hA, hB, sA, sB):
    geo = geometry(theta)
    lA, lB = float(geo.lA), float(geo.lB)
    slack = u - 1.0 - lA - lB
    hI = 1.0 - hA - hB
    sI = slack - sA - sB
    aA, aB, aI = hA + lA + sA, hB + lB + sB, hI + sI
    total = np.zeros(np.broadcast(hA, sA).shape)
    for h, a, l, s in ((hA, aA, lA, solver.shift[0]), (hB, aB, lB, solver.shift[1])):
        with np.errstate(all="ignore"):
            term = h * entropy.growth_array(a / h, l / h) + s * a
        zero = (h <= 0) & (a - h <= 1e-15) & (l == 0)
        total = total + np.where(h > 0, term, np.where(zero, 0.0, -np.inf))
    with np.errstate(all="ignore"):
        inter = hI * solver.table.growth_array(aI / hI)
    zero = (hI <= 1e-15) & (aI <= 1e-15)
    total = total + np.where(hI > 1e-15, inter, np.where(zero, 0.0, -np.inf))
    return np.where((hI >= -1e-15) & (sI >= -1e-12), total / u, -np.inf)


def grid_search_psi(solver, theta, u, points=40, polish=True):
    """Dense-grid maximum of the ψ-objective, optionally polished by a
    Nelder-Mead search from the best grid point."""
    geo = geometry(theta)
    u = float(u)
    t = float(geo.t)
    if u < t:
        raise DomainError(f"u={u} is below t_Θ={t}")
    if solver._single_solvent(geo) is not None:
        return solver.psi(theta, u)
    lA, lB = float(geo.lA), float(geo.lB)
    slack = u - 1.0 - lA - lB
    hA, hB = _simplex_grid(points)
    sA, sB = _simplex_grid(points)
    if geo.nint_class != INT:
        keepA = geo.nint_class[5] == "A"
        pick = (hB == 0) if keepA else (hA == 0)
        hA, hB = hA[pick], hB[pick]
        pick = (sB == 0) if keepA else (sA == 0)
        sA, sB = sA[pick], sB[pick]
    values = _grid_values(
        solver, theta, u, hA[:, None], hB[:, None], slack * sA[None, :], slack * sB[None, :]
    )
    best = np.unravel_index(int(np.argmax(values)), values.shape)
    start = np.array([hA[best[0]], hB[best[0]], slack * sA[best[1]], slack * sB[best[1]]])
    free = [0, 1, 2, 3] if geo.nint_class == INT else ([0, 2] if geo.nint_class[5] == "A" else [1, 3])

    def unpack(z):
        full = np.zeros(4)
        full[free] = z
        return full

    def loss(z):
        full = unpack(z)
        if np.any(full < 0):
            return 1e3
        value = _grid_values(solver, theta, u, *full)
        return -float(value) if np.isfinite(value) else 1e3

    z = start[free]
    if polish:
        result = minimize(
            loss,
            z,
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000, "maxfev": 40000},
        )
        if result.fun <= loss(z):
            z = result.x
    hA_, hB_, sA_, sB_ = unpack(z)
    h = (hA_, hB_, 1.0 - hA_ - hB_)
    a = (hA_ + lA + sA_, hB_ + lB + sB_, 1.0 - hA_ - hB_ + slack - sA_ - sB_)
    return PsiResult(-loss(z), h, a, None, False)


def psi_bounds(solver, theta, u_values=(None,), far_u=50.0, epsilon=0.15):
    """Check |ψ| ≤ log 3 + α on ``u_values`` and, outside nint(B,1), the
    decay ψ(Θ, far_u) ≤ epsilon."""
    geo = geometry(theta)
    bound = entropy.LOG3 + solver.params.alpha
    us = [float(geo.t) if u is None else float(u) for u in u_values]
    values = [solver.value(theta, u) for u in us]
    report = {
        "bound": bound,
        "max_abs": max(abs(v) for v in values),
        "uniform_ok": all(abs(v) <= bound + 1e-12 for v in values),
        "decay_value": None,
        "decay_ok": True,
    }
    if geo.nint_class != "nint(B,1)" and far_u >= float(geo.t):
        far = solver.value(theta, far_u)
        report["decay_value"] = far
        report["decay_ok"] = far <= epsilon
    if not (report["uniform_ok"] and report["decay_ok"]):
        logger.error("psi bounds violated for %r: %r", theta, report)
    return report


class ColumnMenu:
    """An ordered list of column types with their geometry."""

    def __init__(self, thetas=()):
        self.thetas = []
        for theta in thetas:
            self.add(theta)

    def add(self, theta):
        geometry(theta)
        if theta not in self.thetas:
            self.thetas.append(theta)
        return theta

    def __iter__(self):
        return iter(self.thetas)

    def __len__(self):
        return len(self.thetas)

    def __contains__(self, theta):
        return theta in self.thetas

    def by_class(self, nint_class):
        return [theta for theta in self.thetas if geometry(theta).nint_class == nint_class]

    def to_dict(self):
        atoms = []
        for theta in self.thetas:
            geo = geometry(theta)
            atoms.append(
                {
                    "theta": theta.to_dict(),
                    "k": geo.k,
                    "interfaces": list(geo.interfaces),
                    "t": str(geo.t),
                    "lA": str(geo.lA),
                    "lB": str(geo.lB),
                    "class": geo.nint_class,
                }
            )
        return {"version": 1, "atoms": atoms}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        if data.get("version") != 1:
            raise ValidationError(f"Unsupported column menu version {data.get('version')!r}")
        return cls(ColumnType.from_dict(atom["theta"]) for atom in data["atoms"])
