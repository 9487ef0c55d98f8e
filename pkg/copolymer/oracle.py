"""Brute-force ground truth at tiny sizes.

Exact enumeration of directed self-avoiding paths (steps East, North,
South, never North right after South or the reverse), seeded disorder,
Hamiltonians and finite-size partition functions. Every analytic module is
validated against the functions in here.
"""
import functools
import logging
import math
from collections import namedtuple
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from copolymer.errors import (
    BudgetExceeded,
    DisorderTooShort,
    DomainError,
    EmptyPathSet,
)

logger = logging.getLogger(__name__)

EAST, NORTH, SOUTH = "E", "N", "S"
STEPS = (EAST, NORTH, SOUTH)
MOVES = {EAST: (1, 0), NORTH: (0, 1), SOUTH: (0, -1)}
REVERSAL = {NORTH: SOUTH, SOUTH: NORTH}

# monomer and block labels
A, B = 0, 1

DEFAULT_BUDGET = 24
DEFAULT_PATH_BUDGET = 14
DEFAULT_MESO_RADIUS = 256


def as_fraction(value):
    """Exact rational from an int, Fraction, decimal string or float.

    Floats go through their shortest repr so that 1.5 and 0.1 are read the
    way they are written.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def lattice_sizes(L, u, l):
    """Integer sizes (n steps, vertical steps, net displacement) of W_L(u,l).

    Raises DomainError unless l ∈ Z/L and u ∈ 1 + |l| + 2N/L.
    """
    if int(L) != L or L < 1:
        raise DomainError(f"block size must be a positive integer, got {L!r}")
    u, l = as_fraction(u), as_fraction(l)
    n, d = u * L, l * L
    if n.denominator != 1 or d.denominator != 1:
        raise DomainError(f"(u={u}, l={l}) is not on the 1/{L} lattice")
    n, d = int(n), int(d)
    vertical = n - L
    if vertical < abs(d) or (vertical - abs(d)) % 2:
        raise DomainError(f"(u={u}, l={l}) is outside H_{L}")
    return n, vertical, d


class DirectedPath(namedtuple("DirectedPath", ["steps", "start"])):
    """A directed self-avoiding path given by its step word."""

    __slots__ = ()

    def __new__(cls, steps, start=(0, 1)):
        steps = tuple(steps)
        for prev, step in zip(steps, steps[1:]):
            if REVERSAL.get(prev) == step:
                raise DomainError("a directed path cannot reverse North/South")
        if any(step not in MOVES for step in steps):
            raise DomainError(f"unknown step in {steps!r}")
        return super().__new__(cls, steps, tuple(start))

    @classmethod
    def from_word(cls, word, start=(0, 1)):
        return cls(tuple(word), start)

    def __len__(self):
        return len(self.steps)

    def vertices(self):
        x, y = self.start
        points = [(x, y)]
        for step in self.steps:
            dx, dy = MOVES[step]
            x, y = x + dx, y + dy
            points.append((x, y))
        return points

    def bonds(self):
        points = self.vertices()
        return list(zip(points, points[1:]))


def iter_words(n, last=None):
    """All n-step words without a North/South reversal (depth-first)."""
    if n == 0:
        yield ()
        return
    for step in STEPS:
        if last is not None and REVERSAL.get(last) == step:
            continue
        for rest in iter_words(n - 1, step):
            yield (step,) + rest


def enumerate_paths(n, start=(0, 1)):
    for word in iter_words(n):
        yield DirectedPath(word, start)


def _check_budget(n, budget):
    if budget is not None and n > budget:
        raise BudgetExceeded(f"{n} steps exceeds the enumeration budget {budget}")


@functools.lru_cache(maxsize=4096)
def _count_endpoint(n, width, dy, band_lo, band_hi):
    # dict DP over (x, y, last move); y confined to [band_lo, band_hi]
    states = {(0, 0, EAST): 1}
    for _ in range(n):
        nxt = {}
        for (x, y, last), count in states.items():
            for step in STEPS:
                if REVERSAL.get(last) == step:
                    continue
                ddx, ddy = MOVES[step]
                nx, ny = x + ddx, y + ddy
                if nx > width or ny < band_lo or ny > band_hi:
                    continue
                key = (nx, ny, step)
                nxt[key] = nxt.get(key, 0) + count
        states = nxt
    return sum(c for (x, y, _), c in states.items() if x == width and y == dy)


def enumerate_column_paths(L, u, l, budget=DEFAULT_BUDGET):
    """|W_L(u,l)|: uL-step directed paths from (0,0) to (L, lL), exactly."""
    n, vertical, d = lattice_sizes(L, u, l)
    _check_budget(n, budget)
    return _count_endpoint(n, int(L), d, -n, n)


def compositions(total, parts):
    """Number of ways to write ``total`` as an ordered sum of ``parts``
    positive integers (1 for the empty sum of 0)."""
    if parts == 0:
        return 1 if total == 0 else 0
    if total < parts:
        return 0
    return math.comb(total - 1, parts - 1)


@functools.lru_cache(maxsize=4096)
def _stretch_count(L, up, down):
    # L + 1 vertical-stretch slots; r of them non-empty, j of those going up
    total = 0
    for r in range(0, L + 2):
        slots = math.comb(L + 1, r)
        inner = 0
        for j in range(0, r + 1):
            inner += math.comb(r, j) * compositions(up, j) * compositions(down, r - j)
        total += slots * inner
    return total


def count_paths_stretch_form(L, u, l):
    """|W_L(u,l)| by summing over the number r of vertical stretches.

    Each of the L + 1 columns of lattice sites carries one signed vertical
    stretch (possibly empty). A path is a choice of r non-empty stretches,
    j of them upward, with the upward lengths composing (V + D)/2 and the
    downward lengths composing (V - D)/2. The r = 0 term counts the all-East
    path.
    """
    n, vertical, d = lattice_sizes(L, u, l)
    return _stretch_count(int(L), (vertical + d) // 2, (vertical - d) // 2)


def count_paths_restricted(L, u, l, cap, budget=None):
    """|W_L(u,l)| restricted to paths whose height stays within ``cap * L``
    of the band spanned by the two endpoints."""
    n, vertical, d = lattice_sizes(L, u, l)
    _check_budget(n, budget)
    slack = int(math.floor(cap * L))
    return _count_endpoint(n, int(L), d, min(0, d) - slack, max(0, d) + slack)


class MesoField:
    """Block labels Ω(j, k) for columns j ≥ 0 and rows |k| ≤ radius.

    Column j is drawn from its own counter-derived stream
    ``SeedSequence(meso_seed, spawn_key=(1, j))``, so labels do not depend
    on the order in which columns are requested.
    """

    def __init__(self, meso_seed, p, radius=DEFAULT_MESO_RADIUS):
        self.meso_seed = int(meso_seed)
        self.p = float(p)
        self.radius = int(radius)
        self._columns = {}

    def column(self, j):
        if j < 0:
            raise DomainError(f"column index must be non-negative, got {j}")
        labels = self._columns.get(j)
        if labels is None:
            rng = np.random.default_rng(np.random.SeedSequence(self.meso_seed, spawn_key=(1, j)))
            labels = np.where(rng.random(2 * self.radius + 1) < self.p, A, B).astype(np.int8)
            self._columns[j] = labels
        return labels

    def label(self, j, k):
        if abs(k) > self.radius:
            raise DisorderTooShort(f"row {k} outside the labelled band ±{self.radius}")
        return int(self.column(j)[k + self.radius])

    def window(self, j, center, radius):
        """Labels of column j for rows center-radius .. center+radius."""
        return tuple(self.label(j, k) for k in range(center - radius, center + radius + 1))


class FixedMeso:
    """Explicit block labels; rows not listed get ``default``."""

    def __init__(self, labels=None, default=A):
        self.labels = dict(labels or {})
        self.default = default

    def label(self, j, k):
        return self.labels.get((j, k), self.default)


class DisorderPair(namedtuple("DisorderPair", ["omega", "omega_seed", "meso", "meso_seed", "p"])):
    """Microscopic word ω and mesoscopic field Ω, both reproducible from seeds."""

    __slots__ = ()

    @classmethod
    def generate(cls, seed, n, p, meso_seed=None, radius=DEFAULT_MESO_RADIUS):
        meso_seed = seed if meso_seed is None else meso_seed
        return cls(
            omega=draw_omega(seed, n),
            omega_seed=int(seed),
            meso=MesoField(meso_seed, p, radius),
            meso_seed=int(meso_seed),
            p=float(p),
        )

    @classmethod
    def from_labels(cls, omega, meso):
        word = np.array([A if c == "A" else B for c in omega], dtype=np.int8)
        return cls(omega=word, omega_seed=None, meso=meso, meso_seed=None, p=None)


def draw_omega(seed, n, stream=0):
    """Fair-coin monomer labels; ``stream`` selects an independent sample."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(0, int(stream))))
    return rng.integers(0, 2, size=int(n), dtype=np.int8)


def monomer_charges(omega, params):
    """Per-monomer energy paid inside B: β for B-monomers, -α for A-monomers."""
    omega = np.asarray(omega)
    return np.where(omega == B, params.beta, -params.alpha).astype(float)


def _bond_blocks(p0, p1, L):
    """Blocks (column, row) whose closure contains the unit bond p0-p1."""
    (x0, y0), (x1, y1) = p0, p1
    if y0 == y1:
        column = min(x0, x1) // L
        if y0 % L == 0:
            return [(column, y0 // L - 1), (column, y0 // L)]
        return [(column, (y0 - 1) // L)]
    row = min(y0, y1) // L
    if x0 % L == 0 and x0 > 0:
        return [(x0 // L - 1, row), (x0 // L, row)]
    return [(max(x0 - 1, 0) // L, row)]


def bond_in_b(p0, p1, L, meso):
    """True iff the bond lies in B; an interface belongs to its A-block."""
    return all(meso.label(j, k) == B for j, k in _bond_blocks(p0, p1, L))


def bond_block(p0, p1, L):
    """The block (column, row) holding the bond under the half-open
    convention Λ(j, k) = (jL, (j+1)L] × (kL, (k+1)L]."""
    (x0, y0), (x1, y1) = p0, p1
    if y0 == y1:
        return min(x0, x1) // L, (y0 - 1) // L
    return max(x0 - 1, 0) // L, min(y0, y1) // L


def hamiltonian(path, dis, params, L):
    """Σ_i (β 1{ω_i=B} - α 1{ω_i=A}) 1{bond i lies in a B-block}."""
    if len(path) > len(dis.omega):
        raise DisorderTooShort(f"path of {len(path)} steps, only {len(dis.omega)} monomers")
    charges = monomer_charges(dis.omega[: len(path)], params)
    energy = 0.0
    for i, (p0, p1) in enumerate(path.bonds()):
        if bond_in_b(p0, p1, L, dis.meso):
            energy += charges[i]
    return energy


def column_exits(path, L):
    """Rows v_j of the last bond in each visited column j = 0, 1, ..."""
    exits = {}
    for p0, p1 in path.bonds():
        if p1[0] == 0:
            continue
        column = (p1[0] - 1) // L
        exits[column] = bond_block(p0, p1, L)[1]
    return [exits[j] for j in sorted(exits)]


def is_admissible(path, L, M):
    """Membership in W_{n,M}: consecutive column exits differ by at most M."""
    previous = 0
    for row in column_exits(path, L):
        if abs(row - previous) > M:
            return False
        previous = row
    return True


def _log_sum(values):
    finite = [v for v in values if v != -math.inf]
    return float(logsumexp(finite)) if finite else -math.inf


def log_partition(n, L_n, dis, params, M=None):
    """log Σ_{π ∈ W_{n,M}} exp(H(π)), by memoized recursion over
    (step, x, y, last move, previous exit row, current exit row)."""
    M = params.M if M is None else M
    if n > len(dis.omega):
        raise DisorderTooShort(f"{n} steps, only {len(dis.omega)} monomers")
    charges = monomer_charges(dis.omega[:n], params)
    meso = dis.meso

    @functools.lru_cache(maxsize=None)
    def tail(i, x, y, last, v_prev, v_cur):
        if i == n:
            if v_cur is not None and abs(v_cur - v_prev) > M:
                return -math.inf
            return 0.0
        branches = []
        for step in STEPS:
            if REVERSAL.get(last) == step:
                continue
            dx, dy = MOVES[step]
            nx, ny = x + dx, y + dy
            p0, p1 = (x, y), (nx, ny)
            prev, cur = v_prev, v_cur
            if dx and x > 0 and x % L_n == 0:
                # leaving column x // L_n - 1 for the next one
                if abs(cur - prev) > M:
                    continue
                prev = cur
            cur = bond_block(p0, p1, L_n)[1] if nx > 0 else cur
            energy = charges[i] if bond_in_b(p0, p1, L_n, meso) else 0.0
            value = tail(i + 1, nx, ny, step, prev, cur)
            if value != -math.inf:
                branches.append(energy + value)
        return _log_sum(branches)

    return tail(0, 0, 1, None, 0, None)


def finite_free_energy(n, L_n, dis, params, budget=DEFAULT_PATH_BUDGET):
    """(1/n) log Z_{n,M} over W_{n,M} for fixed disorder."""
    _check_budget(n, budget)
    value = log_partition(n, L_n, dis, params) / n
    logger.debug("f_%d(L_n=%d) = %r", n, L_n, value)
    return value


def brute_force_free_energy(n, L_n, dis, params):
    """Same quantity by listing every path; for cross-checking only."""
    terms = [
        hamiltonian(path, dis, params, L_n)
        for path in enumerate_paths(n)
        if is_admissible(path, L_n, params.M)
    ]
    return float(logsumexp(terms)) / n


# ---------------------------------------------------------------------------
# strip dynamic program shared by the column and interface partition functions


def strip_log_partition(
    n,
    width,
    y_lo,
    y_hi,
    y_start,
    y_end,
    charges,
    h_charged,
    v_charged,
    touch=None,
    trace=False,
):
    """Log partition functions of n-step paths in [0, width] × [y_lo, y_hi].

    Paths start at (0, y_start), end at (width, y_end), and step i pays
    ``charges[i]`` when its bond is charged. ``h_charged[y - y_lo]`` flags
    horizontal bonds at height y and ``v_charged[y - y_lo]`` the vertical bond
    from y to y + 1. ``charges`` may be 2-D (steps × samples); all samples
    are run in one batch.

    With ``touch`` (a boolean mask over heights) the result is split into
    paths that never visit a flagged height and paths that do, along the
    last axis. With ``trace`` the value at (width, y_end) is returned after
    every step instead of only after n steps.
    """
    charges = np.asarray(charges, dtype=float)
    if charges.ndim == 1:
        charges = charges[:, None]
    if charges.shape[0] < n:
        raise DisorderTooShort(f"{n} steps, only {charges.shape[0]} charges")
    samples = charges.shape[1]
    rows = y_hi - y_lo + 1
    flags = 1 if touch is None else 2
    h = np.asarray(h_charged, dtype=float)
    v = np.asarray(v_charged, dtype=float)
    touch = None if touch is None else np.asarray(touch, dtype=bool)

    # state[s, f, move, x, y]; move 0 = East (or start), 1 = North, 2 = South
    state = np.full((samples, flags, 3, width + 1, rows), -np.inf)
    start_flag = 1 if touch is not None and touch[y_start - y_lo] else 0
    state[:, start_flag, 0, 0, y_start - y_lo] = 0.0
    ye = y_end - y_lo
    history = [] if trace else None
    if trace:
        history.append(_endpoint(state, width, ye))
    with np.errstate(invalid="ignore"):
        for i in range(n):
            c = charges[i][:, None, None, None]
            fresh = np.full_like(state, -np.inf)
            anywhere = np.logaddexp(np.logaddexp(state[:, :, 0], state[:, :, 1]), state[:, :, 2])
            fresh[:, :, 0, 1:, :] = anywhere[:, :, :-1, :] + c * h
            up = np.logaddexp(state[:, :, 0], state[:, :, 1])
            fresh[:, :, 1, :, 1:] = up[:, :, :, :-1] + c * v[:-1]
            down = np.logaddexp(state[:, :, 0], state[:, :, 2])
            fresh[:, :, 2, :, :-1] = down[:, :, :, 1:] + c * v[:-1]
            if touch is not None:
                hit = fresh[..., touch]
                fresh[:, 1][..., touch] = np.logaddexp(hit[:, 1], hit[:, 0])
                fresh[:, 0][..., touch] = -np.inf
            state = fresh
            if trace:
                history.append(_endpoint(state, width, ye))
    if trace:
        return np.stack(history)
    return _endpoint(state, width, ye)


def _endpoint(state, width, ye):
    # log-sum over the last move at (width, y_end): shape (samples, flags)
    at_end = state[:, :, :, width, ye]
    return logsumexp(at_end, axis=2)


def column_log_partition(theta, u, L, charges):
    """log Z^ω_L(Θ,u) over W_{Θ,u,L} for each column of ``charges``.

    Heights are measured from the column floor: block k holds heights
    (kL, (k+1)L], the path enters at b₀L and leaves at (ΔΠ + b₁)L.
    """
    from copolymer.column import geometry

    geo = geometry(theta)
    n = as_fraction(u) * L
    y0, y1 = as_fraction(theta.b0) * L, (theta.dpi + as_fraction(theta.b1)) * L
    if n.denominator != 1 or y0.denominator != 1 or y1.denominator != 1:
        raise DomainError(f"(Θ, u={u}) is not on the 1/{L} lattice")
    n, y0, y1 = int(n), int(y0), int(y1)
    if n - L < abs(y1 - y0) or (n - L - abs(y1 - y0)) % 2:
        raise EmptyPathSet(f"no {n}-step path joins the entry and exit of this column")
    # vertices stay strictly inside the labelled window of blocks
    radius = theta.radius
    y_lo, y_hi = -radius * L + 1, (radius + 1) * L - 1
    slack = (n - L - abs(y1 - y0)) // 2
    y_lo = max(y_lo, min(y0, y1) - slack)
    y_hi = min(y_hi, max(y0, y1) + slack)

    heights = np.arange(y_lo, y_hi + 1)
    h_charged = np.array([_strip_label(theta, y, L, horizontal=True) == B for y in heights])
    v_charged = np.array([_strip_label(theta, y, L, horizontal=False) == B for y in heights])
    touch = None
    if geo.nint_class != "int":
        walls = {k * L for k in geo.interfaces}
        touch = np.array([y in walls for y in heights])
    result = strip_log_partition(
        n, L, y_lo, y_hi, y0, y1, charges, h_charged, v_charged, touch=touch
    )
    if touch is None:
        return result[:, 0]
    return result[:, 0] if theta.x == 1 else result[:, 1]


def _strip_label(theta, y, L, horizontal):
    if horizontal:
        if y % L == 0:
            below, above = theta.label(y // L - 1), theta.label(y // L)
            return B if below == B and above == B else A
        return theta.label((y - 1) // L)
    return theta.label(y // L)


def column_free_energy_finite(theta, u, L, omega_samples, seed, params):
    """Monte Carlo mean and standard error of (1/uL) log Z^ω_L(Θ,u)."""
    n = int(as_fraction(u) * L)
    charges = np.stack(
        [monomer_charges(draw_omega(seed, n, stream=s), params) for s in range(omega_samples)],
        axis=1,
    )
    logz = column_log_partition(theta, u, L, charges)
    if not np.all(np.isfinite(logz)):
        raise EmptyPathSet(f"W_(Θ,u={u},L={L}) is empty")
    values = logz / n
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
    return mean, stderr
