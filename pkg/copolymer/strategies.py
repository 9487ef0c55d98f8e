"""Slope measures sampled from a micro-emulsion.

A coarse-grained strategy walks the block field Ω column by column and picks
the block row of the next column, moving at most M rows per column. Every
visited column becomes a column type Θ (the labels around the current row,
the displacement, the entry and exit heights and the interface tag); the
empirical distribution of those types is lifted to a slope measure with
heuristic width fractions.

The family is a finite stand-in for the set of admissible slope measures,
so every free energy computed over it is a lower bound.
"""
import logging
from collections import Counter
from fractions import Fraction

import numpy as np

from copolymer.column import ColumnType, geometry
from copolymer.errors import MalformedWindow
from copolymer.oracle import A, B, MesoField
from copolymer.varform import ColumnMeasure, FractionProfile, SlopeMeasure, lift_measure, rho_hor

logger = logging.getLogger(__name__)

DEFAULT_COLUMNS = 10000
DEFAULT_MEMBERS = 12
DEFAULT_BAND = 64
MIDDLE = Fraction(1, 2)
TOP = Fraction(1)


class Walk:
    """Rows (and on-interface flags) visited by one strategy."""

    def __init__(self, name, rows, walls=None):
        self.name = name
        self.rows = list(rows)
        self.walls = list(walls) if walls is not None else [False] * len(self.rows)

    def __len__(self):
        return len(self.rows) - 1


class StrategySampler:
    """Coarse-grained strategies on one seeded block field.

    :param p: probability that a block is A
    :param M: largest row change per column
    :param meso_seed: seed of the block field
    :param columns: columns walked per strategy
    :param m: step cap per column; column types needing more fall back to
        a mid-block crossing
    :param band: rows a strategy may use on either side of row 0
    """

    def __init__(self, p, M, meso_seed, columns=DEFAULT_COLUMNS, m=None, band=DEFAULT_BAND):
        self.p = float(p)
        self.M = int(M)
        self.m = self.M + 2 if m is None else int(m)
        self.columns = int(columns)
        self.window = self.M + 1
        self.band = int(band)
        self.field = MesoField(meso_seed, p, radius=self.band + self.window + 1)
        self._labels = None

    @property
    def labels(self):
        """Labels as an array (column, row + radius)."""
        if self._labels is None:
            self._labels = np.stack([self.field.column(j) for j in range(self.columns + 1)])
        return self._labels

    def label(self, j, k):
        return int(self.labels[j, k + self.field.radius])

    def is_wall(self, j, k):
        """True when the top of block (j, k) is an AB-interface."""
        return self.label(j, k) != self.label(j, k + 1)

    def _clamp(self, k):
        return max(-self.band, min(self.band, k))

    # -- strategies ------------------------------------------------------

    def straight(self, start=0):
        return Walk(f"straight({start})", [start] * (self.columns + 1))

    def a_seeking(self, reach=None, prefer_up=True):
        """Move to the nearest A-block of the next column within ``reach`` rows."""
        reach = self.M if reach is None else min(int(reach), self.M)
        order = sorted(range(-reach, reach + 1), key=lambda d: (abs(d), -d if prefer_up else d))
        rows = [0]
        for j in range(self.columns):
            k = rows[-1]
            target = k
            for d in order:
                if abs(k + d) <= self.band and self.label(j + 1, k + d) == A:
                    target = k + d
                    break
            rows.append(target)
        return Walk(f"a_seeking(reach={reach},{'up' if prefer_up else 'down'})", rows)

    def interface_hugging(self, reach=None):
        """Ride the nearest AB-interface of the next column within ``reach`` rows."""
        reach = self.M if reach is None else min(int(reach), self.M)
        order = sorted(range(-reach, reach + 1), key=lambda d: (abs(d), -d))
        rows, walls = [0], [self.is_wall(0, 0)]
        for j in range(self.columns):
            k = rows[-1]
            target, wall = k, False
            for d in order:
                if abs(k + d) <= self.band and self.is_wall(j + 1, k + d):
                    target, wall = k + d, True
                    break
            rows.append(target)
            walls.append(wall)
        return Walk(f"interface_hugging(reach={reach})", rows, walls)

    def b_weighted(self, travel_cost=0.5):
        """Least-cost rows when time in B costs one per block and every row
        of vertical travel costs ``travel_cost``."""
        radius = self.field.radius
        rows = np.arange(-self.band, self.band + 1)
        in_b = (self.labels[:, rows + radius] == B).astype(float)
        size = len(rows)
        cost = np.full(size, np.inf)
        cost[self.band] = 0.0
        back = np.zeros((self.columns, size), dtype=np.int16)
        for j in range(self.columns):
            best = np.full(size, np.inf)
            choice = np.zeros(size, dtype=np.int16)
            prefix = np.concatenate(([0.0], np.cumsum(in_b[j])))
            for d in range(-self.M, self.M + 1):
                lo, hi = max(0, -d), min(size, size - d)
                src = np.arange(lo, hi)
                dst = src + d
                low, high = np.minimum(src, dst), np.maximum(src, dst)
                # B-blocks crossed strictly between the entry and exit rows
                between = prefix[high] - prefix[np.minimum(low + 1, high)]
                total = cost[src] + in_b[j, src] + between + travel_cost * abs(d)
                better = total < best[dst]
                best[dst[better]] = total[better]
                choice[dst[better]] = src[better]
            cost, back[j] = best, choice
        path = [int(np.argmin(cost))]
        for j in range(self.columns - 1, -1, -1):
            path.append(int(back[j, path[-1]]))
        path.reverse()
        return Walk(f"b_weighted(travel={travel_cost})", [int(rows[i]) for i in path])

    # -- column types ----------------------------------------------------

    def _column_type(self, j, k, k_next, on_wall, next_on_wall):
        chi = tuple(self.label(j, k + r) for r in range(-self.window, self.window + 1))
        dpi = k_next - k
        b0 = TOP if on_wall else MIDDLE
        b1 = TOP if next_on_wall else MIDDLE
        for x in (1, 2):
            try:
                theta = ColumnType(chi, dpi, b0, b1, x)
                if geometry(theta).t <= self.m:
                    return theta
            except MalformedWindow:
                continue
        return ColumnType(chi, dpi, MIDDLE, MIDDLE, 1)

    def column_measure(self, walk):
        """Empirical distribution of the column types a walk visits."""
        counts = Counter()
        for j in range(len(walk)):
            key = (j, walk.rows[j], walk.rows[j + 1], walk.walls[j], walk.walls[j + 1])
            counts[self._column_type(*key)] += 1
        atoms = sorted(counts.items(), key=lambda item: repr(item[0]))
        return ColumnMeasure.normalized(atoms, label=walk.name)

    def avoids_b(self, walk):
        return all(self.label(j, k) == A for j, k in enumerate(walk.rows))

    def walks(self, count):
        """``count`` walks cycling through the strategy variants."""
        variants = []
        for reach in range(self.M, 0, -1):
            variants.append(lambda reach=reach: self.a_seeking(reach, prefer_up=True))
            variants.append(lambda reach=reach: self.a_seeking(reach, prefer_up=False))
            variants.append(lambda reach=reach: self.interface_hugging(reach))
        variants.insert(1, self.straight)
        for travel in (0.25, 0.5, 1.0, 2.0):
            variants.append(lambda travel=travel: self.b_weighted(travel))
        for start in range(1, count + 1):
            variants.append(lambda start=start: self.straight(start))
        return [variant() for variant in variants[:count]]


def measure_family_from_disorder(
    p, M, meso_seed, strategies=DEFAULT_MEMBERS, columns=DEFAULT_COLUMNS, interface_floor=0.1, m=None
):
    """A reproducible family of ``strategies`` slope measures.

    ρ̄_hor is always a member, δ_{A,0} is added when an A-seeking walk finds
    a path through A-blocks only, and the rest are lifts of strategy walks.
    """
    sampler = StrategySampler(p, M, meso_seed, columns=columns, m=m)
    family = [rho_hor(p)]
    walks = sampler.walks(max(strategies, 1))
    if any(sampler.avoids_b(walk) for walk in walks if walk.name.startswith("a_seeking")):
        family.append(SlopeMeasure.delta_A(0.0))
    for walk in walks:
        if len(family) >= strategies:
            break
        rho = sampler.column_measure(walk)
        measure = lift_measure(rho, FractionProfile.heuristic(rho, interface_floor))
        measure.label = walk.name
        family.append(measure)
    logger.info("sampled %d slope measures (p=%r, M=%r, seed=%r)", len(family), p, M, meso_seed)
    return family[:strategies]
