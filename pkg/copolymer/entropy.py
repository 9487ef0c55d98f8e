"""Path entropy κ̃(u, l) of directed paths crossing one column.

A path crossing a column of width L makes L East steps and one signed
vertical stretch in each of the L + 1 vertical slots. Its entropy per step
in the limit L → ∞ is the Legendre transform of the per-slot generating
function

    g(x, y) = 1 + xy / (1 - xy) + (x/y) / (1 - x/y),

and both tilting parameters are available in closed form: with A and B the
mean up- and down-stretch intensities, A - B = l and A + B solves a
quadratic. Everything below is expressed through (A, B), which keeps the
evaluation stable up to the boundary u = 1 + |l|.
"""
import functools
import logging
import math
import threading
from collections import namedtuple

import numpy as np
from scipy.optimize import brentq

from copolymer import oracle
from copolymer.errors import DomainError

logger = logging.getLogger(__name__)

LOG3 = math.log(3.0)
DEFAULT_LADDER = (8, 16, 32, 64)
DEFAULT_TOLERANCE = 1e-10
SLOPE_TOLERANCE = 1e-9

# offsets below this are indistinguishable from the boundary u = 1 + |l|
_MIN_OFFSET = 1e-300

Tilts = namedtuple("Tilts", ["x", "y"])


def _offset(u, l):
    l = abs(float(l))
    d = float(u) - 1.0 - l
    if d < 0:
        if d < -1e-12 * max(1.0, float(u)):
            raise DomainError(f"u={u} is below 1 + |l| = {1 + l}")
        d = 0.0
    return d, l


def _intensities(d, l):
    """Mean up/down stretch intensities (A, B) at offset d = u - 1 - l."""
    spread = d * (d + 2.0 * l)
    down = 0.5 * (d + spread / (1.0 + math.sqrt(1.0 + spread)))
    return down + l, down


def _log_ratio(z):
    # log(z / (1 + z)), -inf at z = 0
    return math.log(z) - math.log1p(z) if z > 0 else -math.inf


@functools.lru_cache(maxsize=65536)
def _growth(d, l):
    up, down = _intensities(d, l)
    value = math.log1p(up + down)
    if d + 2.0 * l > 0:
        value -= 0.5 * (d + 2.0 * l) * _log_ratio(up)
    if d > 0:
        value -= 0.5 * d * _log_ratio(down)
    return value


def path_growth(u, l):
    """u·κ̃(u, l): exponential growth rate of the path count per column."""
    return _growth(*_offset(u, l))


def growth_array(u, l):
    """Vectorized u·κ̃(u, l); -inf where u < 1 + |l|."""
    u = np.asarray(u, dtype=float)
    l = np.abs(np.asarray(l, dtype=float))
    d = u - 1.0 - l
    feasible = d >= -1e-12 * np.maximum(1.0, u)
    d = np.maximum(d, 0.0)
    spread = d * (d + 2.0 * l)
    down = 0.5 * (d + spread / (1.0 + np.sqrt(1.0 + spread)))
    up = down + l
    with np.errstate(divide="ignore", invalid="ignore"):
        log_up = np.where(up > 0, np.log(np.where(up > 0, up, 1.0)) - np.log1p(up), 0.0)
        log_down = np.where(down > 0, np.log(np.where(down > 0, down, 1.0)) - np.log1p(down), 0.0)
    value = np.log1p(up + down) - 0.5 * (d + 2.0 * l) * log_up - 0.5 * d * log_down
    return np.where(feasible, value, -np.inf)


def kappa(u, l):
    """κ̃(u, l), continuous up to and including u = 1 + |l|."""
    u = float(u)
    return _growth(*_offset(u, l)) / u


def kappa_tilts(u, l):
    """Tilting parameters (x, y) of the Legendre transform at (u, l).

    x marks vertical steps and y the signed displacement; y is infinite on
    the boundary u = 1 + |l| when l ≠ 0.
    """
    d, l_abs = _offset(u, l)
    up, down = _intensities(d, l_abs)
    log_q, log_r = _log_ratio(up), _log_ratio(down)
    x = math.exp(0.5 * (log_q + log_r)) if log_r > -math.inf else 0.0
    if up == down:
        y = 1.0
    elif log_r == -math.inf:
        y = math.inf
    else:
        y = math.exp(0.5 * (log_q - log_r))
    return Tilts(x, y if l >= 0 else 1.0 / y)


def _slope(d, l):
    up, down = _intensities(d, l)
    return -0.5 * (_log_ratio(up) + _log_ratio(down))


def growth_slope(u, l):
    """∂_u(u·κ̃(u, l)); +inf on the boundary."""
    return _slope(*_offset(u, l))


def perspective(h, a, l):
    """h·W(a/h, l/h) with W(v, l) = v·κ̃(v, l), and its partials in h and a.

    Offsets below the boundary are clamped to it, so the result stays
    finite for slightly infeasible (h, a). Requires h > 0.
    """
    h, a, l = float(h), float(a), abs(float(l))
    lam = l / h
    d = max(a / h - 1.0 - lam, _MIN_OFFSET)
    up, down = _intensities(d, lam)
    log_q, log_r = _log_ratio(up), _log_ratio(down)
    slope = -0.5 * (log_q + log_r)
    # ∂_l W = -log y
    tilt = -0.5 * (log_q - log_r)
    growth = _growth(d, lam)
    return h * growth, growth - (1.0 + lam + d) * slope - lam * tilt, slope


def _g_closed(a, b, gap):
    # gap = a - 1 - b > 0, passed separately to keep its precision
    root = math.sqrt(gap * (2.0 + gap) + b * b)
    delta = b / (2.0 * (1.0 + b)) * (a + 1.0 - root)
    first = (2.0 + gap) / (2.0 + gap - 2.0 * delta)
    # (a-1-b) / (a-1-b-2ε) with ε rationalised; finite at b = 1
    second = (root + gap + b) / (gap * (1.0 + (2.0 + gap) / (root + b)))
    return 0.5 * (math.log(first) + math.log(second))


def kappa_G(a, b):
    """Closed-form derivative G(a, b) of u·κ̃ at v = a/b, l = 1/b.

    Requires a > 1 + b > 1.
    """
    a, b = float(a), float(b)
    gap = a - 1.0 - b
    if b <= 0 or gap <= 0:
        raise DomainError(f"G(a={a}, b={b}) needs b > 0 and a > 1 + b")
    return _g_closed(a, b, gap)


def _finite_difference(v, h):
    f = lambda t: _growth(t - 1.0, 0.0)  # noqa: E731
    return (-f(v + 2 * h) + 8 * f(v + h) - 8 * f(v - h) + f(v - 2 * h)) / (12 * h)


def kappa_derivative(v, l):
    """∂_u(u·κ̃(u, l)) at u = v.

    The closed form G is used for l ≠ 0; at l = 0 it is singular, so a
    fourth-order central difference of u·κ̃(u, 0) is returned instead.
    """
    v, l = float(v), abs(float(l))
    if v <= 1.0 + l:
        raise DomainError(f"v={v} must exceed 1 + |l| = {1 + l}")
    if l == 0:
        h = min(1e-3 * v, (v - 1.0) / 4.0)
        return _finite_difference(v, h)
    return _g_closed(v / l, 1.0 / l, (v - 1.0 - l) / l)


def _offset_at_slope(c, l):
    """Closed-form inverse of the slope: x = e^{-c} fixes A·B and A - B = l.

    Returns the offset d = v - 1 - l = 2B(1 + B) / (1 + A + B).
    """
    if l == 0:
        return 1.0 / math.sinh(c) if c < 710 else 0.0
    x2 = math.exp(-2.0 * c)
    keep = -math.expm1(-2.0 * c)
    lin = l - x2 * (2.0 + l)
    disc = math.sqrt(lin * lin + 4.0 * keep * x2 * (1.0 + l))
    if lin >= 0:
        down = 2.0 * x2 * (1.0 + l) / (lin + disc)
    else:
        down = (disc - lin) / (2.0 * keep)
    return 2.0 * down * (1.0 + down) / (1.0 + 2.0 * down + l)


def chi_inverse(c, l):
    """The unique v > 1 + |l| with ∂_u(u·κ̃(u, l))(v) = c.

    Slopes beyond what a double-precision offset can resolve map to the
    boundary 1 + |l|.
    """
    c, l = float(c), abs(float(l))
    if not c > 0:
        raise DomainError(f"slope must be positive, got {c}")
    d = _offset_at_slope(c, l)
    if d <= 0:
        return 1.0 + l
    if abs(_slope(d, l) - c) <= SLOPE_TOLERANCE * max(1.0, c):
        return 1.0 + l + d
    logger.debug("closed-form inverse off at c=%r l=%r; bracketing", c, l)
    return 1.0 + l + _bracketed_offset(c, l)


def _bracketed_offset(c, l):
    residual = lambda d: _slope(d, l) - c  # noqa: E731
    lo, hi = 1.0, 1.0
    while residual(lo) < 0:
        lo *= 0.5
        if lo < _MIN_OFFSET:
            return 0.0
    while residual(hi) > 0:
        hi *= 2.0
    if lo == hi:
        return lo
    return brentq(residual, lo, hi, xtol=_MIN_OFFSET, rtol=4 * np.finfo(float).eps, maxiter=500)


def kappa_finite(L, u, l):
    """κ̃_L(u, l) = log|W_L(u, l)| / (uL), exact from the stretch count."""
    count = oracle.count_paths_stretch_form(L, u, l)
    n = float(oracle.as_fraction(u) * L)
    return math.log(count) / n


def kappa_finite_restricted(L, u, l, cap):
    """Finite-L entropy of the paths whose height stays within cap·L of
    the band between their endpoints."""
    count = oracle.count_paths_restricted(L, u, l, cap)
    if count == 0:
        return -math.inf
    n = float(oracle.as_fraction(u) * L)
    return math.log(count) / n


def extrapolate_kappa(u, l, ladder=DEFAULT_LADDER):
    """Estimate κ̃(u, l) from exact counts along a ladder of block sizes.

    log|W_L| + γ·log L is fitted to w·L + c₀ + c₁/L by least squares, with
    γ = 1 in the interior and 1/2 on the boundary u = 1 + |l| (local limit
    theorem exponents). Returns (estimate, {L: κ̃_L}).
    """
    points = {}
    for L in ladder:
        try:
            points[L] = kappa_finite(L, u, l)
        except DomainError:
            continue
    if len(points) < 3:
        raise DomainError(f"(u={u}, l={l}) lies on fewer than three ladder lattices")
    d, l_abs = _offset(u, l)
    if d == 0 and l_abs == 0:
        return 0.0, points
    gamma = 0.5 if d == 0 and l != 0 else 1.0
    sizes = np.array(sorted(points), dtype=float)
    n = float(u) * sizes
    target = np.array([points[int(L)] for L in sizes]) * n + gamma * np.log(sizes)
    design = np.column_stack([sizes, np.ones_like(sizes), 1.0 / sizes])
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    return float(coef[0]) / float(u), points


def max_kappa_zero_slope():
    """(max_u κ̃(u, 0), argmax): where the slope equals the mean entropy."""
    stationary = lambda u: _slope(u - 1.0, 0.0) - _growth(u - 1.0, 0.0) / u  # noqa: E731
    u_star = brentq(stationary, 1.5, 4.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return _growth(u_star - 1.0, 0.0) / u_star, u_star


class EntropyEvaluator:
    """κ̃ and its derivatives with a shared, lock-protected cache.

    :param ladder: block sizes used by :meth:`extrapolate`
    :param tol: target accuracy of the closed-form duality
    :param cache: keep computed values; disable when sharing is unwanted
    """

    def __init__(self, ladder=DEFAULT_LADDER, tol=DEFAULT_TOLERANCE, cache=True):
        self.ladder = tuple(int(L) for L in ladder)
        self.tol = float(tol)
        self._cache = {} if cache else None
        self._lock = threading.Lock()

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

    def kappa(self, u, l):
        return self._cached(("kappa", float(u), abs(float(l))), lambda: kappa(u, l))

    def growth(self, u, l):
        return self._cached(("growth", float(u), abs(float(l))), lambda: path_growth(u, l))

    def kappa_finite(self, L, u, l):
        key = ("finite", int(L), oracle.as_fraction(u), abs(oracle.as_fraction(l)))
        return self._cached(key, lambda: kappa_finite(L, u, l))

    def derivative(self, v, l):
        return kappa_derivative(v, l)

    def chi_inverse(self, c, l):
        return self._cached(("inverse", float(c), abs(float(l))), lambda: chi_inverse(c, l))

    def extrapolate(self, u, l):
        return extrapolate_kappa(u, l, self.ladder)

    def clear(self):
        if self._cache is not None:
            with self._lock:
                self._cache.clear()

    def __repr__(self):
        return f"EntropyEvaluator(ladder={self.ladder}, tol={self.tol})"
