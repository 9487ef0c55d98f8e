"""Free energy φ_I(μ) of a path travelling along one flat AB-interface.

The interface is the horizontal line y = 0 with A above and B below; a path
of μL steps runs from (0, 0) to (L, 0) and pays the B-solvent charge on
every bond strictly below the line. Finite-L values are exact dynamic
programs per disorder word, the quenched average is a Monte Carlo mean, and
the infinite-L value is extrapolated along a ladder of block sizes through
the excess over the path entropy κ̃(μ, 0).

An :class:`InterfaceTable` stores the estimates on a μ-grid together with
the least concave majorant of μ ↦ μ·φ_I(μ), which is what the column
solver and the speed maximizer query.
"""
import concurrent.futures
import json
import logging
import math
from collections import namedtuple
from fractions import Fraction

import numpy as np

from copolymer import entropy, oracle, registry
from copolymer.config import ModelParams
from copolymer.errors import DisorderTooShort, DomainError, TableMissing, ValidationError

logger = logging.getLogger(__name__)

TABLE_VERSION = 1
DEFAULT_LADDER = (8, 16, 32)
DEFAULT_SAMPLES = 200
DEFAULT_MU_MAX = 8.0
DEFAULT_MU_STEP = 0.1

# the entropic floor μ ↦ μ·κ̃(μ, 0) enters the majorant through samples
# at μ = 1 + 10^k, k on this range
_FLOOR_DECADES = (-8.0, 6.0)
_FLOOR_SAMPLES = 4000

PhiEstimate = namedtuple("PhiEstimate", ["estimate", "error", "sizes"])
Located = namedtuple("Located", ["v", "saturated"])
Conjugate = namedtuple("Conjugate", ["value", "v", "saturated"])


def _lattice_steps(L, mu):
    n = oracle.as_fraction(mu) * L
    if n.denominator != 1 or n < L or (n - L) % 2:
        raise DomainError(f"mu={mu} is not in 1 + 2N/{L}")
    return int(n)


def snap_mu(mu, L):
    """The point of 1 + 2N/L closest to ``mu``."""
    k = max(0, int(round((float(mu) - 1.0) * L / 2.0)))
    return 1 + Fraction(2 * k, int(L))


def _interface_strip(L, n):
    slack = max(0, (n - L) // 2)
    heights = np.arange(-slack, slack + 1)
    below = heights < 0
    # a horizontal bond at height y and the vertical bond (y, y + 1) are
    # both strictly below the line iff y ≤ -1
    return -slack, slack, below, below


def interface_partition(L, mu, omega, params):
    """log Z^{ω,I}_{L,μ} for one disorder word ``omega`` (labels 0 = A, 1 = B)."""
    n = _lattice_steps(L, mu)
    omega = np.asarray(omega)
    if len(omega) < n:
        raise DisorderTooShort(f"{n} steps, only {len(omega)} monomers")
    charges = oracle.monomer_charges(omega[:n], params)
    y_lo, y_hi, h_charged, v_charged = _interface_strip(L, n)
    logz = oracle.strip_log_partition(n, L, y_lo, y_hi, 0, 0, charges, h_charged, v_charged)
    return float(logz[0, 0])


def _stream_charges(seed, streams, n, n_draw, params):
    return np.stack(
        [
            oracle.monomer_charges(oracle.draw_omega(seed, n_draw, stream=s)[:n], params)
            for s in streams
        ],
        axis=1,
    )


def sweep(L, n_max, params, seed, streams, n_draw=None):
    """log Z^{ω,I} at every length n ≤ n_max, one row per n and one column
    per disorder stream.

    All lengths are read off a single dynamic program, so every μ of a table
    sees the same disorder words. Lengths off the parity lattice are -inf.
    """
    n_draw = n_max if n_draw is None else max(n_draw, n_max)
    streams = list(streams)
    charges = _stream_charges(seed, streams, n_max, n_draw, params)
    y_lo, y_hi, h_charged, v_charged = _interface_strip(L, n_max)
    logger.debug("interface sweep L=%d n=%d rows=%d samples=%d", L, n_max, y_hi - y_lo + 1, len(streams))
    history = oracle.strip_log_partition(
        n_max, L, y_lo, y_hi, 0, 0, charges, h_charged, v_charged, trace=True
    )
    return history[:, :, 0]


def _mean_and_error(values):
    values = np.asarray(values, dtype=float)
    mean = float(np.mean(values))
    if len(values) < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / math.sqrt(len(values)))


def phi_finite(L, mu, samples, seed, params):
    """Monte Carlo (mean, standard error) of (1/μL)·log Z^{ω,I}_{L,μ}."""
    if samples < 2:
        raise DomainError(f"need at least 2 disorder samples, got {samples}")
    n = _lattice_steps(L, mu)
    logz = sweep(L, n, params, seed, range(samples))[n]
    return _mean_and_error(logz / n)


def _extrapolate_excess(sizes, excess, errors):
    """Fit e_L = e∞ + b/L; returns (e∞, its standard error)."""
    excess = np.asarray(excess, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(sizes) == 1:
        return float(excess[0]), float(errors[0])
    design = np.column_stack([np.ones(len(sizes)), 1.0 / np.asarray(sizes, dtype=float)])
    weights = np.linalg.pinv(design)[0]
    return float(weights @ excess), float(math.sqrt(np.sum((weights * errors) ** 2)))


def phi(mu, params, ladder=DEFAULT_LADDER, samples=DEFAULT_SAMPLES, seed=0):
    """Infinite-L estimate of φ_I(μ) with an error bar.

    Each block size L evaluates the nearest lattice point μ_L ∈ 1 + 2N/L
    and contributes the excess φ_L(μ_L) - κ̃_L(μ_L, 0); the excess is
    extrapolated linearly in 1/L and added to κ̃(μ, 0). Since φ_I ≥ κ̃(·, 0)
    the excess is floored at zero. The error bar combines the statistical
    error of the fit and its distance to the largest-L excess.
    """
    mu = float(mu)
    if mu < 1.0:
        raise DomainError(f"mu must be at least 1, got {mu}")
    if mu == 1.0:
        return PhiEstimate(0.0, 0.0, ())
    sizes, excess, errors = [], [], []
    for L in ladder:
        mu_L = snap_mu(mu, L)
        mean, stderr = phi_finite(L, mu_L, samples, seed, params)
        excess.append(mean - entropy.kappa_finite(L, mu_L, 0))
        errors.append(stderr)
        sizes.append(int(L))
    e_inf, stderr = _extrapolate_excess(sizes, excess, errors)
    error = math.hypot(stderr, e_inf - excess[-1])
    return PhiEstimate(entropy.kappa(mu, 0) + max(e_inf, 0.0), error, tuple(sizes))


def _upper_hull(xs, ys):
    """Vertices of the least concave majorant of points sorted by x."""
    hull = []
    for x, y in zip(xs, ys):
        if hull and x == hull[-1][0]:
            if y <= hull[-1][1]:
                continue
            hull.pop()
        while len(hull) >= 2:
            (ox, oy), (ax, ay) = hull[-2], hull[-1]
            if (ax - ox) * (y - oy) - (ay - oy) * (x - ox) >= 0:
                hull.pop()
            else:
                break
        hull.append((x, y))
    return hull


def _entropic_conjugate(c):
    # sup_μ [μκ̃(μ, 0) - c(μ - 1)] = 2 artanh(e^{-c}), attained at 1 + 1/sinh(c)
    x = math.exp(-c)
    value = math.log1p(x) - math.log(-math.expm1(-c))
    return value, entropy.chi_inverse(c, 0.0)


class InterfaceTable:
    """Interface free energy on a μ-grid and its concave envelope.

    :param params: the :class:`~copolymer.config.ModelParams` it was built for
    :param grid: increasing μ-values starting at 1
    :param estimates: φ_I estimates on the grid
    :param errors: error bars on the grid
    :param sizes: block sizes used per grid point
    :param exact: the table is the entropic one, φ_I = κ̃(·, 0) with no error
    """

    def __init__(
        self,
        params,
        grid,
        estimates,
        errors,
        sizes=None,
        samples=0,
        seed=None,
        ladder=(),
        exact=False,
    ):
        self.params = params
        self.grid = np.asarray(grid, dtype=float)
        self.estimates = np.asarray(estimates, dtype=float)
        self.errors = np.asarray(errors, dtype=float)
        self.sizes = [tuple(s) for s in sizes] if sizes is not None else [()] * len(self.grid)
        self.samples = int(samples)
        self.seed = seed
        self.ladder = tuple(int(L) for L in ladder)
        self.exact = bool(exact)
        self._check()
        self._nodes = None if self.exact else self._build_envelope()

    def _check(self):
        errors = {}
        if len(self.grid) < 2:
            errors["grid"] = ValidationError("grid needs at least two points")
        elif self.grid[0] != 1.0 or np.any(np.diff(self.grid) <= 0):
            errors["grid"] = ValidationError("grid must increase strictly from 1")
        if self.estimates.shape != self.grid.shape or self.errors.shape != self.grid.shape:
            errors["estimates"] = ValidationError("estimates and errors must match the grid")
        if errors:
            raise ValidationError("Malformed interface table ", errors=errors)
        # φ_I(1) = 0: the flat path is the only one
        self.estimates[0] = 0.0
        self.errors[0] = 0.0

    @classmethod
    def entropic(cls, params, mu_max=DEFAULT_MU_MAX, mu_step=DEFAULT_MU_STEP):
        """The exact table φ_I = κ̃(·, 0), valid whenever β ≤ 0."""
        grid = mu_grid(mu_max, mu_step)
        estimates = [entropy.kappa(mu, 0.0) for mu in grid]
        return cls(params, grid, estimates, np.zeros(len(grid)), exact=True)

    @property
    def mu_max(self):
        return float(self.grid[-1])

    def floored(self):
        """μ·φ_I on the grid, raised to the entropic floor μ·κ̃(μ, 0)."""
        floor = np.array([entropy.path_growth(mu, 0.0) for mu in self.grid])
        return np.maximum(self.grid * self.estimates, floor)

    def _build_envelope(self):
        floor_mu = 1.0 + np.logspace(*_FLOOR_DECADES, _FLOOR_SAMPLES)
        floor_val = np.array([entropy.path_growth(mu, 0.0) for mu in floor_mu])
        mus = np.concatenate([self.grid, floor_mu])
        vals = np.concatenate([self.floored(), floor_val])
        order = np.argsort(mus, kind="stable")
        nodes = np.array(_upper_hull(mus[order], vals[order]))
        self._slopes = np.diff(nodes[:, 1]) / np.diff(nodes[:, 0])
        return nodes

    @property
    def envelope(self):
        """Vertices (μ, μ·φ_I(μ)) of the concave envelope; None when exact."""
        return None if self._nodes is None else self._nodes.copy()

    @property
    def min_slope(self):
        """Slopes at or below this value lie beyond the envelope."""
        return 0.0 if self.exact else float(self._slopes[-1])

    def growth(self, mu):
        """The envelope of μ ↦ μ·φ_I(μ)."""
        mu = float(mu)
        if mu < 1.0 - 1e-12:
            raise DomainError(f"mu must be at least 1, got {mu}")
        mu = max(mu, 1.0)
        if self.exact:
            return entropy.path_growth(mu, 0.0)
        nodes = self._nodes
        if mu <= nodes[-1, 0]:
            return float(np.interp(mu, nodes[:, 0], nodes[:, 1]))
        return float(nodes[-1, 1] + self._slopes[-1] * (mu - nodes[-1, 0]))

    def growth_array(self, mu):
        """Vectorized :meth:`growth`; -inf below μ = 1."""
        mu = np.asarray(mu, dtype=float)
        inside = mu >= 1.0 - 1e-12
        mu = np.maximum(mu, 1.0)
        if self.exact:
            values = entropy.growth_array(mu, 0.0)
        else:
            nodes = self._nodes
            values = np.interp(mu, nodes[:, 0], nodes[:, 1])
            beyond = mu > nodes[-1, 0]
            values = np.where(beyond, nodes[-1, 1] + self._slopes[-1] * (mu - nodes[-1, 0]), values)
        return np.where(inside, values, -np.inf)

    def value(self, mu):
        """φ_I(μ) read off the envelope."""
        return self.growth(mu) / float(mu)

    def conjugate(self, c):
        """sup_μ [μφ_I(μ) - c(μ - 1)] with its maximizer.

        The maximizer is flagged saturated when it lies beyond the measured
        grid, where only the entropic floor is known.
        """
        c = float(c)
        if not c > 0:
            raise DomainError(f"slope must be positive, got {c}")
        if self.exact:
            value, v = _entropic_conjugate(c)
            return Conjugate(value, v, False)
        index = int(np.count_nonzero(self._slopes > c))
        mu, val = self._nodes[index]
        return Conjugate(float(val - c * (mu - 1.0)), float(mu), bool(mu > self.mu_max))

    def locate(self, c):
        """The envelope point whose subdifferential contains ``c``."""
        found = self.conjugate(c)
        if found.saturated:
            logger.warning("slope %r beyond the interface table (mu_max=%r)", c, self.mu_max)
        return Located(found.v, found.saturated)

    def v_I_of_c(self, c):
        return self.locate(c).v

    def concavity_report(self):
        """How far the raw estimates sit below the envelope, in error bars."""
        raw = self.grid * self.estimates
        envelope = np.array([self.growth(mu) for mu in self.grid])
        gap = envelope - raw
        bars = np.maximum(2.0 * self.grid * self.errors, 1e-12)
        flagged = [float(mu) for mu, g, b in zip(self.grid, gap, bars) if g > b]
        if flagged:
            logger.warning("interface estimates below the envelope beyond error bars at mu=%s", flagged)
        concave = True if self.exact else bool(np.all(np.diff(self._slopes) <= 1e-12))
        return {
            "concave": concave,
            "max_gap": float(np.max(gap)),
            "flagged": flagged,
            "nodes": 0 if self.exact else int(len(self._nodes)),
        }

    def to_dict(self):
        return {
            "version": TABLE_VERSION,
            "params": self.params.to_dict(),
            "grid": [float(m) for m in self.grid],
            "estimates": [float(v) for v in self.estimates],
            "errors": [float(e) for e in self.errors],
            "sizes": [list(s) for s in self.sizes],
            "samples": self.samples,
            "seed": self.seed,
            "ladder": list(self.ladder),
            "exact": self.exact,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
            version = data.get("version")
        except (ValueError, AttributeError) as exc:
            raise ValidationError("interface table is not a JSON object") from exc
        if version != TABLE_VERSION:
            raise ValidationError(f"Unsupported interface table version {version!r}")
        try:
            return cls(
                ModelParams(**data["params"]),
                data["grid"],
                data["estimates"],
                data["errors"],
                sizes=data.get("sizes"),
                samples=data.get("samples", 0),
                seed=data.get("seed"),
                ladder=data.get("ladder", ()),
                exact=data.get("exact", False),
            )
        except KeyError as exc:
            raise ValidationError(f"interface table lacks the {exc.args[0]!r} entry") from exc

    def __repr__(self):
        kind = "entropic" if self.exact else f"samples={self.samples}, ladder={self.ladder}"
        return f"InterfaceTable(mu_max={self.mu_max}, {kind})"


def mu_grid(mu_max=DEFAULT_MU_MAX, mu_step=DEFAULT_MU_STEP):
    count = int(round((float(mu_max) - 1.0) / float(mu_step)))
    if count < 1:
        raise DomainError(f"mu grid [1, {mu_max}] with step {mu_step} is empty")
    return np.array([1.0 + k * float(mu_step) for k in range(count + 1)])


def _sweep_task(L, n_max, n_draw, params, seed, streams):
    return L, list(streams), sweep(L, n_max, params, seed, streams, n_draw=n_draw)


def _chunks(samples, threads):
    size = max(1, -(-samples // max(1, threads)))
    return [range(start, min(samples, start + size)) for start in range(0, samples, size)]


def build_interface_table(
    params,
    ladder=DEFAULT_LADDER,
    samples=DEFAULT_SAMPLES,
    seed=0,
    mu_max=DEFAULT_MU_MAX,
    mu_step=DEFAULT_MU_STEP,
    exact_below_zero=True,
    threads=1,
):
    """Build an :class:`InterfaceTable` for ``params``.

    For β ≤ 0 (and ``exact_below_zero``) the entropic table is returned.
    Otherwise one dynamic-program sweep per (L, chunk of disorder streams)
    covers the whole μ-grid; chunks run in a process pool when
    ``threads > 1``.
    """
    if exact_below_zero and params.beta <= 0:
        logger.info("beta=%r <= 0: using the entropic interface table", params.beta)
        return InterfaceTable.entropic(params, mu_max, mu_step)
    if samples < 2:
        raise DomainError(f"need at least 2 disorder samples, got {samples}")
    grid = mu_grid(mu_max, mu_step)
    ladder = tuple(sorted(int(L) for L in ladder))
    lengths = {L: int(math.ceil(float(mu_max) * L)) + 2 for L in ladder}
    n_draw = lengths[ladder[-1]]
    tasks = [
        (L, lengths[L], n_draw, params, seed, chunk)
        for L in ladder
        for chunk in _chunks(samples, threads)
    ]
    logz = {L: np.empty((lengths[L] + 1, samples)) for L in ladder}
    logger.info("building interface table: %d sweeps, ladder=%s, samples=%d", len(tasks), ladder, samples)
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_task, *zip(*tasks)))
    else:
        results = [_sweep_task(*task) for task in tasks]
    for L, streams, block in results:
        logz[L][:, streams] = block

    estimates, errors, sizes = [], [], []
    for mu in grid:
        if mu == 1.0:
            estimates.append(0.0)
            errors.append(0.0)
            sizes.append(())
            continue
        excess, stderrs = [], []
        for L in ladder:
            mu_L = snap_mu(mu, L)
            n = int(mu_L * L)
            mean, stderr = _mean_and_error(logz[L][n] / n)
            excess.append(mean - entropy.kappa_finite(L, mu_L, 0))
            stderrs.append(stderr)
        e_inf, stderr = _extrapolate_excess(ladder, excess, stderrs)
        estimates.append(entropy.kappa(mu, 0.0) + max(e_inf, 0.0))
        errors.append(math.hypot(stderr, e_inf - excess[-1]))
        sizes.append(ladder)
    table = InterfaceTable(
        params, grid, estimates, errors, sizes=sizes, samples=samples, seed=seed, ladder=ladder
    )
    report = table.concavity_report()
    logger.info("interface table built: %d envelope nodes, max gap %.3g", report["nodes"], report["max_gap"])
    return table


def v_I_of_c(c, alias=registry.DEFAULT_ALIAS):
    """v_I(c) from the interface table registered under ``alias``."""
    try:
        table = registry.get_table(alias)
    except TableMissing:
        logger.error("no interface table registered under %r", alias)
        raise
    return table.v_I_of_c(c)
