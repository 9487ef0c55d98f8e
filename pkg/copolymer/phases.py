"""Reduced free energies, critical thresholds and phase labels.

All values are suprema over a finite strategy family, so every phase label
is relative to that family: f, f_D, f_D2 and f_L2 are lower bounds on the
quantities they stand for.
"""
import concurrent.futures
import logging
import math
from collections import namedtuple

import numpy as np

from copolymer import entropy, interface, registry
from copolymer.config import model_params
from copolymer.errors import (
    EmptySaturatedFamily,
    NoCrossing,
    NonPositive,
    StatisticallyUndecided,
    TableMissing,
    TableSaturation,
)
from copolymer.interface import InterfaceTable
from copolymer.varform import VariationalSolver

logger = logging.getLogger(__name__)

PHASES = ("D1", "D2", "L1", "L2", "boundary")
DEFAULT_MARGIN = 1e-3
DEFAULT_P_C = 0.6447
LOG3 = math.log(3.0)

FamilyOptimum = namedtuple("FamilyOptimum", ["value", "index", "label", "runner_up", "values", "saturated"])
AlphaStar = namedtuple("AlphaStar", ["value", "boundary", "bracket"])
BetaC = namedtuple("BetaC", ["value", "interval", "vbar", "decided", "ladder"])


class PhasePoint(
    namedtuple(
        "PhasePoint",
        ["alpha", "beta", "p", "phase", "f", "fD", "fD2", "fL2", "margin", "K", "regime", "flags"],
    )
):
    __slots__ = ()

    CSV_COLUMNS = ("alpha", "beta", "p", "phase", "f", "fD", "fD2", "fL2", "margin", "flags")

    def csv_row(self):
        row = [getattr(self, name) for name in self.CSV_COLUMNS[:-1]]
        return row + [";".join(self.flags)]

    def to_dict(self):
        data = self._asdict()
        data["flags"] = list(self.flags)
        return data


# -- family optimisation ---------------------------------------------------


def _member_values(solver, family, delocalized):
    values, saturated = [], False
    for rho in family:
        target = rho.delocalized() if delocalized else rho
        try:
            result = solver.free_energy_for_measure(target)
        except NonPositive:
            logger.debug("member %r has no positive ratio", rho.label)
            values.append(-math.inf)
            continue
        values.append(result.value)
        saturated = saturated or result.saturated
    return values, saturated


def family_optimum(family, values, saturated):
    order = np.argsort(values, kind="stable")[::-1]
    best = int(order[0])
    if not math.isfinite(values[best]):
        raise NonPositive("no member of the family has a positive free energy")
    runner_up = float(values[int(order[1])]) if len(order) > 1 else -math.inf
    return FamilyOptimum(float(values[best]), best, family[best].label, runner_up, tuple(values), saturated)


def delocalized_solver(gap, **kwargs):
    """A solver that sees (α, β) only through ``gap`` = α - β."""
    params = model_params(alpha=gap, beta=0.0)
    return VariationalSolver(params, InterfaceTable.entropic(params), **kwargs)


def _table_for(alpha, beta, table):
    if table is not None:
        return table
    if beta <= 0:
        return InterfaceTable.entropic(model_params(alpha, beta))
    try:
        return registry.get_table()
    except TableMissing:
        logger.error("no interface table registered for (alpha, beta)=(%r, %r)", alpha, beta)
        raise


def delocalized_optimum(family, alpha_minus_beta):
    """Family optimum with the interface replaced by its entropic floor."""
    if not family:
        raise NonPositive("empty family")
    values, _ = _member_values(delocalized_solver(float(alpha_minus_beta)), family, True)
    return family_optimum(family, values, False)


def full_optimum(alpha, beta, family, table=None):
    """Family optimum of max(localized, delocalized) per member."""
    solver = VariationalSolver(model_params(alpha, beta), _table_for(alpha, beta, table))
    full, saturated = _member_values(solver, family, False)
    floor, _ = _member_values(delocalized_solver(alpha - beta), family, True)
    return family_optimum(family, [max(a, b) for a, b in zip(full, floor)], saturated)


def saturated_family(family, subcritical=False):
    """Members that charge no B (or, below p_c, the least B)."""
    if subcritical:
        least = min(rho.b_mass for rho in family)
        return [rho for rho in family if rho.b_mass <= least]
    members = [rho for rho in family if rho.b_mass == 0]
    if not members:
        raise EmptySaturatedFamily("no strategy in the family avoids the B-solvent")
    return members


def f_delocalized(family, alpha_minus_beta):
    """f_D: depends on (α, β) through α - β only."""
    return delocalized_optimum(family, alpha_minus_beta).value


def f_full(alpha, beta, family, table=None):
    return full_optimum(alpha, beta, family, table).value


def f_saturated(family, alpha_minus_beta=0.0, subcritical=False):
    """f_D2: the delocalized optimum over the saturated subfamily."""
    return f_delocalized(saturated_family(family, subcritical), alpha_minus_beta if subcritical else 0.0)


def f_localized_saturated(alpha, beta, family, table=None, subcritical=False):
    """f_L2: the full optimum over the saturated subfamily."""
    return f_full(alpha, beta, saturated_family(family, subcritical), table)


# -- thresholds ------------------------------------------------------------


def alpha_star(family, alpha_max=20.0, tol=1e-4, threshold=1e-12):
    """sup{α ≥ 0: f_D(α, 0) > f_D2} by bisection on the non-increasing gap."""
    saturated = f_saturated(family)

    def gap(alpha):
        return f_delocalized(family, alpha) - saturated

    if gap(0.0) <= threshold:
        logger.info("f_D(0, 0) = f_D2: alpha* sits on the boundary 0")
        return AlphaStar(0.0, True, (0.0, 0.0))
    if gap(alpha_max) > threshold:
        raise NoCrossing(f"f_D(alpha, 0) > f_D2 up to alpha={alpha_max}", bracket=(0.0, alpha_max))
    lo, hi = 0.0, float(alpha_max)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gap(mid) > threshold:
            lo = mid
        else:
            hi = mid
        logger.debug("alpha* bracket [%r, %r]", lo, hi)
    return AlphaStar(0.5 * (lo + hi), False, (lo, hi))


def beta_c(
    alpha,
    family,
    samples=64,
    ladder=interface.DEFAULT_LADDER,
    seed=0,
    beta_max=None,
    tol=0.05,
    max_width=1.0,
    mu_max=interface.DEFAULT_MU_MAX,
    z=2.0,
):
    """inf{β > 0: φ_I(v̄_{A,0}; α+β, β) > κ̃(v̄_{A,0}, 0)} with v̄ = v(f_D(α, 0)).

    Each step estimates φ_I(v̄) with :func:`~copolymer.interface.phi`, which
    extrapolates the excess over the entropic floor along ``ladder``. A
    step counts as localized when the excess exceeds ``z`` error bars and
    as delocalized when it stays within one; in between the bisection stops
    and the bracket is returned as the confidence interval.
    """
    ladder = tuple(int(L) for L in ladder)
    vbar = entropy.chi_inverse(f_delocalized(family, alpha), 0.0)
    if vbar > mu_max:
        raise TableSaturation(f"v_A,0={vbar} lies beyond mu_max={mu_max}")
    floor = entropy.kappa(vbar, 0.0)

    def excess(beta):
        params = model_params(alpha + beta, beta)
        found = interface.phi(vbar, params, ladder=ladder, samples=samples, seed=seed)
        return found.estimate - floor, found.error

    lo, hi = 0.0, float(alpha + 6.0 if beta_max is None else beta_max)
    d, e = excess(hi)
    if d <= z * e:
        raise NoCrossing(f"no localization up to beta={hi} at alpha={alpha}", bracket=(lo, hi))
    decided = True
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        d, e = excess(mid)
        logger.debug("beta_c alpha=%r beta=%r excess=%r +- %r", alpha, mid, d, e)
        if d > z * e:
            hi = mid
        elif d <= e:
            lo = mid
        else:
            decided = False
            break
    if not decided:
        logger.warning("beta_c(%r) undecided on [%r, %r] at %d samples", alpha, lo, hi, samples)
        if hi - lo > max_width:
            raise StatisticallyUndecided(
                f"beta_c({alpha}) not resolved at {samples} samples", interval=(lo, hi)
            )
    return BetaC(0.5 * (lo + hi), (lo, hi), vbar, decided, ladder)


def critical_curve(alphas, family, **kwargs):
    """β_c over an α-sweep, with a flag for non-decreasing intervals."""
    rows = []
    for alpha in alphas:
        try:
            found = beta_c(alpha, family, **kwargs)
            rows.append((alpha, found.value, found.interval[0], found.interval[1], found.decided))
        except (NoCrossing, StatisticallyUndecided, TableSaturation) as exc:
            logger.warning("beta_c(%r): %s", alpha, exc)
            rows.append((alpha, math.nan, math.nan, math.nan, False))
    known = [row for row in rows if math.isfinite(row[1])]
    monotone = all(nxt[3] >= prev[2] for prev, nxt in zip(known, known[1:]))
    return rows, monotone


# -- classification --------------------------------------------------------


def classify(alpha, beta, p, family, table=None, margin=DEFAULT_MARGIN, p_c=DEFAULT_P_C):
    """Phase of (α, β) relative to ``family``.

    Gaps above twice the margin decide a phase, gaps below the margin
    decide its complement, and anything between is labelled "boundary".
    The margin grows by the largest error bar of the interface table.
    """
    subcritical = p < p_c
    regime = "subcritical" if subcritical else "supercritical"
    table = _table_for(alpha, beta, table)
    stat_error = 0.0 if table.exact else float(np.max(table.errors))
    margin = float(margin) + stat_error
    flags = ["lower-bound"]

    full = full_optimum(alpha, beta, family, table)
    f = full.value
    fD = f_delocalized(family, alpha - beta)
    if full.saturated:
        flags.append("table-saturation")
    try:
        fD2 = f_saturated(family, alpha - beta, subcritical)
        fL2 = f_localized_saturated(alpha, beta, family, table, subcritical)
    except EmptySaturatedFamily:
        flags.append("no-saturated-member")
        fD2 = fL2 = -math.inf

    def decide(gap, above, below):
        if gap > 2 * margin:
            return above
        if gap <= margin:
            return below
        return "boundary"

    # no localization below β = 0, whatever the table says
    localized = decide(f - fD, "L", "D") if beta > 0 else "D"
    if localized == "L":
        phase = decide(f - fL2, "L1", "L2")
    elif localized == "D":
        phase = decide(fD - fD2, "D1", "D2")
    else:
        phase = "boundary"
    return PhasePoint(alpha, beta, p, phase, f, fD, fD2, fL2, margin, len(family), regime, tuple(flags))


def bounds_report(alpha, beta, family, table=None, shift=1.0):
    """f ≥ f_D, f ≤ log 3 + α, and f_D unchanged along (α + s, β + s)."""
    f = f_full(alpha, beta, family, table)
    fD = f_delocalized(family, alpha - beta)
    shifted = f_delocalized(family, (alpha + shift) - (beta + shift))
    return {
        "f": f,
        "fD": fD,
        "entropic_lower_bound": f >= fD - 1e-9,
        "uniform_upper_bound": f <= LOG3 + alpha + 1e-9,
        "gap_only": abs(shifted - fD) <= 1e-9,
    }


# -- diagnostics -----------------------------------------------------------


def _g(c, l):
    v = entropy.chi_inverse(c, l)
    return v * (entropy.kappa(v, l) - c)


def hypothesis2_diagnostic(family, l_max=50.0, points=201, alpha=None):
    """Tabulate g(l) = v̄_l(κ̃(v̄_l, l) - f_D2) with v̄ = v(f_D2) and check
    its shape, the balance of g under the saturated maximizer, and the
    ratio of that balance to the B-travel of the B-charging members."""
    saturated = saturated_family(family)
    best = delocalized_optimum(saturated, 0.0)
    c = best.value
    ls = np.linspace(0.0, float(l_max), int(points))
    g = np.array([_g(c, l) for l in ls])
    crossing = next((float(l) for l, value in zip(ls, g) if value < 0), None)
    reach = float(l_max)
    while crossing is None and reach < 1e4:
        reach *= 2.0
        if _g(c, reach) < 0:
            crossing = reach
    maximizer = saturated[best.index].delocalized()
    balance = sum(w * _g(c, l) for l, w in maximizer.atomsA)

    ratios = []
    for rho in family:
        if rho.b_mass > 0:
            folded = rho.delocalized()
            top = sum(w * _g(c, l) for l, w in folded.atomsA)
            ratios.append(top / sum(w * (1.0 + l) for l, w in rho.atomsB))
    report = {
        "fD2": c,
        "maximizer": saturated[best.index].label,
        "g": [[float(l), float(value)] for l, value in zip(ls, g)],
        "g0_positive": bool(g[0] > 0),
        "decreasing": bool(np.all(np.diff(g) < 0)),
        "sign_change": crossing,
        "balance": balance,
        "balanced": abs(balance) <= 1e-3,
        "b_charging_ratio": max(ratios) if ratios else None,
    }
    if alpha is not None:
        found = delocalized_optimum(family, alpha)
        report["maximizer_interface_mass"] = family[found.index].wI
    return report


# -- scans -----------------------------------------------------------------


def _scan_task(alpha, beta, p, M, family, table_settings, margin, p_c):
    params = model_params(alpha, beta, p, M)
    table = interface.build_interface_table(params, **table_settings)
    return classify(alpha, beta, p, family, table, margin=margin, p_c=p_c)


def scan_grid(config):
    alphas = np.linspace(config.scan_alpha_min, config.scan_alpha_max, config.scan_alpha_steps)
    betas = np.linspace(config.scan_beta_min, config.scan_beta_max, config.scan_beta_steps)
    return [(float(a), float(b)) for a in alphas for b in betas if a >= abs(b)]


def scan_phase_diagram(config, family, threads=1):
    """Classify every CONE point of the configured (α, β) grid."""
    table_settings = {
        "ladder": tuple(config.interface_ladder),
        "samples": config.interface_samples,
        "seed": config.seed,
        "mu_max": config.mu_max,
        "mu_step": config.mu_step,
        "exact_below_zero": config.exact_below_zero,
    }
    points = scan_grid(config)
    args = [
        (a, b, config.p, config.M, family, table_settings, config.margin, config.p_c) for a, b in points
    ]
    logger.info("phase scan: %d points, %d members, threads=%d", len(points), len(family), threads)
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_scan_task, *zip(*args)))
    return [_scan_task(*arg) for arg in args]
