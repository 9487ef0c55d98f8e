"""Command line: ``copolymer <verb> [--config PATH] [--seed N] [--out DIR]
[--threads N] [--budget N]``.

Every verb writes its tables into ``--out`` together with a manifest
holding the resolved configuration and the checksum of each file. The
exit code is 0 when no ERROR was logged, 1 when some check failed, and a
failure-class code (see :data:`copolymer.errors.EXIT_CODES`) when the
command aborted.
"""
import argparse
import logging
import math
from fractions import Fraction
from pathlib import Path

from copolymer import artifacts, entropy, oracle, phases, registry
from copolymer.column import ColumnSolver, ColumnType, geometry, grid_search_psi
from copolymer.config import dump_config, load_config
from copolymer.errors import (
    CopolymerException,
    DomainError,
    EmptySaturatedFamily,
    NoCrossing,
    NonPositive,
    ValidationError,
    exit_code_for,
)
from copolymer.interface import InterfaceTable, build_interface_table
from copolymer.logs import configure_logging
from copolymer.maximizer_checks import attainment_report, verify_column_uniqueness, verify_inner_uniqueness
from copolymer.strategies import measure_family_from_disorder
from copolymer.varform import VariationalSolver, interface_column, rho_hor, single_column

logger = logging.getLogger(__name__)


def _lattice_points(L, budget):
    """(u, l) ∈ H_L with u·L ≤ budget."""
    for n in range(L, budget + 1):
        vertical = n - L
        for d in range(-vertical, vertical + 1, 2):
            yield Fraction(n, L), Fraction(d, L)


def _family(config):
    if config.family == "hor":
        return [rho_hor(config.p)]
    return measure_family_from_disorder(
        config.p,
        config.M,
        config.seed,
        strategies=config.strategies,
        columns=config.columns,
        interface_floor=config.interface_floor,
        m=config.m,
    )


def _table(config, params=None):
    table = build_interface_table(
        params or config.params,
        ladder=config.interface_ladder,
        samples=config.interface_samples,
        seed=config.seed,
        mu_max=config.mu_max,
        mu_step=config.mu_step,
        exact_below_zero=config.exact_below_zero,
        threads=config.threads,
    )
    return registry.register_table(table, replace=True)


def _finish(config, command, files, extra=None):
    out = Path(config.out)
    files = list(files) + [artifacts.write_text(out / "config.txt", dump_config(config))]
    artifacts.write_manifest(out, command, config, files, extra)
    logger.info("%s finished: %d files in %s", command, len(files), out)
    return files


# -- verbs -----------------------------------------------------------------


def cmd_entropy(config):
    """Path entropy tables and their exact cross-checks."""
    out = Path(config.out)
    registry.register_evaluator(ladder=tuple(config.entropy_ladder))
    evaluator = registry.get_evaluator()
    grid, ladder, agreement = [], [], []
    for u in config.entropy_u:
        for l in config.entropy_l:
            if u <= 1.0 + l:
                continue
            kappa = evaluator.kappa(u, l)
            slope = evaluator.derivative(u, l)
            residual = evaluator.derivative(evaluator.chi_inverse(slope, l), l) - slope
            try:
                extrapolated, _ = evaluator.extrapolate(u, l)
            except DomainError:
                extrapolated = math.nan
            grid.append((u, l, kappa, slope, residual, extrapolated))
            if abs(residual) > 1e-8:
                logger.error("chi_inverse round trip off by %r at (u=%r, l=%r)", residual, u, l)
            for L in config.entropy_ladder:
                try:
                    finite = evaluator.kappa_finite(L, u, l)
                except DomainError:
                    continue
                ladder.append((L, u, l, finite, kappa, kappa - finite))
                if finite > kappa + 1e-12:
                    logger.error("kappa_%d(%r, %r) = %r exceeds kappa = %r", L, u, l, finite, kappa)
    for L in range(1, config.oracle_max_L + 1):
        for u, l in _lattice_points(L, config.budget):
            enumerated = oracle.enumerate_column_paths(L, u, l, budget=config.budget)
            stretched = oracle.count_paths_stretch_form(L, u, l)
            agreement.append((L, str(u), str(l), enumerated, stretched, enumerated == stretched))
            if enumerated != stretched:
                logger.error("path counts disagree at L=%d u=%s l=%s", L, u, l)
    files = [
        artifacts.write_csv(
            out / "entropy_grid.csv", ("u", "l", "kappa", "derivative", "chi_residual", "extrapolated"), grid
        ),
        artifacts.write_csv(out / "entropy_ladder.csv", ("L", "u", "l", "kappa_L", "kappa", "gap"), ladder),
        artifacts.write_csv(
            out / "entropy_oracle.csv", ("L", "u", "l", "enumerated", "stretch_form", "equal"), agreement
        ),
    ]
    return _finish(config, "entropy", files)


def cmd_interface(config):
    """Build the interface table for the configured (alpha, beta)."""
    out = Path(config.out)
    table = _table(config)
    rows = [
        (mu, est, err, table.growth(mu), entropy.kappa(mu, 0.0))
        for mu, est, err in zip(table.grid.tolist(), table.estimates.tolist(), table.errors.tolist())
    ]
    diagnostics = {"concavity": table.concavity_report(), "exact": table.exact, "grid": table.grid.tolist()}
    if config.beta <= 0:
        collapse = []
        for mu in (1.5, 2.0, 3.0):
            index = int(round((mu - 1.0) / config.mu_step))
            if index >= len(table.grid):
                continue
            gap = abs(table.estimates[index] - entropy.kappa(table.grid[index], 0.0))
            ok = bool(gap <= 2 * table.errors[index] + 0.05)
            collapse.append({"mu": float(table.grid[index]), "gap": float(gap), "passed": ok})
            if not ok:
                logger.error("interface estimate at mu=%r misses the entropic value by %r", mu, gap)
        diagnostics["collapse"] = collapse
    files = [
        artifacts.write_text(out / "interface_table.json", table.to_json()),
        artifacts.write_csv(out / "interface.csv", ("mu", "estimate", "error", "envelope", "kappa0"), rows),
        artifacts.write_json(out / "interface_diagnostics.json", diagnostics),
    ]
    return _finish(config, "interface", files)


def cmd_free_energy(config):
    """Variational free energy of every member of the strategy family."""
    out = Path(config.out)
    family = _family(config)
    table = _table(config)
    solver = VariationalSolver(
        config.params,
        table,
        column_solver=ColumnSolver(config.params, table, tol=config.psi_tol),
        tol=config.dinkelbach_tol,
        max_iter=config.dinkelbach_max_iter,
    )
    floor_solver = phases.delocalized_solver(
        config.alpha - config.beta, tol=config.dinkelbach_tol, max_iter=config.dinkelbach_max_iter
    )
    rows, details, values = [], {}, []
    for rho in family:
        entry = {"measure": rho.to_dict()}
        localized = delocalized = -math.inf
        try:
            result = solver.free_energy_for_measure(rho)
            localized = result.value
            entry.update(
                trace=list(result.trace),
                iterations=result.iterations,
                saturated=result.saturated,
                speeds=result.speeds.to_dict(rho),
            )
            if any(b < a - config.dinkelbach_tol for a, b in zip(result.trace[1:], result.trace[2:])):
                logger.warning("Dinkelbach trace of %r is not monotone", rho.label)
            check = verify_inner_uniqueness(solver, rho, seed=config.seed)
            entry["uniqueness"] = {
                "min_margin": check.min_margin,
                "worst_gap": check.worst_gap,
                "passed": check.passed,
            }
        except NonPositive:
            entry["trace"] = []
        try:
            delocalized = floor_solver.free_energy_for_measure(rho.delocalized()).value
        except NonPositive:
            pass
        value = max(localized, delocalized)
        values.append(value)
        entry.update(localized=localized, delocalized=delocalized, value=value)
        details[rho.label or f"member{len(details)}"] = entry
        saturated = entry.get("saturated", False)
        rows.append((rho.label, rho.b_mass, rho.wI, value, localized, delocalized, saturated))
    optimum = phases.family_optimum(family, values, False)
    summary = attainment_report(optimum)
    summary["bound"] = f"lower bound (family of size {len(family)})"
    files = [
        artifacts.write_json(out / "family.json", [rho.to_dict() for rho in family]),
        artifacts.write_csv(
            out / "free_energy.csv",
            ("label", "b_mass", "interface_mass", "value", "localized", "delocalized", "saturated"),
            rows,
        ),
        artifacts.write_json(out / "free_energy.json", {"members": details, "summary": summary}),
    ]
    return _finish(config, "free-energy", files, {"summary": summary})


def cmd_phase_diagram(config):
    """Classify the (alpha, beta) cone and trace the critical curve."""
    out = Path(config.out)
    family = _family(config)
    points = phases.scan_phase_diagram(config, family, threads=config.threads)
    for point in points:
        if point.beta <= 0 and point.phase.startswith("L"):
            logger.error("localized phase at beta=%r <= 0", point.beta)
    curve, extra = [], {"family_size": len(family)}
    try:
        star = phases.alpha_star(family, alpha_max=config.alpha_star_max)
        extra["alpha_star"] = {"value": star.value, "boundary": star.boundary, "bracket": list(star.bracket)}
        alphas = config.betac_alphas or [star.value + 0.5 * k for k in range(5)]
    except (NoCrossing, EmptySaturatedFamily) as exc:
        logger.warning("alpha*: %s", exc)
        alphas = config.betac_alphas
    if alphas:
        curve, monotone = phases.critical_curve(
            alphas,
            family,
            samples=config.betac_samples,
            ladder=config.betac_ladder,
            seed=config.seed,
            mu_max=config.mu_max,
        )
        extra["curve_monotone"] = monotone
        extra["betac_ladder"] = list(config.betac_ladder)
    files = [
        artifacts.write_csv(out / "phases.csv", phases.PhasePoint.CSV_COLUMNS, [p.csv_row() for p in points]),
        artifacts.write_csv(
            out / "critical_curve.csv", ("alpha", "beta_c", "lower", "upper", "decided"), curve
        ),
    ]
    try:
        report = phases.hypothesis2_diagnostic(family, alpha=config.alpha)
        files.append(artifacts.write_json(out / "saturation_diagnostic.json", report))
    except (EmptySaturatedFamily, NonPositive) as exc:
        logger.warning("saturation diagnostic skipped: %s", exc)
    return _finish(config, "phase-diagram", files, extra)


def cmd_oracle_check(config):
    """Compare closed forms and dynamic programs against enumeration."""
    out = Path(config.out)
    rows = []

    def check(name, case, expected, actual, passed):
        rows.append((name, case, expected, actual, bool(passed)))
        if not passed:
            logger.error("oracle check %s failed at %s: expected %r, got %r", name, case, expected, actual)

    for L in range(1, config.oracle_max_L + 1):
        for u, l in _lattice_points(L, config.budget):
            enumerated = oracle.enumerate_column_paths(L, u, l, budget=config.budget)
            stretched = oracle.count_paths_stretch_form(L, u, l)
            check("path_count", f"L={L} u={u} l={l}", enumerated, stretched, enumerated == stretched)

    dis = oracle.DisorderPair.generate(config.seed, config.path_budget, config.p)
    for L_n in (1, 2):
        for n in range(1, min(config.path_budget, 8) + 1):
            dp = oracle.finite_free_energy(n, L_n, dis, config.params, budget=config.path_budget)
            brute = oracle.brute_force_free_energy(n, L_n, dis, config.params)
            check("path_free_energy", f"n={n} L_n={L_n}", brute, dp, abs(dp - brute) <= 1e-12)

    check("flat_entropy", "u=1 l=0", 0.0, entropy.kappa(1.0, 0.0), entropy.kappa(1.0, 0.0) == 0.0)
    for l in (0.5, 1.0, 2.0):
        for offset in (0.25, 1.0, 3.0):
            v = 1.0 + l + offset
            h = 1e-5
            central = (entropy.path_growth(v + h, l) - entropy.path_growth(v - h, l)) / (2 * h)
            closed = entropy.kappa_derivative(v, l)
            check("derivative", f"v={v} l={l}", central, closed, abs(closed - central) <= 1e-6 * abs(central))
            back = entropy.kappa_derivative(entropy.chi_inverse(closed, l), l)
            check("chi_inverse", f"c={closed} l={l}", closed, back, abs(back - closed) <= 1e-8)

    solver = ColumnSolver(config.params, InterfaceTable.entropic(config.params), tol=config.psi_tol)
    for theta in (single_column("A", "1/2"), ColumnType("AAABB", 1, "1/2", "1/2"), interface_column()):
        t = float(geometry(theta).t)
        for extra in (0.5, 2.0):
            u = t + extra
            value = solver.value(theta, u)
            grid = grid_search_psi(solver, theta, u).value
            check("psi_grid", f"{theta!r} u={u}", grid, value, value >= grid - 1e-9)
            unique = verify_column_uniqueness(solver, theta, u, starts=3, seed=config.seed)
            check("psi_unique", f"{theta!r} u={u}", 0.0, unique.spread, unique.passed)

    header = ("check", "case", "expected", "actual", "passed")
    files = [artifacts.write_csv(out / "oracle_check.csv", header, rows)]
    return _finish(config, "oracle-check", files, {"failures": sum(1 for r in rows if not r[-1])})


COMMANDS = {
    "entropy": cmd_entropy,
    "interface": cmd_interface,
    "free-energy": cmd_free_energy,
    "phase-diagram": cmd_phase_diagram,
    "oracle-check": cmd_oracle_check,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--seed", type=int, help="master seed for every random stream")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker processes (default: $COPOLYMER_THREADS or 1)")
    common.add_argument("--budget", type=int, help="largest u*L for exact path counts")
    common.add_argument("-v", "--verbose", action="store_true", help="log DEBUG records")
    parser = argparse.ArgumentParser(
        prog="copolymer", description="Copolymer free energies in a micro-emulsion"
    )
    verbs = parser.add_subparsers(dest="command", required=True)
    for name, command in COMMANDS.items():
        verbs.add_parser(name, parents=[common], help=command.__doc__)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    counter = configure_logging(logging.DEBUG if args.verbose else logging.INFO)
    overrides = {"seed": args.seed, "out": args.out, "threads": args.threads, "budget": args.budget}
    try:
        config = load_config(args.config, overrides)
        logger.info("%s started (seed=%r, threads=%r)", args.command, config.seed, config.threads)
        COMMANDS[args.command](config)
    except (CopolymerException, ValidationError) as exc:
        logger.error("%s aborted: %s", args.command, exc)
        return exit_code_for(exc)
    return 0 if counter.errors == 0 else 1


if __name__ == "__main__":
    raise SystemExit(main())
