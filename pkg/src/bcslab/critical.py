"""Critical temperature: eigenvalue and Birman-Schwinger bisections, bounds, sweeps."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np
from scipy import integrate, stats

from bcslab.discretize import DEFAULT_GRADING_LEVELS, DEFAULT_N_PER_PANEL, assemble_sector_operator, build_grid
from bcslab.errors import BracketError, DomainError, RangeError
from bcslab.gap import solve_gap
from bcslab.linear_criterion import (
    HLS_CONSTANT,
    bs_norm,
    eigen_tolerance,
    instability_verdict,
    lowest_eigenvalue,
    positive_part_norm,
)
from bcslab.models import (
    BoundResult,
    EquivalenceCase,
    IdentityCheck,
    PersistenceCheck,
    PotentialSpec,
    RadialGrid,
    SweepFit,
    SweepResult,
    SweepRow,
    TcReport,
    TcResult,
    ThermoParams,
)
from bcslab.potential import attractive_part, decompose_and_norms, scaled
from bcslab.symbols import a_constant, f_counterterm, f_counterterm_inverse
from bcslab.workers import ordered_map

logger = logging.getLogger(__name__)

DEFAULT_REL_TOL = 1e-4
EQUIVALENCE_FACTORS = (0.3, 0.6, 0.9, 1.1, 1.5)
MIN_FIT_POINTS = 3
_UPPER_GROWTH_STEPS = 8


def default_t_floor(mu: float) -> float:
    return 1e-6 * max(mu, 1.0)


def rough_upper_bound(spec: PotentialSpec) -> float:
    """T_c <= ||V-||_inf / 2, since K >= 2T."""
    return 0.5 * decompose_and_norms(spec).linf_negative


def _check_rel_tol(rel_tol: float) -> None:
    if not 1e-6 < rel_tol < 1e-1:
        raise DomainError("rel_tol must lie in (1e-6, 1e-1)", rel_tol=rel_tol)


def _bisect_geometric(predicate, lo: float, hi: float, rel_tol: float) -> tuple[float, float, int]:
    """Shrink [lo, hi] with predicate(lo) true and predicate(hi) false."""
    steps = 0
    while hi - lo > rel_tol * lo:
        mid = math.sqrt(lo * hi)
        if predicate(mid):
            lo = mid
        else:
            hi = mid
        steps += 1
    return lo, hi, steps


def tc_bisect(
    spec: PotentialSpec,
    mu: float,
    ell_max: int = 4,
    rel_tol: float = DEFAULT_REL_TOL,
    grid: RadialGrid | None = None,
    t_floor: float | None = None,
    t_upper: float | None = None,
    serial: bool = False,
) -> TcResult:
    """Bisection in T on the sign of min_l lambda_min(K_{1/T} + V)."""
    _check_rel_tol(rel_tol)
    grid = grid or build_grid(mu=mu)
    floor = t_floor or default_t_floor(mu)
    upper = t_upper or rough_upper_bound(spec)
    if not math.isfinite(upper):
        raise DomainError("||V-||_inf is not finite; set tc.t_upper explicitly")
    if upper <= floor:
        logger.info("upper bracket %.3g is below the floor; no pairing", upper)
        return TcResult(temperature=floor, bracket=(0.0, floor), below_floor=True, method="eigenvalue")

    def sector_minima(temperature: float) -> list[float]:
        params = ThermoParams.from_temperature(temperature, mu)
        return ordered_map(
            lambda ell: lowest_eigenvalue(assemble_sector_operator(grid, spec, ell, params)),
            range(ell_max + 1),
            serial=serial,
        )

    def unstable(temperature: float) -> bool:
        minima = sector_minima(temperature)
        logger.debug("T=%.10g: min eigenvalue %.6e", temperature, min(minima))
        return min(minima) < -eigen_tolerance(ThermoParams.from_temperature(temperature, mu))

    if not unstable(floor):
        logger.info("no instability at the floor temperature %.3g", floor)
        return TcResult(temperature=floor, bracket=(0.0, floor), below_floor=True, method="eigenvalue")
    for _ in range(_UPPER_GROWTH_STEPS):
        if not unstable(upper):
            break
        # the discretized V only approximately obeys V >= -||V-||_inf
        upper *= 2.0
        logger.warning("upper bracket still unstable; grown to %.6g", upper)
    else:
        raise BracketError("no stable temperature found above the floor", t_upper=upper)

    lo, hi, steps = _bisect_geometric(unstable, floor, upper, rel_tol)
    minima = sector_minima(lo)
    return TcResult(
        temperature=0.5 * (lo + hi),
        bracket=(lo, hi),
        below_floor=False,
        method="eigenvalue",
        minimizing_ell=int(np.argmin(minima)),
        steps=steps,
    )


def tc_birman_schwinger(
    spec: PotentialSpec,
    mu: float,
    rel_tol: float = DEFAULT_REL_TOL,
    ell: int = 0,
    grid: RadialGrid | None = None,
    t_floor: float | None = None,
    t_upper: float | None = None,
) -> TcResult:
    """Bisection in beta on ||V-^{1/2}(K_beta + V+)^{-1} V-^{1/2}|| = 1."""
    _check_rel_tol(rel_tol)
    grid = grid or build_grid(mu=mu)
    floor = t_floor or default_t_floor(mu)
    upper = t_upper or rough_upper_bound(spec)
    if not upper > floor:
        raise BracketError("no temperature bracket: V- vanishes or the floor is too high", t_floor=floor, t_upper=upper)

    def lowest(temperature: float) -> float:
        params = ThermoParams.from_temperature(temperature, mu)
        return lowest_eigenvalue(assemble_sector_operator(grid, spec, ell, params))

    # coarse eigenvalue check: the sector must be unstable at the floor and stable at the top
    at_floor, at_upper = lowest(floor), lowest(upper)
    tolerances = [eigen_tolerance(ThermoParams.from_temperature(t, mu)) for t in (floor, upper)]
    if not (at_floor < -tolerances[0] and at_upper >= -tolerances[1]):
        raise BracketError(
            "the eigenvalue sign does not change inside the bracket",
            ell=ell,
            t_bracket=[floor, upper],
            lowest_eigenvalues=[at_floor, at_upper],
        )

    def norm(beta: float) -> float:
        return bs_norm(spec, ThermoParams(beta=beta, mu=mu), 0.0, ell=ell, grid=grid)

    beta_lo, beta_hi = 1.0 / upper, 1.0 / floor
    norm_lo, norm_hi = norm(beta_lo), norm(beta_hi)
    if not norm_lo < 1.0 < norm_hi:
        raise BracketError(
            "Birman-Schwinger norm does not cross 1 inside the bracket",
            beta_bracket=[beta_lo, beta_hi],
            achieved_norms=[norm_lo, norm_hi],
        )
    # the norm increases with beta, so "norm > 1" holds at the upper end
    stable_beta, unstable_beta, steps = _bisect_geometric(lambda b: norm(b) < 1.0, beta_lo, beta_hi, rel_tol)
    beta_c = 0.5 * (stable_beta + unstable_beta)
    logger.debug("beta_c=%.10g after %d steps", beta_c, steps)
    return TcResult(
        temperature=1.0 / beta_c,
        bracket=(1.0 / unstable_beta, 1.0 / stable_beta),
        below_floor=False,
        method="birman_schwinger",
        minimizing_ell=ell,
        steps=steps,
    )


def tc_upper_bound(spec: PotentialSpec, mu: float) -> BoundResult:
    """(mu/2) f^{-1}((a - C ||V-||_{3/2}) / (mu^{1/2} ||V-||_1)) when C ||V-||_{3/2} < a."""
    a = a_constant()
    norms = decompose_and_norms(spec)
    lhs = HLS_CONSTANT * norms.l32_negative
    if not mu > 0:
        return BoundResult(hypothesis_holds=False, value=None, lhs=lhs, threshold=a, reason="needs mu > 0")
    if lhs >= a:
        return BoundResult(hypothesis_holds=False, value=None, lhs=lhs, threshold=a, reason="hypothesis violated")
    if norms.l1_negative == 0:
        return BoundResult(hypothesis_holds=True, value=0.0, lhs=lhs, threshold=a)
    argument = (a - lhs) / (math.sqrt(mu) * norms.l1_negative)
    try:
        return BoundResult(hypothesis_holds=True, value=0.5 * mu * f_counterterm_inverse(argument), lhs=lhs, threshold=a)
    except RangeError as exc:
        (lo, hi), (f_lo, f_hi) = exc.context["bracket"], exc.context["achieved"]
    # outside the bracket f follows its asymptotes: (ln(1/t) + c) / 2pi^2 near 0, const / t at infinity
    if argument > f_lo:
        t = math.exp(math.log(lo) - 2.0 * math.pi**2 * (argument - f_lo))
    else:
        t = hi * f_hi / argument
    logger.info("f inverse left its bracket at y=%.6g; asymptotic value %.3g used", argument, t)
    return BoundResult(hypothesis_holds=True, value=0.5 * mu * t, lhs=lhs, threshold=a, reason="asymptotic f inverse")


def lambda_sweep(
    base_spec: PotentialSpec,
    mu: float,
    lambdas: Sequence[float],
    ell_max: int = 4,
    rel_tol: float = DEFAULT_REL_TOL,
    grid: RadialGrid | None = None,
    t_floor: float | None = None,
    serial: bool = False,
) -> SweepResult:
    """T_c(lambda V) over couplings and the fit ln T_c = -c / lambda + b.

    Couplings multiply the lambda_scale already carried by base_spec.
    """
    if decompose_and_norms(base_spec).l1_positive > 0:
        raise DomainError("coupling sweep needs a nonpositive base potential")
    lambdas = [float(x) for x in lambdas]
    if not lambdas or any(x <= 0 for x in lambdas) or lambdas != sorted(set(lambdas)):
        raise DomainError("couplings must be positive and strictly increasing", lambdas=lambdas)
    grid = grid or build_grid(mu=mu)
    floor = t_floor or default_t_floor(mu)

    def point(coupling: float) -> SweepRow:
        spec = scaled(base_spec, base_spec.lambda_scale * coupling)
        tc = tc_bisect(spec, mu, ell_max, rel_tol, grid=grid, t_floor=floor, serial=True)
        bound = tc_upper_bound(spec, mu)
        logger.info("lambda=%g: T_c=%s", coupling, "below floor" if tc.below_floor else f"{tc.temperature:.6g}")
        return SweepRow(coupling=coupling, tc=None if tc.below_floor else tc.temperature, upper_bound=bound.value)

    rows = tuple(ordered_map(point, lambdas, serial=serial))
    resolved = [row for row in rows if row.tc is not None]
    fit = None
    if len(resolved) >= MIN_FIT_POINTS:
        result = stats.linregress([1.0 / row.coupling for row in resolved], [math.log(row.tc) for row in resolved])
        fit = SweepFit(slope=result.slope, intercept=result.intercept, r2=result.rvalue**2, points=len(resolved))
    else:
        logger.warning("only %d resolvable couplings; no fit reported", len(resolved))
    return SweepResult(rows=rows, fit=fit, t_floor=floor)


def counterterm_identity_check(e: float, mu: float) -> IdentityCheck:
    """Compare 4pi int p^2 k_{e,mu}(p) dp with (2pi)^3 mu^{1/2} f(e/mu)."""
    if not e > 0 or not mu > 0:
        raise DomainError("identity check needs e > 0 and mu > 0", e=e, mu=mu)

    def integrand(p: float) -> float:
        p2 = p * p
        return p2 * (1.0 / (abs(p2 - mu) + e) - 1.0 / (p2 + mu + e))

    fermi = math.sqrt(mu)
    options = {"epsabs": 1e-13, "epsrel": 1e-12, "limit": 400}
    inner, _ = integrate.quad(integrand, 0.0, fermi, **options)
    outer, _ = integrate.quad(integrand, fermi, math.inf, **options)
    lhs = 4.0 * math.pi * (inner + outer)
    rhs = (2.0 * math.pi) ** 3 * fermi * f_counterterm(e / mu)
    return IdentityCheck(lhs=lhs, rhs=rhs, defect=abs(lhs - rhs) / rhs)


def persistence_check(
    spec: PotentialSpec,
    mu: float,
    rel_tol: float = DEFAULT_REL_TOL,
    grid: RadialGrid | None = None,
    t_floor: float | None = None,
) -> PersistenceCheck:
    """T_c of V and of -V- next to the size of the repulsive part at T_c(-V-)."""
    grid = grid or build_grid(mu=mu)
    attractive = tc_bisect(attractive_part(spec), mu, 0, rel_tol, grid=grid, t_floor=t_floor, serial=True)
    full = tc_bisect(spec, mu, 0, rel_tol, grid=grid, t_floor=t_floor, serial=True)
    params = ThermoParams.from_temperature(attractive.temperature, mu)
    return PersistenceCheck(
        tc_full=full,
        tc_attractive=attractive,
        positive_part_norm=positive_part_norm(spec, params, grid=grid),
        temperature=attractive.temperature,
    )


def equivalence_sweep(
    specs: Sequence[tuple[str, PotentialSpec]],
    mus: Sequence[float],
    factors: Sequence[float] = EQUIVALENCE_FACTORS,
    rel_tol: float = DEFAULT_REL_TOL,
    serial: bool = False,
    n_per_panel: int = DEFAULT_N_PER_PANEL,
    grading_levels: int = DEFAULT_GRADING_LEVELS,
) -> list[EquivalenceCase]:
    """Linear verdict, gap nontriviality and free-energy decrease over a (V, mu, T) lattice.

    Everything runs in the s-wave sector, where the gap equation is solved.
    """
    if any(abs(f - 1.0) <= 0.02 for f in factors):
        raise DomainError("temperature factors must stay outside the 2% band around T_c", factors=list(factors))

    def critical(pair: tuple[tuple[str, PotentialSpec], float]) -> tuple[str, PotentialSpec, float, RadialGrid, float]:
        (label, spec), mu = pair
        grid = build_grid(n_per_panel, mu=mu, grading_levels=grading_levels)
        tc = tc_bisect(spec, mu, 0, rel_tol, grid=grid, serial=True)
        if tc.below_floor:
            raise DomainError("equivalence sweep needs a positive T_c", label=label, mu=mu)
        return label, spec, mu, grid, tc.temperature

    bases = ordered_map(critical, [(item, mu) for item in specs for mu in mus], serial=serial)

    def case(job: tuple[tuple[str, PotentialSpec, float, RadialGrid, float], float]) -> EquivalenceCase:
        (label, spec, mu, grid, tc), factor = job
        params = ThermoParams.from_temperature(factor * tc, mu)
        verdict = instability_verdict(spec, params, ell_max=0, grid=grid, serial=True)
        state = solve_gap(spec, params, grid=grid)
        lowered = state.f_value < state.f_normal - 1e-12 * max(abs(state.f_normal), 1.0)
        return EquivalenceCase(
            label=label,
            mu=mu,
            temperature=params.temperature,
            tc=tc,
            linear_unstable=verdict.unstable,
            gap_nontrivial=not state.converged_to_trivial,
            energy_lowered=lowered,
        )

    cases = ordered_map(case, [(base, f) for base in bases for f in factors], serial=serial)
    inconsistent = [c for c in cases if not c.consistent]
    if inconsistent:
        logger.warning("%d of %d cases disagree", len(inconsistent), len(cases))
    return cases


def critical_temperature_report(
    spec: PotentialSpec,
    mu: float,
    ell_max: int = 4,
    rel_tol: float = DEFAULT_REL_TOL,
    grid: RadialGrid | None = None,
    t_floor: float | None = None,
    t_upper: float | None = None,
    serial: bool = False,
) -> TcReport:
    """Both T_c methods together with every available upper bound."""
    grid = grid or build_grid(mu=mu)
    floor = t_floor or default_t_floor(mu)
    notes: list[str] = []
    tc_eigen = tc_bisect(spec, mu, ell_max, rel_tol, grid=grid, t_floor=floor, t_upper=t_upper, serial=serial)

    tc_bs = None
    disagreement = None
    if tc_eigen.below_floor:
        notes.append("no instability above the floor temperature; Birman-Schwinger search skipped")
    else:
        try:
            tc_bs = tc_birman_schwinger(
                spec, mu, rel_tol, ell=tc_eigen.minimizing_ell, grid=grid, t_floor=floor, t_upper=t_upper
            )
            disagreement = abs(tc_bs.temperature - tc_eigen.temperature) / tc_eigen.temperature
        except BracketError as exc:
            logger.warning("Birman-Schwinger bisection failed: %s", exc.message)
            notes.append(f"birman_schwinger: {exc.message}")

    bound = tc_upper_bound(spec, mu)
    rough = rough_upper_bound(spec)
    satisfied = {"rough": tc_eigen.temperature <= rough}
    if bound.hypothesis_holds:
        satisfied["upper_bound"] = tc_eigen.temperature <= bound.value
    else:
        notes.append(f"upper bound: {bound.reason}")
    return TcReport(
        tc_eigen=tc_eigen,
        tc_bs=tc_bs,
        upper_bound=bound,
        bound_rough=rough,
        bounds_satisfied=satisfied,
        minimizing_ell=tc_eigen.minimizing_ell,
        relative_disagreement=disagreement,
        t_floor=floor,
        notes=tuple(notes),
    )
