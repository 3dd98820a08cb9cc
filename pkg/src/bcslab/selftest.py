"""Invariant battery behind ``bcslab selftest``.

Each check is cheap enough to run on every checkout and returns an
InvariantResult instead of raising, so one failure does not hide the rest.
"""

from __future__ import annotations

import logging
from collections.abc import Callable

import numpy as np

from bcslab import critical, discretize, gap, linear_criterion, potential, symbols
from bcslab.errors import BcsLabError, ConfigError
from bcslab.models import InvariantResult, ThermoParams
from bcslab.workers import ordered_map

logger = logging.getLogger(__name__)

Check = Callable[[bool], InvariantResult]
CHECKS: dict[str, Check] = {}


def invariant(name: str) -> Callable[[Check], Check]:
    def register(fn: Check) -> Check:
        CHECKS[name] = fn
        return fn

    return register


@invariant("a_constant")
def _a_constant(serial: bool) -> InvariantResult:
    a = symbols.a_constant()
    return InvariantResult("a_constant", abs(a - 0.654) <= 1e-3, values={"a": a})


@invariant("k_symbol_sandwich")
def _sandwich(serial: bool) -> InvariantResult:
    rng = np.random.default_rng(20240611)
    a = symbols.a_constant()
    beta = 10.0 ** rng.uniform(-1.0, 2.0, 1000)
    mu = rng.uniform(-2.0, 4.0, 1000)
    p2 = rng.uniform(0.0, 10.0, 1000)
    k = np.array([symbols.k_symbol(x, ThermoParams(b, m)) for x, b, m in zip(p2, beta, mu)])
    envelope = np.abs(p2 - mu) + 2.0 / beta
    lower = float(np.max(a * envelope - k))
    upper = float(np.max(k - envelope))
    slack = 1e-12 * float(np.max(envelope))
    return InvariantResult("k_symbol_sandwich", lower <= slack and upper <= slack, values={"lower": lower, "upper": upper})


@invariant("f_counterterm_closed_form")
def _f_closed_form(serial: bool) -> InvariantResult:
    ts = np.logspace(-8, 4, 13)
    worst = max(abs(symbols.f_counterterm(t) - symbols.f_counterterm_closed_form(t)) for t in ts)
    return InvariantResult("f_counterterm_closed_form", worst <= 1e-8, values={"max_abs_difference": worst})


@invariant("counterterm_identity")
def _identity(serial: bool) -> InvariantResult:
    defects = [critical.counterterm_identity_check(e, mu).defect for e, mu in ((0.1, 1.0), (1.0, 1.0), (0.5, 4.0))]
    return InvariantResult("counterterm_identity", max(defects) <= 1e-6, values={"defects": defects})


@invariant("kernel_routes_agree")
def _routes(serial: bool) -> InvariantResult:
    p = np.linspace(0.05, 4.0, 9)
    worst = 0.0
    for spec in (potential.gaussian(1.0, 1.0), potential.square_well(1.0, 1.0)):
        for ell in (0, 1, 2):
            a = potential.sector_kernel(spec, ell, "A").matrix(p)
            b = potential.sector_kernel(spec, ell, "B").matrix(p)
            worst = max(worst, float(np.max(np.abs(a - b))))
    return InvariantResult("kernel_routes_agree", worst <= 1e-8, values={"max_abs_difference": worst})


@invariant("decomposition")
def _decomposition(serial: bool) -> InvariantResult:
    spec = potential.two_gaussian(5.0, 1.0, -0.5, 2.0)
    r = np.linspace(0.0, 10.0, 2001)
    v = potential.evaluate_position(spec, r)
    plus = potential.evaluate_position(potential.with_part(spec, "positive"), r)
    minus = potential.evaluate_position(potential.with_part(spec, "negative"), r)
    ok = bool(np.all(plus * minus == 0.0) and np.max(np.abs(plus - minus - v)) <= 1e-15)
    return InvariantResult("decomposition", ok)


@invariant("grid_exactness")
def _grid(serial: bool) -> InvariantResult:
    grid = discretize.build_grid(mu=1.0)
    exact = grid.p_max**3 / 3.0
    error = abs(float(np.sum(grid.measure)) - exact) / exact
    return InvariantResult("grid_exactness", error <= 1e-12, values={"relative_error": error})


@invariant("free_operator_bound")
def _free(serial: bool) -> InvariantResult:
    params = ThermoParams(beta=2.0, mu=1.0)
    grid = discretize.build_grid(mu=1.0)
    spec = potential.gaussian(0.0, 1.0)
    lowest = linear_criterion.lowest_eigenvalue(discretize.assemble_sector_operator(grid, spec, 0, params))
    return InvariantResult("free_operator_bound", lowest >= 2.0 / params.beta - 1e-12, values={"lowest": lowest})


@invariant("zero_temperature_bs_divergence")
def _bs_divergence(serial: bool) -> InvariantResult:
    spec = potential.gaussian(1.0, 1.0)
    params = ThermoParams.from_temperature(0.0, 1.0)
    grid = discretize.build_grid(mu=1.0)
    shifts = (1e-1, 1e-2, 1e-3, 1e-4)
    norms = [linear_criterion.bs_norm(spec, params, e, grid=grid) for e in shifts]
    bounds = [linear_criterion.bs_zero_temperature_bound(spec, 1.0, e) for e in shifts]
    increasing = all(b > a for a, b in zip(norms, norms[1:]))
    bounded = all(n <= b for n, b in zip(norms, bounds))
    return InvariantResult(
        "zero_temperature_bs_divergence", increasing and bounded, values={"norms": norms, "bounds": bounds}
    )


@invariant("zero_temperature_gap")
def _zero_temperature_gap(serial: bool) -> InvariantResult:
    spec = potential.gaussian(5.0, 1.0)
    params = ThermoParams.from_temperature(0.0, 1.0)
    state = gap.solve_gap(spec, params)
    purity = float(np.max(np.abs(state.gamma * (1.0 - state.gamma) - state.alpha_hat**2)))
    ok = not state.converged_to_trivial and purity <= 1e-12 and state.xi > 0 and state.f_value < state.f_normal
    return InvariantResult("zero_temperature_gap", ok, values={"xi": state.xi, "purity_defect": purity})


@invariant("gap_quality")
def _gap_quality(serial: bool) -> InvariantResult:
    spec = potential.gaussian(5.0, 1.0)
    grid = discretize.build_grid(n_per_panel=8, mu=1.0, grading_levels=4)
    paired = gap.solve_gap(spec, ThermoParams.from_temperature(0.05, 1.0), grid=grid)
    residuals = gap.stationarity_residuals(paired, spec)
    hot = ThermoParams.from_temperature(3.0, 1.0)
    trivial = [gap.solve_gap(spec, hot, grid=grid, seed_mode=mode).converged_to_trivial for mode in gap.SEED_MODES]
    ok = (
        not paired.converged_to_trivial
        and paired.residual_sup <= 1e-8
        and max(residuals.r_alpha, residuals.r_gamma) <= 1e-6
        and all(trivial)
    )
    return InvariantResult(
        "gap_quality",
        ok,
        values={
            "residual_sup": paired.residual_sup,
            "r_alpha": residuals.r_alpha,
            "r_gamma": residuals.r_gamma,
            "trivial_above_tc": trivial,
        },
    )


@invariant("criteria_equivalence")
def _equivalence(serial: bool) -> InvariantResult:
    specs = [("gaussian", potential.gaussian(5.0, 1.0)), ("two_gaussian", potential.two_gaussian(5.0, 1.0, -0.5, 2.0))]
    cases = critical.equivalence_sweep(
        specs, [1.0], factors=(0.6, 1.5), rel_tol=1e-3, serial=serial, n_per_panel=8, grading_levels=4
    )
    bad = [f"{c.label} at T={c.temperature:.4g}" for c in cases if not c.consistent]
    return InvariantResult("criteria_equivalence", not bad, detail="; ".join(bad), values={"cases": len(cases)})


@invariant("tc_methods_agree")
def _tc(serial: bool) -> InvariantResult:
    report = critical.critical_temperature_report(potential.gaussian(5.0, 1.0), 1.0, ell_max=2, serial=serial)
    ok = (
        report.relative_disagreement is not None
        and report.relative_disagreement <= 5e-3
        and all(report.bounds_satisfied.values())
    )
    return InvariantResult(
        "tc_methods_agree",
        ok,
        values={
            "tc_eigen": report.tc_eigen.temperature,
            "tc_bs": report.tc_bs.temperature if report.tc_bs else None,
            "relative_disagreement": report.relative_disagreement,
        },
    )


def _run_one(item: tuple[str, Check], serial: bool) -> InvariantResult:
    name, check = item
    try:
        result = check(serial)
    except BcsLabError as exc:
        logger.exception("invariant %s raised", name)
        return InvariantResult(name, False, detail=exc.message, values=exc.to_record())
    log = logger.info if result.passed else logger.error
    log("invariant %s: %s", name, "pass" if result.passed else "FAIL")
    return result


def run_selftest(serial: bool = False, names: list[str] | None = None) -> list[InvariantResult]:
    unknown = sorted(set(names or ()) - set(CHECKS))
    if unknown:
        raise ConfigError(f"unknown invariants: {', '.join(unknown)}", accepted=list(CHECKS))
    selected = [(name, CHECKS[name]) for name in (names or CHECKS)]
    return ordered_map(lambda item: _run_one(item, serial=True), selected, serial=serial)
