"""Subcommand execution: compute, write artifacts, map failures to exit codes."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from bcslab import critical, gap, linear_criterion
from bcslab.config import RunConfig
from bcslab.errors import BcsLabError, ConfigError, DomainError, OutputError, PotentialError, PreconditionError
from bcslab.output import emit_results, to_jsonable
from bcslab.selftest import run_selftest

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("spectrum", "gap", "tc", "sweep", "selftest")

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2

ERROR_FILE = "error.json"


@dataclass
class RunOutcome:
    name: str
    exit_code: int
    artifacts: list[Path] = field(default_factory=list)
    summary: list[tuple[str, str]] = field(default_factory=list)
    error: dict[str, Any] | None = None


def exit_code_for(exc: BcsLabError) -> int:
    if isinstance(exc, (ConfigError, PotentialError, DomainError, PreconditionError)):
        return EXIT_CONFIG
    return EXIT_NUMERICAL


def _fmt(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _document(config: RunConfig | None, result: Any) -> dict[str, Any]:
    return {"config": config.to_record() if config else None, "result": to_jsonable(result)}


def _spectrum(config: RunConfig, out_dir: Path, serial: bool) -> RunOutcome:
    report = linear_criterion.instability_verdict(
        config.potential,
        config.params,
        ell_max=config.criterion.ell_max,
        grid=config.build_grid(),
        serial=serial,
        with_bs_norm=True,
        e_shift=config.e_shift,
    )
    path = emit_results(_document(config, report), "json", out_dir / "spectrum.json")
    verdict = "indeterminate" if report.indeterminate else ("unstable" if report.unstable else "stable")
    summary = [(f"lambda_min[l={ell}]", _fmt(value)) for ell, value in report.eigenvalues.items()]
    summary += [("verdict", verdict), ("minimizing_ell", str(report.minimizing_ell)), ("bs_norm", _fmt(report.bs_norm))]
    return RunOutcome("spectrum", EXIT_OK, [path], summary)


def _gap(config: RunConfig, out_dir: Path, serial: bool) -> RunOutcome:
    solver = config.solver
    state = gap.solve_gap(
        config.potential,
        config.params,
        grid=config.build_grid(),
        seed_mode=solver.seed_mode,
        damping=solver.damping,
        tol=solver.tol,
        max_iter=solver.max_iter,
    )
    residuals = gap.stationarity_residuals(state, config.potential)
    rows = [
        {"p": p, "delta": d, "energy": e, "gamma": g, "alpha_hat": a}
        for p, d, e, g, a in zip(
            state.grid.nodes, state.delta, state.energy, state.gamma, state.alpha_hat, strict=True
        )
    ]
    fmt = config.output.format
    profile = emit_results(rows if fmt == "csv" else _document(config, rows), fmt, out_dir / f"gap.{fmt}")
    summary_record = {
        "trivial": state.converged_to_trivial,
        "xi": state.xi,
        "delta_at_fermi": state.delta_at_fermi,
        "f_value": state.f_value,
        "f_normal": state.f_normal,
        "density": state.density,
        "residual_sup": state.residual_sup,
        "r_alpha": residuals.r_alpha,
        "r_gamma": residuals.r_gamma,
        "iterations": state.iterations,
        "seed_mode": state.seed_mode,
        "grid": state.grid,
    }
    summary_path = emit_results(_document(config, summary_record), "json", out_dir / "gap_summary.json")
    summary = [
        (key, _fmt(summary_record[key]))
        for key in ("trivial", "xi", "f_value", "f_normal", "density", "residual_sup", "r_alpha", "r_gamma", "iterations")
    ]
    return RunOutcome("gap", EXIT_OK, [profile, summary_path], summary)


def _tc(config: RunConfig, out_dir: Path, serial: bool) -> RunOutcome:
    report = critical.critical_temperature_report(
        config.potential,
        config.mu,
        ell_max=config.criterion.ell_max,
        rel_tol=config.tc.rel_tol,
        grid=config.build_grid(),
        t_floor=config.t_floor,
        t_upper=config.tc.t_upper,
        serial=serial,
    )
    path = emit_results(_document(config, report), "json", out_dir / "tc.json")
    summary = [
        ("tc_eigen", "below floor" if report.tc_eigen.below_floor else _fmt(report.tc_eigen.temperature)),
        ("tc_bs", _fmt(report.tc_bs.temperature if report.tc_bs else None)),
        ("relative_disagreement", _fmt(report.relative_disagreement)),
        ("bound_rough", _fmt(report.bound_rough)),
        ("upper_bound", _fmt(report.upper_bound.value)),
        ("minimizing_ell", str(report.minimizing_ell)),
    ]
    summary += [(f"bound {name}", "satisfied" if ok else "VIOLATED") for name, ok in report.bounds_satisfied.items()]
    return RunOutcome("tc", EXIT_OK, [path], summary)


def _sweep(config: RunConfig, out_dir: Path, serial: bool) -> RunOutcome:
    result = critical.lambda_sweep(
        config.potential,
        config.mu,
        config.lambdas,
        ell_max=config.criterion.ell_max,
        rel_tol=config.tc.rel_tol,
        grid=config.build_grid(),
        t_floor=config.t_floor,
        serial=serial,
    )
    rows = [{"lambda": row.coupling, "tc": row.tc, "upper_bound": row.upper_bound} for row in result.rows]
    fmt = config.output.format
    table = emit_results(rows if fmt == "csv" else _document(config, rows), fmt, out_dir / f"sweep.{fmt}")
    fit_record = {"fit": result.fit, "t_floor": result.t_floor}
    if result.fit is not None:
        fit_record["decay_constant"] = result.fit.decay_constant
    fit_path = emit_results(_document(config, fit_record), "json", out_dir / "sweep_fit.json")
    summary = [(f"T_c(lambda={row.coupling:g})", _fmt(row.tc)) for row in result.rows]
    if result.fit is not None:
        summary += [("decay_constant", _fmt(result.fit.decay_constant)), ("r2", _fmt(result.fit.r2))]
    return RunOutcome("sweep", EXIT_OK, [table, fit_path], summary)


def _selftest(config: RunConfig | None, out_dir: Path, serial: bool) -> RunOutcome:
    results = run_selftest(serial=serial)
    path = emit_results(_document(config, {"invariants": results}), "json", out_dir / "selftest.json")
    summary = [(r.name, "pass" if r.passed else f"FAIL {r.detail}".strip()) for r in results]
    code = EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL
    return RunOutcome("selftest", code, [path], summary)


HANDLERS: dict[str, Callable[[Any, Path, bool], RunOutcome]] = {
    "spectrum": _spectrum,
    "gap": _gap,
    "tc": _tc,
    "sweep": _sweep,
    "selftest": _selftest,
}


def record_failure(name: str, exc: BcsLabError, config: RunConfig | None, out_dir: Path) -> RunOutcome:
    """Write the error record to <out_dir>/error.json and return the failed outcome."""
    record = to_jsonable({**exc.to_record(), "subcommand": name, "config": config.to_record() if config else None})
    try:
        artifacts = [emit_results(record, "json", out_dir / ERROR_FILE)]
    except OutputError:
        logger.exception("could not write %s", ERROR_FILE)
        artifacts = []
    return RunOutcome(name, exit_code_for(exc), artifacts, error=record)


def run_subcommand(
    name: str, config: RunConfig | None, out_dir: Path | None = None, serial: bool = False
) -> RunOutcome:
    """Run one subcommand; failures become an error record and a nonzero exit code."""
    if out_dir is None:
        out_dir = config.output.dir if config else Path("results")
    try:
        if name not in HANDLERS:
            raise ConfigError(f"unknown subcommand {name!r}", accepted=list(SUBCOMMANDS))
        if config is None and name != "selftest":
            raise ConfigError(f"{name} needs a config file")
        logger.info("running %s into %s", name, out_dir)
        return HANDLERS[name](config, out_dir, serial)
    except BcsLabError as exc:
        logger.exception("%s failed", name)
        return record_failure(name, exc, config, out_dir)
