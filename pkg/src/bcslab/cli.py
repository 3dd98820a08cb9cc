from __future__ import annotations

from dotenv import load_dotenv

load_dotenv()

import logging
import os
from pathlib import Path

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from bcslab.config import RunConfig, parse_config
from bcslab.errors import BcsLabError
from bcslab.runner import RunOutcome, record_failure, run_subcommand

app = typer.Typer(help="bcslab: BCS gap equation and critical temperature for radial potentials")
console = Console()

ConfigOption = typer.Option(None, "--config", "-c", help="Run configuration (key = value file)")
SerialOption = typer.Option(False, "--serial", help="Single-threaded deterministic run")
OutOption = typer.Option(None, "--out", "-o", help="Artifact directory (overrides output.dir)")
LogLevelOption = typer.Option(None, "--log-level", help="DEBUG, INFO, WARNING or ERROR (default: $BCSLAB_LOG_LEVEL)")


def _configure_logging(level: str | None) -> None:
    level = (level or os.environ.get("BCSLAB_LOG_LEVEL") or "WARNING").upper()
    if level not in logging.getLevelNamesMapping():
        raise typer.BadParameter(f"unknown log level {level!r}", param_hint="--log-level")
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def _print(outcome: RunOutcome) -> None:
    if outcome.error is not None:
        console.print(f"[red]{outcome.name} failed:[/red] {outcome.error['message']}")
        table = Table(title="Error record")
        table.add_column("Field", style="magenta")
        table.add_column("Value", style="white")
        for key, value in outcome.error.items():
            if key != "config":
                table.add_row(key, str(value))
        console.print(table)
    else:
        table = Table(title=outcome.name)
        table.add_column("Quantity", style="cyan")
        table.add_column("Value", style="yellow")
        for key, value in outcome.summary:
            style = "red" if value.startswith(("FAIL", "VIOLATED")) else None
            table.add_row(key, value, style=style)
        console.print(table)
    for path in outcome.artifacts:
        console.print(f"[dim]wrote {path}[/dim]")


def _run(name: str, config_path: Path | None, out: Path | None, serial: bool, log_level: str | None) -> None:
    _configure_logging(log_level)
    config: RunConfig | None = None
    try:
        if config_path is not None:
            config = parse_config(config_path)
    except BcsLabError as exc:
        outcome = record_failure(name, exc, None, out or Path("results"))
    else:
        outcome = run_subcommand(name, config, out, serial)
    _print(outcome)
    if outcome.exit_code:
        raise typer.Exit(outcome.exit_code)


@app.command()
def spectrum(
    config: Path | None = ConfigOption,
    serial: bool = SerialOption,
    out: Path | None = OutOption,
    log_level: str | None = LogLevelOption,
) -> None:
    """Lowest eigenvalue of K + V per sector and the pairing verdict."""
    _run("spectrum", config, out, serial, log_level)


@app.command()
def gap(
    config: Path | None = ConfigOption,
    serial: bool = SerialOption,
    out: Path | None = OutOption,
    log_level: str | None = LogLevelOption,
) -> None:
    """Solve the gap equation and report the gap, free energies and residuals."""
    _run("gap", config, out, serial, log_level)


@app.command()
def tc(
    config: Path | None = ConfigOption,
    serial: bool = SerialOption,
    out: Path | None = OutOption,
    log_level: str | None = LogLevelOption,
) -> None:
    """Critical temperature by both methods, checked against the upper bounds."""
    _run("tc", config, out, serial, log_level)


@app.command()
def sweep(
    config: Path | None = ConfigOption,
    serial: bool = SerialOption,
    out: Path | None = OutOption,
    log_level: str | None = LogLevelOption,
) -> None:
    """T_c over the coupling list in sweep.lambdas with the exponential fit."""
    _run("sweep", config, out, serial, log_level)


@app.command()
def selftest(
    config: Path | None = ConfigOption,
    serial: bool = SerialOption,
    out: Path | None = OutOption,
    log_level: str | None = LogLevelOption,
) -> None:
    """Run the invariant battery."""
    _run("selftest", config, out, serial, log_level)
