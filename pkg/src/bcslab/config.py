"""Run configuration: flat ``key = value`` files with dotted keys.

Lines are tokenized by python-dotenv's parser, which also strips ``#``
comments and keeps the line number of every binding for error messages.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from dotenv.parser import parse_stream

from bcslab.discretize import DEFAULT_BASE_PANELS, DEFAULT_GRADING_LEVELS, DEFAULT_N_PER_PANEL, build_grid, default_p_max
from bcslab.errors import ConfigError, PotentialError
from bcslab.linear_criterion import DEFAULT_ZERO_TEMPERATURE_SHIFT
from bcslab.models import PotentialSpec, RadialGrid, ThermoParams
from bcslab.potential import MODELS, REQUIRED_PARAMS, load_table, make_potential

logger = logging.getLogger(__name__)

DEFAULT_LAMBDAS = (0.6, 0.8, 1.0, 1.25, 1.5)
SEED_MODES = ("constant", "linear-mode")
FORMATS = ("csv", "json")
POTENTIAL_PARAMS = ("depth", "width", "radius", "depth2", "width2")


@dataclass(frozen=True)
class GridConfig:
    n_per_panel: int = DEFAULT_N_PER_PANEL
    p_max: float | None = None
    grading_levels: int = DEFAULT_GRADING_LEVELS
    base_panels: int = DEFAULT_BASE_PANELS


@dataclass(frozen=True)
class SolverConfig:
    damping: float = 0.5
    tol: float = 1e-10
    max_iter: int = 20000
    seed_mode: str = "constant"


@dataclass(frozen=True)
class CriterionConfig:
    ell_max: int = 4
    e_shift: float | None = None


@dataclass(frozen=True)
class TcConfig:
    rel_tol: float = 1e-4
    t_floor: float | None = None
    t_upper: float | None = None


@dataclass(frozen=True)
class OutputConfig:
    dir: Path = Path("results")
    format: str = "csv"


@dataclass(frozen=True)
class RunConfig:
    mu: float
    temperature: float
    potential: PotentialSpec
    table: Path | None = None
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    criterion: CriterionConfig = field(default_factory=CriterionConfig)
    tc: TcConfig = field(default_factory=TcConfig)
    lambdas: tuple[float, ...] = DEFAULT_LAMBDAS
    output: OutputConfig = field(default_factory=OutputConfig)
    source: Path | None = None

    @property
    def params(self) -> ThermoParams:
        return ThermoParams.from_temperature(self.temperature, self.mu)

    @property
    def p_max(self) -> float:
        return self.grid.p_max if self.grid.p_max is not None else default_p_max(self.mu)

    @property
    def e_shift(self) -> float:
        if self.criterion.e_shift is not None:
            return self.criterion.e_shift
        return DEFAULT_ZERO_TEMPERATURE_SHIFT if self.temperature == 0 else 0.0

    @property
    def t_floor(self) -> float:
        return self.tc.t_floor if self.tc.t_floor is not None else 1e-6 * max(self.mu, 1.0)

    def build_grid(self) -> RadialGrid:
        g = self.grid
        return build_grid(g.n_per_panel, self.p_max, self.mu, g.grading_levels, g.base_panels)

    def to_record(self) -> dict[str, Any]:
        """The fully resolved configuration."""
        spec = self.potential
        return {
            "source": str(self.source) if self.source else None,
            "mu": self.mu,
            "temperature": "zero" if self.temperature == 0 else self.temperature,
            "potential": {
                "model": spec.model,
                **dict(spec.params),
                "lambda_scale": spec.lambda_scale,
                "table": str(self.table) if self.table else None,
            },
            "grid": {
                "n_per_panel": self.grid.n_per_panel,
                "p_max": self.p_max,
                "grading_levels": self.grid.grading_levels,
                "base_panels": self.grid.base_panels,
            },
            "solver": {
                "damping": self.solver.damping,
                "tol": self.solver.tol,
                "max_iter": self.solver.max_iter,
                "seed_mode": self.solver.seed_mode,
            },
            "criterion": {"ell_max": self.criterion.ell_max, "e_shift": self.e_shift},
            "tc": {"rel_tol": self.tc.rel_tol, "t_floor": self.t_floor, "t_upper": self.tc.t_upper},
            "sweep": {"lambdas": list(self.lambdas)},
            "output": {"dir": str(self.output.dir), "format": self.output.format},
        }


# -- value converters ------------------------------------------------------------

Converter = Callable[[str, str, int | None], Any]


def _where(line: int | None) -> str:
    return f" (line {line})" if line is not None else ""


def _number(
    minimum: float | None = None,
    maximum: float | None = None,
    *,
    open_min: bool = False,
    open_max: bool = False,
    integer: bool = False,
) -> Converter:
    low = "" if minimum is None else ("(" if open_min else "[") + f"{minimum:g}"
    high = "" if maximum is None else f"{maximum:g}" + (")" if open_max else "]")
    accepted = f"{low or '(-inf'}, {high or 'inf)'}"

    def convert(key: str, raw: str, line: int | None) -> float | int:
        try:
            value = int(raw) if integer else float(raw)
        except ValueError:
            kind = "an integer" if integer else "a number"
            raise ConfigError(f"{key} must be {kind}, got {raw!r}{_where(line)}", key=key, line=line) from None
        if not math.isfinite(value):
            raise ConfigError(f"{key} must be finite{_where(line)}", key=key, line=line)
        too_low = minimum is not None and (value <= minimum if open_min else value < minimum)
        too_high = maximum is not None and (value >= maximum if open_max else value > maximum)
        if too_low or too_high:
            raise ConfigError(
                f"{key} = {raw} is out of range; accepted {accepted}{_where(line)}", key=key, line=line, accepted=accepted
            )
        return value

    return convert


def _choice(options: tuple[str, ...]) -> Converter:
    def convert(key: str, raw: str, line: int | None) -> str:
        if raw not in options:
            raise ConfigError(
                f"{key} = {raw!r} is not one of {', '.join(options)}{_where(line)}", key=key, line=line, accepted=list(options)
            )
        return raw

    return convert


def _temperature(key: str, raw: str, line: int | None) -> float:
    if raw.strip().lower() == "zero":
        return 0.0
    return _number(0.0)(key, raw, line)


def _lambdas(key: str, raw: str, line: int | None) -> tuple[float, ...]:
    parse = _number(0.0, open_min=True)
    values = tuple(parse(key, item.strip(), line) for item in raw.split(",") if item.strip())
    if not values or list(values) != sorted(set(values)):
        raise ConfigError(f"{key} must be a strictly increasing list of positive numbers{_where(line)}", key=key, line=line)
    return values


def _text(key: str, raw: str, line: int | None) -> str:
    if not raw:
        raise ConfigError(f"{key} must not be empty{_where(line)}", key=key, line=line)
    return raw


CONVERTERS: dict[str, Converter] = {
    "mu": _number(),
    "temperature": _temperature,
    "potential.model": _choice(MODELS),
    "potential.depth": _number(),
    "potential.width": _number(0.0, open_min=True),
    "potential.radius": _number(0.0, open_min=True),
    "potential.depth2": _number(),
    "potential.width2": _number(0.0, open_min=True),
    "potential.lambda_scale": _number(),
    "potential.table": _text,
    "grid.n_per_panel": _number(4, integer=True),
    "grid.p_max": _number(0.0, open_min=True),
    "grid.grading_levels": _number(0, 40, integer=True),
    "grid.base_panels": _number(1, 200, integer=True),
    "solver.damping": _number(0.0, 1.0, open_min=True),
    "solver.tol": _number(0.0, 1e-2, open_min=True),
    "solver.max_iter": _number(1, integer=True),
    "solver.seed_mode": _choice(SEED_MODES),
    "criterion.ell_max": _number(0, 32, integer=True),
    "criterion.e_shift": _number(0.0),
    "tc.rel_tol": _number(1e-6, 1e-1, open_min=True, open_max=True),
    "tc.t_floor": _number(0.0, open_min=True),
    "tc.t_upper": _number(0.0, open_min=True),
    "sweep.lambdas": _lambdas,
    "output.dir": _text,
    "output.format": _choice(FORMATS),
}
REQUIRED_KEYS = ("mu", "potential.model")


# -- assembly --------------------------------------------------------------------


def _potential(values: Mapping[str, tuple[Any, int | None]], base_dir: Path) -> tuple[PotentialSpec, Path | None]:
    model, model_line = values["potential.model"]
    lambda_scale = values.get("potential.lambda_scale", (1.0, None))[0]
    required = REQUIRED_PARAMS[model]
    for name in POTENTIAL_PARAMS:
        key = f"potential.{name}"
        if name in required and key not in values:
            raise ConfigError(f"{key} is required for the {model} potential", key=key, line=model_line)
        if name not in required and key in values:
            raise ConfigError(f"{key} is not used by the {model} potential{_where(values[key][1])}", key=key, line=values[key][1])

    if model == "tabulated":
        if "potential.table" not in values:
            raise ConfigError("potential.table is required for the tabulated potential", key="potential.table", line=model_line)
        raw, line = values["potential.table"]
        table = (base_dir / raw).resolve()
        if not table.is_file():
            raise ConfigError(f"potential.table {raw!r} does not exist{_where(line)}", key="potential.table", line=line, path=str(table))
        return load_table(table, lambda_scale), table
    if "potential.table" in values:
        line = values["potential.table"][1]
        raise ConfigError(f"potential.table is only used by the tabulated potential{_where(line)}", key="potential.table", line=line)
    params = {name: values[f"potential.{name}"][0] for name in required}
    return make_potential(model, params, lambda_scale), None


def build_config(raw: Mapping[str, str], base_dir: Path | None = None, source: Path | None = None) -> RunConfig:
    """Validate string values keyed by dotted names into a RunConfig."""
    lines = raw if isinstance(raw, _LineMapping) else None
    values: dict[str, tuple[Any, int | None]] = {}
    for key, text in raw.items():
        line = lines.line_of(key) if lines is not None else None
        if key not in CONVERTERS:
            raise ConfigError(f"unknown key {key!r}{_where(line)}", key=key, line=line)
        values[key] = (CONVERTERS[key](key, text.strip(), line), line)
    for key in REQUIRED_KEYS:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}", key=key)

    def get(key: str, default: Any) -> Any:
        return values[key][0] if key in values else default

    mu = get("mu", None)
    base_dir = base_dir or Path.cwd()
    try:
        potential, table = _potential(values, base_dir)
    except PotentialError as exc:
        raise PotentialError(exc.message, key="potential", **exc.context) from exc

    grid = GridConfig(
        n_per_panel=get("grid.n_per_panel", DEFAULT_N_PER_PANEL),
        p_max=get("grid.p_max", None),
        grading_levels=get("grid.grading_levels", DEFAULT_GRADING_LEVELS),
        base_panels=get("grid.base_panels", DEFAULT_BASE_PANELS),
    )
    if grid.p_max is not None and mu > 0 and grid.p_max <= math.sqrt(mu):
        line = values["grid.p_max"][1]
        raise ConfigError(
            f"grid.p_max must exceed sqrt(mu) = {math.sqrt(mu):g}{_where(line)}", key="grid.p_max", line=line
        )
    temperature = get("temperature", 0.0)
    criterion = CriterionConfig(ell_max=get("criterion.ell_max", 4), e_shift=get("criterion.e_shift", None))
    if temperature == 0 and criterion.e_shift == 0:
        line = values["criterion.e_shift"][1]
        raise ConfigError(f"criterion.e_shift must be > 0 at zero temperature{_where(line)}", key="criterion.e_shift", line=line)

    output_dir = Path(get("output.dir", "results"))
    return RunConfig(
        mu=mu,
        temperature=temperature,
        potential=potential,
        table=table,
        grid=grid,
        solver=SolverConfig(
            damping=get("solver.damping", 0.5),
            tol=get("solver.tol", 1e-10),
            max_iter=get("solver.max_iter", 20000),
            seed_mode=get("solver.seed_mode", "constant"),
        ),
        criterion=criterion,
        tc=TcConfig(
            rel_tol=get("tc.rel_tol", 1e-4), t_floor=get("tc.t_floor", None), t_upper=get("tc.t_upper", None)
        ),
        lambdas=get("sweep.lambdas", DEFAULT_LAMBDAS),
        output=OutputConfig(dir=output_dir, format=get("output.format", "csv")),
        source=source,
    )


class _LineMapping(dict):
    """dict of raw values that remembers the line each key came from."""

    def __init__(self) -> None:
        super().__init__()
        self.lines: dict[str, int] = {}

    def line_of(self, key: str) -> int | None:
        return self.lines.get(key)


def parse_config(path: str | Path) -> RunConfig:
    """Read and validate a configuration file."""
    path = Path(path)
    raw = _LineMapping()
    try:
        with path.open(encoding="utf-8") as stream:
            for binding in parse_stream(stream):
                line = binding.original.line
                if binding.error:
                    raise ConfigError(
                        f"malformed line {line}: {binding.original.string.strip()!r}", line=line, path=str(path)
                    )
                if binding.key is None:
                    continue
                if binding.value is None:
                    raise ConfigError(f"{binding.key} has no value (line {line})", key=binding.key, line=line)
                if binding.key in raw:
                    first = raw.line_of(binding.key)
                    raise ConfigError(
                        f"duplicate key {binding.key!r} on line {line}, first set on line {first}",
                        key=binding.key,
                        line=line,
                        first_line=first,
                    )
                raw[binding.key] = binding.value
                raw.lines[binding.key] = line
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=str(path)) from exc
    logger.debug("read %d keys from %s", len(raw), path)
    return build_config(raw, base_dir=path.parent.resolve(), source=path)
