from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from bcslab.errors import DomainError

# beta value standing for zero temperature
ZERO_TEMPERATURE = math.inf


@dataclass(frozen=True)
class ThermoParams:
    beta: float
    mu: float

    def __post_init__(self) -> None:
        if not (self.beta > 0) or math.isnan(self.beta):
            raise DomainError("beta must be positive or infinite", beta=self.beta)
        if not math.isfinite(self.mu):
            raise DomainError("mu must be finite", mu=self.mu)

    @classmethod
    def from_temperature(cls, temperature: float, mu: float) -> ThermoParams:
        if temperature < 0 or math.isnan(temperature):
            raise DomainError("temperature must be >= 0", temperature=temperature)
        beta = ZERO_TEMPERATURE if temperature == 0 else 1.0 / temperature
        return cls(beta=beta, mu=mu)

    @property
    def is_zero_temperature(self) -> bool:
        return math.isinf(self.beta)

    @property
    def temperature(self) -> float:
        return 0.0 if self.is_zero_temperature else 1.0 / self.beta


@dataclass(frozen=True)
class PotentialSpec:
    """Radial pair potential V(r).

    ``params`` holds the model parameters as ``(name, value)`` pairs so the
    spec stays hashable. ``part`` selects the pointwise function actually
    represented: the full V, its positive part V+, its negative part V-, or
    the square roots of those. With ``attractive_only`` the full potential is
    replaced by its attractive piece min(V, 0) = -V-.
    """

    model: str
    params: tuple[tuple[str, float], ...] = ()
    lambda_scale: float = 1.0
    samples: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    part: str = "full"
    attractive_only: bool = False

    def param(self, name: str) -> float:
        return dict(self.params)[name]


@dataclass(frozen=True)
class PotentialNorms:
    l1_negative: float
    l32_negative: float
    linf_negative: float
    l1_positive: float
    l32_positive: float
    linf_positive: float
    positive: PotentialSpec
    negative: PotentialSpec


@dataclass(frozen=True, eq=False)
class RadialGrid:
    nodes: np.ndarray
    weights: np.ndarray
    p_max: float
    panel_edges: np.ndarray
    n_per_panel: int
    grading_levels: int
    fermi_momentum: float | None = None
    base_panels: int = 5
    mu: float = 0.0

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def p2(self) -> np.ndarray:
        return self.nodes**2

    @property
    def basis_scale(self) -> np.ndarray:
        # e_i = p_i sqrt(w_i) h(p_i)
        return self.nodes * np.sqrt(self.weights)

    @property
    def measure(self) -> np.ndarray:
        return self.nodes**2 * self.weights

    def metadata(self) -> dict:
        return {
            "n": self.size,
            "p_max": self.p_max,
            "n_per_panel": self.n_per_panel,
            "grading_levels": self.grading_levels,
            "base_panels": self.base_panels,
            "panels": int(self.panel_edges.size - 1),
        }


@dataclass(frozen=True, eq=False)
class SectorOperator:
    ell: int
    grid: RadialGrid
    matrix: np.ndarray
    params: ThermoParams
    kind: str = "kinetic"  # "kinetic" (K + V) or "birman_schwinger"
    e_shift: float = 0.0


@dataclass(frozen=True)
class CriterionReport:
    eigenvalues: dict[int, float]
    unstable: bool
    indeterminate: bool
    minimizing_ell: int
    tol_eig: float
    grid: dict
    bs_norm: float | None = None

    @property
    def lowest(self) -> float:
        return self.eigenvalues[self.minimizing_ell]


@dataclass(frozen=True, eq=False)
class GapState:
    grid: RadialGrid
    params: ThermoParams
    delta: np.ndarray
    energy: np.ndarray
    gamma: np.ndarray
    alpha_hat: np.ndarray
    xi: float
    f_value: float
    f_normal: float
    density: float
    residual_sup: float
    iterations: int
    converged_to_trivial: bool
    seed_mode: str = "constant"
    residual_history: tuple[float, ...] = ()

    @property
    def delta_at_fermi(self) -> float:
        target = math.sqrt(max(self.params.mu, 0.0))
        return float(self.delta[int(np.argmin(np.abs(self.grid.nodes - target)))])


@dataclass(frozen=True)
class StationarityResiduals:
    r_alpha: float
    r_gamma: float


@dataclass(frozen=True)
class TcResult:
    temperature: float
    bracket: tuple[float, float]
    below_floor: bool
    method: str
    minimizing_ell: int = 0
    steps: int = 0

    @property
    def bracket_width(self) -> float:
        return self.bracket[1] - self.bracket[0]


@dataclass(frozen=True)
class BoundResult:
    hypothesis_holds: bool
    value: float | None
    lhs: float
    threshold: float
    reason: str = ""


@dataclass(frozen=True)
class TcReport:
    tc_eigen: TcResult
    tc_bs: TcResult | None
    upper_bound: BoundResult
    bound_rough: float
    bounds_satisfied: dict[str, bool]
    minimizing_ell: int
    relative_disagreement: float | None
    t_floor: float
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class SweepRow:
    coupling: float
    tc: float | None
    upper_bound: float | None


@dataclass(frozen=True)
class SweepFit:
    slope: float
    intercept: float
    r2: float
    points: int

    @property
    def decay_constant(self) -> float:
        # ln Tc = -c / lambda + b
        return -self.slope


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    fit: SweepFit | None
    t_floor: float


@dataclass(frozen=True)
class IdentityCheck:
    lhs: float
    rhs: float
    defect: float


@dataclass(frozen=True)
class EquivalenceCase:
    label: str
    mu: float
    temperature: float
    tc: float
    linear_unstable: bool
    gap_nontrivial: bool
    energy_lowered: bool

    @property
    def consistent(self) -> bool:
        return self.linear_unstable == self.gap_nontrivial == self.energy_lowered


@dataclass(frozen=True)
class InvariantResult:
    name: str
    passed: bool
    detail: str = ""
    values: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PersistenceCheck:
    tc_full: TcResult
    tc_attractive: TcResult
    positive_part_norm: float
    temperature: float

    @property
    def persists(self) -> bool:
        return not self.tc_full.below_floor
