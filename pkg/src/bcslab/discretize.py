"""Momentum grids and dense sector matrices.

A radial function h is represented by e_i = p_i sqrt(w_i) h(p_i), where w_i
are Gauss-Legendre weights for dp. In that basis the radial quadratic form
int k |h|^2 p^2 dp + int int h W h p^2 q^2 dp dq is e . H e, which is the
three-dimensional form divided by 4pi.
"""

from __future__ import annotations

import functools
import logging
import math

import numpy as np
from scipy import linalg, special

from bcslab.errors import ConfigError, DomainError, PreconditionError
from bcslab.models import PotentialSpec, RadialGrid, SectorOperator, ThermoParams
from bcslab.potential import sector_kernel, with_part
from bcslab.symbols import k_symbol

logger = logging.getLogger(__name__)

DEFAULT_N_PER_PANEL = 16
DEFAULT_GRADING_LEVELS = 6
DEFAULT_BASE_PANELS = 5


def default_p_max(mu: float) -> float:
    return 8.0 * max(math.sqrt(max(mu, 0.0)), 1.0)


def build_grid(
    n_per_panel: int = DEFAULT_N_PER_PANEL,
    p_max: float | None = None,
    mu: float = 0.0,
    grading_levels: int = DEFAULT_GRADING_LEVELS,
    base_panels: int = DEFAULT_BASE_PANELS,
) -> RadialGrid:
    """Composite Gauss-Legendre grid on [0, p_max], graded dyadically toward sqrt(mu)."""
    if p_max is None:
        p_max = default_p_max(mu)
    if n_per_panel < 4:
        raise ConfigError("grid.n_per_panel must be >= 4", key="grid.n_per_panel", value=n_per_panel)
    if base_panels < 1:
        raise ConfigError("grid.base_panels must be >= 1", key="grid.base_panels", value=base_panels)
    if grading_levels < 0:
        raise ConfigError("grid.grading_levels must be >= 0", key="grid.grading_levels", value=grading_levels)
    if not p_max > 0 or not math.isfinite(p_max):
        raise ConfigError("grid.p_max must be positive", key="grid.p_max", value=p_max)

    edges = set(np.linspace(0.0, p_max, base_panels + 1).tolist())
    fermi = None
    if mu > 0:
        fermi = math.sqrt(mu)
        if p_max <= fermi:
            raise ConfigError("grid.p_max must exceed the Fermi momentum sqrt(mu)", key="grid.p_max", value=p_max, fermi_momentum=fermi)
        edges.add(fermi)
        ordered = sorted(edges)
        i = ordered.index(fermi)
        left, right = ordered[i - 1], ordered[i + 1]
        for level in range(1, grading_levels + 1):
            edges.add(fermi - (fermi - left) * 2.0**-level)
            edges.add(fermi + (right - fermi) * 2.0**-level)
    panel_edges = np.array(sorted(edges))

    x, wx = special.roots_legendre(n_per_panel)
    mid = 0.5 * (panel_edges[1:] + panel_edges[:-1])
    half = 0.5 * np.diff(panel_edges)
    nodes = (mid[:, None] + half[:, None] * x).ravel()
    weights = (half[:, None] * wx).ravel()
    logger.debug("grid: %d nodes on %d panels, p_max=%g", nodes.size, panel_edges.size - 1, p_max)
    return RadialGrid(
        nodes=nodes,
        weights=weights,
        p_max=float(p_max),
        panel_edges=panel_edges,
        n_per_panel=n_per_panel,
        grading_levels=grading_levels,
        fermi_momentum=fermi,
        base_panels=base_panels,
        mu=float(mu),
    )


def refined(grid: RadialGrid, factor: int = 2) -> RadialGrid:
    """Same panels with factor times the nodes per panel."""
    return build_grid(grid.n_per_panel * factor, grid.p_max, grid.mu, grid.grading_levels, grid.base_panels)


@functools.lru_cache(maxsize=64)
def sector_potential_matrix(grid: RadialGrid, spec: PotentialSpec, ell: int, route: str = "auto") -> np.ndarray:
    """W_l(p_i, p_j) on the grid nodes; temperature independent, so cached per grid."""
    matrix = sector_kernel(spec, ell, route).matrix(grid.nodes)
    matrix.setflags(write=False)
    return matrix


def _sandwich(grid: RadialGrid, spec: PotentialSpec, ell: int, route: str) -> np.ndarray:
    s = grid.basis_scale
    return s[:, None] * sector_potential_matrix(grid, spec, ell, route) * s[None, :]


def assemble_sector_operator(
    grid: RadialGrid, spec: PotentialSpec, ell: int, params: ThermoParams, route: str = "auto"
) -> SectorOperator:
    """Matrix of K + V in sector ell."""
    h = np.diag(np.asarray(k_symbol(grid.p2, params))) + _sandwich(grid, spec, ell, route)
    h = 0.5 * (h + h.T)
    return SectorOperator(ell=ell, grid=grid, matrix=h, params=params, kind="kinetic")


def assemble_birman_schwinger(
    grid: RadialGrid,
    spec: PotentialSpec,
    ell: int,
    params: ThermoParams,
    e_shift: float = 0.0,
    route: str = "auto",
) -> SectorOperator:
    """Matrix of V-^{1/2} (K + V+ + e)^{-1} V-^{1/2} in sector ell."""
    if e_shift < 0:
        raise PreconditionError("e_shift must be >= 0", e_shift=e_shift)
    if params.is_zero_temperature and e_shift == 0:
        raise PreconditionError("zero temperature needs e_shift > 0", e_shift=e_shift)
    root = _sandwich(grid, with_part(spec, "sqrt_negative"), ell, route)
    root = 0.5 * (root + root.T)
    inner = np.diag(np.asarray(k_symbol(grid.p2, params)) + e_shift) + _sandwich(
        grid, with_part(spec, "positive"), ell, route
    )
    inner = 0.5 * (inner + inner.T)
    try:
        factor = linalg.cho_factor(inner)
    except linalg.LinAlgError as exc:
        raise PreconditionError("K + V+ + e is not positive definite on this grid", e_shift=e_shift, ell=ell) from exc
    b = root @ linalg.cho_solve(factor, root)
    b = 0.5 * (b + b.T)
    return SectorOperator(ell=ell, grid=grid, matrix=b, params=params, kind="birman_schwinger", e_shift=e_shift)


def basis_vector(grid: RadialGrid, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.size,):
        raise DomainError("node values must match the grid", expected=grid.size, got=list(values.shape))
    return grid.basis_scale * values


def quadratic_form(op: SectorOperator, values: np.ndarray) -> float:
    """<h, H h> for a radial function given by its node values (radial normalization)."""
    e = basis_vector(op.grid, values)
    return float(e @ op.matrix @ e)
