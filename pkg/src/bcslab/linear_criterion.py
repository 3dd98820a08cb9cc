"""Linear pairing criterion: spectra of K + V per sector and Birman-Schwinger norms."""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy import linalg

from bcslab.discretize import (
    assemble_birman_schwinger,
    assemble_sector_operator,
    build_grid,
    sector_potential_matrix,
)
from bcslab.errors import DomainError, EigenError
from bcslab.models import CriterionReport, PotentialSpec, RadialGrid, SectorOperator, ThermoParams
from bcslab.potential import decompose_and_norms, with_part
from bcslab.symbols import f_counterterm, k_symbol
from bcslab.workers import ordered_map

logger = logging.getLogger(__name__)

# 1/3 (2/pi)^{4/3}
HLS_CONSTANT = (2.0 / math.pi) ** (4.0 / 3.0) / 3.0
DEFAULT_ZERO_TEMPERATURE_SHIFT = 1e-3


def eigen_tolerance(params: ThermoParams) -> float:
    return max(1e-9 * (abs(params.mu) + params.temperature), 1e-12)


def _eigh(matrix: np.ndarray, **kwargs) -> tuple[np.ndarray, np.ndarray] | np.ndarray:
    try:
        return linalg.eigh(matrix, check_finite=True, **kwargs)
    except (linalg.LinAlgError, ValueError) as exc:
        finite = bool(np.all(np.isfinite(matrix)))
        raise EigenError(
            f"symmetric eigensolve failed: {exc}",
            size=int(matrix.shape[0]),
            finite=finite,
            norm=float(np.linalg.norm(matrix, ord="fro")) if finite else None,
        ) from exc


def spectrum(op: SectorOperator) -> np.ndarray:
    """All eigenvalues, ascending."""
    return _eigh(op.matrix, eigvals_only=True)


def lowest_eigenvalue(op: SectorOperator) -> float:
    return float(spectrum(op)[0])


def lowest_eigenpair(op: SectorOperator) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and its eigenfunction as node values h(p_i)."""
    values, vectors = _eigh(op.matrix, subset_by_index=[0, 0])
    h = vectors[:, 0] / op.grid.basis_scale
    if h[np.argmax(np.abs(h))] < 0:
        h = -h
    return float(values[0]), h


def _top_eigenvalue(matrix: np.ndarray) -> float:
    n = matrix.shape[0]
    return float(_eigh(matrix, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0])


def instability_verdict(
    spec: PotentialSpec,
    params: ThermoParams,
    ell_max: int = 4,
    grid: RadialGrid | None = None,
    serial: bool = False,
    with_bs_norm: bool = False,
    e_shift: float | None = None,
) -> CriterionReport:
    """Lowest eigenvalue of K + V in sectors 0..ell_max and the resulting verdict."""
    if ell_max < 0:
        raise DomainError("ell_max must be >= 0", ell_max=ell_max)
    grid = grid or build_grid(mu=params.mu)

    def sector_minimum(ell: int) -> float:
        return lowest_eigenvalue(assemble_sector_operator(grid, spec, ell, params))

    lowest = ordered_map(sector_minimum, range(ell_max + 1), serial=serial)
    eigenvalues = dict(enumerate(lowest))
    minimizing_ell = int(np.argmin(lowest))
    tol = eigen_tolerance(params)
    bottom = lowest[minimizing_ell]
    indeterminate = abs(bottom) <= tol
    if indeterminate:
        logger.warning("lowest eigenvalue %.3e is within %.1e of zero; verdict indeterminate at this resolution", bottom, tol)
    norm = None
    if with_bs_norm:
        norm = bs_norm(spec, params, e_shift, ell=minimizing_ell, grid=grid)
    return CriterionReport(
        eigenvalues=eigenvalues,
        unstable=bottom < -tol,
        indeterminate=indeterminate,
        minimizing_ell=minimizing_ell,
        tol_eig=tol,
        grid=grid.metadata(),
        bs_norm=norm,
    )


def bs_norm(
    spec: PotentialSpec,
    params: ThermoParams,
    e_shift: float | None = None,
    ell: int = 0,
    grid: RadialGrid | None = None,
) -> float:
    """||V-^{1/2} (K + V+ + e)^{-1} V-^{1/2}|| in sector ell."""
    if e_shift is None:
        e_shift = DEFAULT_ZERO_TEMPERATURE_SHIFT if params.is_zero_temperature else 0.0
    grid = grid or build_grid(mu=params.mu)
    op = assemble_birman_schwinger(grid, spec, ell, params, e_shift)
    return _top_eigenvalue(op.matrix)


def positive_part_norm(
    spec: PotentialSpec,
    params: ThermoParams,
    e_shift: float | None = None,
    ell: int = 0,
    grid: RadialGrid | None = None,
) -> float:
    """||V+^{1/2} (K + e)^{-1} V+^{1/2}||, the size of the repulsive perturbation."""
    if e_shift is None:
        e_shift = DEFAULT_ZERO_TEMPERATURE_SHIFT if params.is_zero_temperature else 0.0
    if params.is_zero_temperature and e_shift <= 0:
        raise DomainError("zero temperature needs e_shift > 0", e_shift=e_shift)
    grid = grid or build_grid(mu=params.mu)
    s = grid.basis_scale
    root = s[:, None] * sector_potential_matrix(grid, with_part(spec, "sqrt_positive"), ell) * s[None, :]
    inverse_k = 1.0 / (np.asarray(k_symbol(grid.p2, params)) + e_shift)
    b = root @ (inverse_k[:, None] * root)
    return _top_eigenvalue(0.5 * (b + b.T))


def bs_zero_temperature_bound(spec: PotentialSpec, mu: float, e: float) -> float:
    """mu^{1/2} ||V-||_1 f(e/mu) + 1/3 (2/pi)^{4/3} ||V-||_{3/2}."""
    if not mu > 0 or not e > 0:
        raise DomainError("bound needs mu > 0 and e > 0", mu=mu, e=e)
    norms = decompose_and_norms(spec)
    return math.sqrt(mu) * norms.l1_negative * f_counterterm(e / mu) + HLS_CONSTANT * norms.l32_negative
