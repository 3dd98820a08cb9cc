from __future__ import annotations

import math

import numpy as np
import pytest

from bcslab.discretize import (
    assemble_birman_schwinger,
    assemble_sector_operator,
    build_grid,
    default_p_max,
    quadratic_form,
    refined,
    sector_potential_matrix,
)
from bcslab.errors import ConfigError, DomainError, PreconditionError
from bcslab.models import ThermoParams
from bcslab.potential import gaussian
from bcslab.symbols import k_symbol


def test_default_p_max():
    assert default_p_max(0.5) == 8.0
    assert default_p_max(4.0) == 16.0


def test_grid_integrates_polynomials_exactly(grid):
    assert float(np.sum(grid.measure)) == pytest.approx(grid.p_max**3 / 3.0, rel=1e-12)
    assert float(np.sum(grid.weights * grid.nodes**7)) == pytest.approx(grid.p_max**8 / 8.0, rel=1e-12)


def test_grid_has_a_panel_edge_at_the_fermi_momentum():
    grid = build_grid(mu=2.0)
    assert grid.fermi_momentum == pytest.approx(math.sqrt(2.0))
    assert np.any(np.isclose(grid.panel_edges, math.sqrt(2.0), rtol=0, atol=1e-15))
    # two dyadic edges per grading level around k_F
    assert grid.panel_edges.size - 1 == 5 + 1 + 2 * 6


def test_grid_without_fermi_surface():
    grid = build_grid(mu=-1.0, n_per_panel=6)
    assert grid.fermi_momentum is None
    assert grid.size == 6 * 5


def test_grid_metadata(small_grid):
    meta = small_grid.metadata()
    assert meta["n"] == small_grid.size
    assert meta["n_per_panel"] == 8


@pytest.mark.parametrize(
    "kwargs",
    [{"n_per_panel": 3}, {"grading_levels": -1}, {"base_panels": 0}, {"p_max": 0.5, "mu": 1.0}, {"p_max": math.inf}],
)
def test_invalid_grids(kwargs):
    with pytest.raises(ConfigError):
        build_grid(**kwargs)


def test_refined_keeps_panels(small_grid):
    fine = refined(small_grid)
    np.testing.assert_array_equal(fine.panel_edges, small_grid.panel_edges)
    assert fine.size == 2 * small_grid.size


def test_potential_matrix_is_cached_and_read_only(small_grid, deep_gaussian):
    first = sector_potential_matrix(small_grid, deep_gaussian, 0)
    assert sector_potential_matrix(small_grid, deep_gaussian, 0) is first
    with pytest.raises(ValueError):
        first[0, 0] = 1.0


def test_free_operator_is_the_symbol(small_grid, warm):
    op = assemble_sector_operator(small_grid, gaussian(0.0, 1.0), 0, warm)
    np.testing.assert_allclose(np.diag(op.matrix), k_symbol(small_grid.p2, warm))
    assert np.count_nonzero(op.matrix - np.diag(np.diag(op.matrix))) == 0


def test_sector_operator_is_symmetric(small_grid, two_well, warm):
    op = assemble_sector_operator(small_grid, two_well, 1, warm)
    np.testing.assert_array_equal(op.matrix, op.matrix.T)


def test_quadratic_form_of_potential_matches_position_space(grid, deep_gaussian, warm):
    # <h, V h> with h = exp(-p^2/2) is int V |h-check|^2 dx / 4pi, h-check = exp(-r^2/2)
    h = np.exp(-0.5 * grid.p2)
    free = assemble_sector_operator(grid, gaussian(0.0, 1.0), 0, warm)
    full = assemble_sector_operator(grid, deep_gaussian, 0, warm)
    potential_part = quadratic_form(full, h) - quadratic_form(free, h)
    # -5 int exp(-3 r^2 / 2) r^2 dr = -5 sqrt(pi) / 4 * (2/3)^{3/2}
    expected = -5.0 * math.sqrt(math.pi) / 4.0 * (2.0 / 3.0) ** 1.5
    assert potential_part == pytest.approx(expected, rel=1e-8)


@pytest.mark.parametrize("extra", [1, -1])
def test_quadratic_form_checks_length(small_grid, warm, extra):
    op = assemble_sector_operator(small_grid, gaussian(1.0, 1.0), 0, warm)
    with pytest.raises(DomainError) as info:
        quadratic_form(op, np.ones(small_grid.size + extra))
    assert info.value.context == {"expected": small_grid.size, "got": [small_grid.size + extra]}


def test_quadratic_form_rejects_a_column(small_grid, warm):
    op = assemble_sector_operator(small_grid, gaussian(1.0, 1.0), 0, warm)
    with pytest.raises(DomainError):
        quadratic_form(op, np.ones((small_grid.size, 1)))


def test_birman_schwinger_is_positive_semidefinite(small_grid, deep_gaussian, warm):
    op = assemble_birman_schwinger(small_grid, deep_gaussian, 0, warm)
    assert op.kind == "birman_schwinger"
    assert np.min(np.linalg.eigvalsh(op.matrix)) > -1e-12


def test_birman_schwinger_preconditions(small_grid, deep_gaussian, cold, warm):
    with pytest.raises(PreconditionError):
        assemble_birman_schwinger(small_grid, deep_gaussian, 0, warm, e_shift=-1.0)
    with pytest.raises(PreconditionError):
        assemble_birman_schwinger(small_grid, deep_gaussian, 0, cold)
    assemble_birman_schwinger(small_grid, deep_gaussian, 0, cold, e_shift=1e-3)


def test_zero_temperature_operator(small_grid):
    op = assemble_sector_operator(small_grid, gaussian(0.0, 1.0), 0, ThermoParams.from_temperature(0.0, 1.0))
    np.testing.assert_allclose(np.diag(op.matrix), np.abs(small_grid.p2 - 1.0))
