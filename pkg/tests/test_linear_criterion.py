from __future__ import annotations

import numpy as np
import pytest

from bcslab.critical import tc_bisect
from bcslab.discretize import assemble_sector_operator, build_grid, default_p_max, refined
from bcslab.errors import DomainError, EigenError
from bcslab.linear_criterion import (
    HLS_CONSTANT,
    bs_norm,
    bs_zero_temperature_bound,
    eigen_tolerance,
    instability_verdict,
    lowest_eigenpair,
    lowest_eigenvalue,
    positive_part_norm,
    spectrum,
)
from bcslab.models import SectorOperator, ThermoParams
from bcslab.potential import attractive_part, gaussian


def test_hls_constant():
    assert HLS_CONSTANT == pytest.approx(0.1826, abs=1e-4)


def test_eigen_tolerance_scales_with_mu_and_temperature():
    assert eigen_tolerance(ThermoParams(beta=2.0, mu=1.0)) == pytest.approx(1.5e-9)
    assert eigen_tolerance(ThermoParams.from_temperature(0.0, 0.0)) == 1e-12


def test_deep_well_pairs_at_low_temperature(small_grid, deep_gaussian):
    report = instability_verdict(deep_gaussian, ThermoParams.from_temperature(0.05, 1.0), ell_max=2, grid=small_grid)
    assert report.unstable
    assert not report.indeterminate
    assert sorted(report.eigenvalues) == [0, 1, 2]
    assert report.lowest == min(report.eigenvalues.values())
    assert report.minimizing_ell == 0


def test_no_pairing_above_the_rough_bound(small_grid, deep_gaussian):
    # ||V-||_inf / 2 = 2.5, and K + V >= 2T - 5
    report = instability_verdict(deep_gaussian, ThermoParams.from_temperature(3.0, 1.0), ell_max=2, grid=small_grid)
    assert not report.unstable
    assert report.lowest > 0.9


def test_repulsive_potential_never_pairs(small_grid):
    report = instability_verdict(gaussian(-1.0, 1.0), ThermoParams.from_temperature(1e-4, 1.0), grid=small_grid)
    assert not report.unstable
    assert report.lowest >= 2e-4 - 1e-9


def test_serial_and_threaded_verdicts_agree(small_grid, two_well):
    params = ThermoParams.from_temperature(0.1, 1.0)
    serial = instability_verdict(two_well, params, ell_max=3, grid=small_grid, serial=True)
    threaded = instability_verdict(two_well, params, ell_max=3, grid=small_grid, serial=False)
    assert serial.eigenvalues == threaded.eigenvalues


def test_verdict_rejects_negative_ell_max(small_grid, deep_gaussian, warm):
    with pytest.raises(DomainError):
        instability_verdict(deep_gaussian, warm, ell_max=-1, grid=small_grid)


def test_verdict_can_carry_the_birman_schwinger_norm(small_grid, deep_gaussian):
    params = ThermoParams.from_temperature(0.05, 1.0)
    report = instability_verdict(deep_gaussian, params, ell_max=0, grid=small_grid, with_bs_norm=True)
    assert report.bs_norm == pytest.approx(bs_norm(deep_gaussian, params, grid=small_grid))
    assert report.bs_norm > 1.0


def test_lowest_eigenpair_solves_the_eigenproblem(small_grid, deep_gaussian, warm):
    op = assemble_sector_operator(small_grid, deep_gaussian, 0, warm)
    value, h = lowest_eigenpair(op)
    e = small_grid.basis_scale * h
    np.testing.assert_allclose(op.matrix @ e, value * e, atol=1e-9)
    assert h[np.argmax(np.abs(h))] > 0
    assert value == pytest.approx(lowest_eigenvalue(op))


def test_spectrum_is_ascending(small_grid, deep_gaussian, warm):
    values = spectrum(assemble_sector_operator(small_grid, deep_gaussian, 1, warm))
    assert np.all(np.diff(values) >= 0)


def test_eigen_failure_carries_diagnostics(small_grid, warm):
    matrix = np.full((3, 3), np.nan)
    with pytest.raises(EigenError) as info:
        spectrum(SectorOperator(ell=0, grid=small_grid, matrix=matrix, params=warm))
    assert info.value.context["finite"] is False


def test_birman_schwinger_norm_crosses_one_with_the_spectrum(small_grid, deep_gaussian):
    for temperature in (0.05, 3.0):
        params = ThermoParams.from_temperature(temperature, 1.0)
        unstable = instability_verdict(deep_gaussian, params, ell_max=0, grid=small_grid).unstable
        assert (bs_norm(deep_gaussian, params, grid=small_grid) > 1.0) == unstable


def test_zero_temperature_norm_grows_as_shift_shrinks(grid):
    spec = gaussian(1.0, 1.0)
    params = ThermoParams.from_temperature(0.0, 1.0)
    shifts = (1e-1, 1e-2, 1e-3, 1e-4)
    norms = [bs_norm(spec, params, e, grid=grid) for e in shifts]
    assert all(b > a for a, b in zip(norms, norms[1:]))
    for e, norm in zip(shifts, norms):
        assert norm <= bs_zero_temperature_bound(spec, 1.0, e)


def test_zero_temperature_bound_domain():
    with pytest.raises(DomainError):
        bs_zero_temperature_bound(gaussian(1.0, 1.0), 0.0, 1e-3)


def test_positive_part_norm(small_grid, two_well, warm):
    assert positive_part_norm(two_well, warm, grid=small_grid) > 0.0
    assert positive_part_norm(attractive_part(two_well), warm, grid=small_grid) == 0.0


def test_positive_part_norm_needs_shift_at_zero_temperature(small_grid, two_well, cold):
    with pytest.raises(DomainError):
        positive_part_norm(two_well, cold, e_shift=0.0, grid=small_grid)


def test_lowest_eigenvalue_is_nonincreasing_in_beta(small_grid, deep_gaussian):
    betas = (0.3, 1.0, 3.0, 10.0, 30.0)
    values = [
        lowest_eigenvalue(assemble_sector_operator(small_grid, deep_gaussian, 0, ThermoParams(beta=b, mu=1.0)))
        for b in betas
    ]
    assert all(colder <= hotter + 1e-12 for hotter, colder in zip(values, values[1:]))


def test_verdict_flips_across_tc(small_grid, deep_gaussian):
    tc = tc_bisect(deep_gaussian, 1.0, ell_max=1, rel_tol=1e-3, grid=small_grid, serial=True).temperature
    below = ThermoParams.from_temperature(0.95 * tc, 1.0)
    above = ThermoParams.from_temperature(1.05 * tc, 1.0)
    assert instability_verdict(deep_gaussian, below, ell_max=1, grid=small_grid).unstable
    assert not instability_verdict(deep_gaussian, above, ell_max=1, grid=small_grid).unstable


# -- discretization error --------------------------------------------------------


def test_lowest_eigenvalue_is_stable_under_refinement(grid, deep_gaussian, warm):
    coarse = lowest_eigenvalue(assemble_sector_operator(grid, deep_gaussian, 0, warm))
    fine = lowest_eigenvalue(assemble_sector_operator(refined(grid), deep_gaussian, 0, warm))
    assert abs(fine - coarse) < 1e-6 * (abs(fine) + 1.0)


def test_momentum_cutoff_is_large_enough(grid, deep_gaussian, warm):
    wider = build_grid(mu=1.0, p_max=1.5 * default_p_max(1.0))
    base = lowest_eigenvalue(assemble_sector_operator(grid, deep_gaussian, 0, warm))
    extended = lowest_eigenvalue(assemble_sector_operator(wider, deep_gaussian, 0, warm))
    assert abs(extended - base) < 1e-6


def test_zero_temperature_eigenvalue_settles_under_fermi_grading(deep_gaussian, cold):
    values = [
        lowest_eigenvalue(assemble_sector_operator(build_grid(mu=1.0, grading_levels=n), deep_gaussian, 0, cold))
        for n in (3, 5, 7)
    ]
    assert all(v < 0 for v in values)
    assert abs(values[2] - values[1]) <= abs(values[1] - values[0]) + 1e-12
    assert abs(values[2] - values[1]) <= 1e-3 * abs(values[2])


# -- Birman-Schwinger monotonicity ---------------------------------------------------


def test_norm_vanishes_at_high_temperature(small_grid):
    spec = gaussian(1.0, 1.0)
    norms = [bs_norm(spec, ThermoParams(beta=b, mu=1.0), grid=small_grid) for b in (1.0, 0.1, 0.01)]
    assert norms[0] > norms[1] > norms[2] > 0.0
    # K >= 2 / beta puts the norm near beta ||V-||_inf / 2 or below
    assert norms[2] < 0.01


def test_norm_is_strictly_decreasing_in_the_shift(small_grid, deep_gaussian, warm):
    norms = [bs_norm(deep_gaussian, warm, e, grid=small_grid) for e in (0.0, 0.05, 0.2, 1.0, 5.0)]
    assert all(b < a for a, b in zip(norms, norms[1:]))
