from __future__ import annotations

import numpy as np
import pytest

import bcslab.selftest as selftest
from bcslab.errors import ConfigError, NumericalError
from bcslab.models import InvariantResult


def test_battery_is_registered():
    assert {
        "a_constant",
        "kernel_routes_agree",
        "zero_temperature_gap",
        "gap_quality",
        "criteria_equivalence",
        "tc_methods_agree",
    } <= set(selftest.CHECKS)


def test_cheap_invariants_pass():
    results = selftest.run_selftest(serial=True, names=["a_constant", "counterterm_identity", "grid_exactness"])
    assert [r.name for r in results] == ["a_constant", "counterterm_identity", "grid_exactness"]
    assert all(r.passed for r in results), [r.detail for r in results]


def test_gap_and_equivalence_invariants_pass():
    results = selftest.run_selftest(serial=True, names=["gap_quality", "criteria_equivalence"])
    assert all(r.passed for r in results), [(r.name, r.detail, r.values) for r in results]
    assert results[0].values["trivial_above_tc"] == [True, True]
    assert results[1].values["cases"] == 4


def test_gap_quality_fails_on_a_leftover_gap(monkeypatch):
    solve = selftest.gap.solve_gap

    def leftover(spec, params, grid=None, seed_mode="constant"):
        state = solve(spec, params, grid=grid, seed_mode=seed_mode)
        if not state.converged_to_trivial:
            return state
        return selftest.gap.build_state(np.full(grid.size, 1e-10), grid, spec, params)

    monkeypatch.setattr(selftest.gap, "solve_gap", leftover)
    (result,) = selftest.run_selftest(serial=True, names=["gap_quality"])
    assert not result.passed
    assert result.values["trivial_above_tc"] == [False, False]


def test_unknown_invariant():
    with pytest.raises(ConfigError):
        selftest.run_selftest(names=["nope"])


def test_raising_check_becomes_a_failure(monkeypatch):
    def broken(serial):
        raise NumericalError("quadrature blew up", panel=3)

    monkeypatch.setitem(selftest.CHECKS, "broken", broken)
    (result,) = selftest.run_selftest(names=["broken"])
    assert not result.passed
    assert result.detail == "quadrature blew up"
    assert result.values["panel"] == 3


def test_results_keep_registration_order(monkeypatch):
    monkeypatch.setattr(selftest, "CHECKS", {})
    for name in ("b", "a", "c"):
        selftest.invariant(name)(lambda serial, name=name: InvariantResult(name, True))
    assert [r.name for r in selftest.run_selftest()] == ["b", "a", "c"]


@pytest.mark.slow
def test_full_battery_passes():
    failures = [r for r in selftest.run_selftest() if not r.passed]
    assert not failures, [(r.name, r.detail) for r in failures]
