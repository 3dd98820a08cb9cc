from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest

from bcslab.errors import DomainError, RangeError
from bcslab.models import ThermoParams
from bcslab.symbols import (
    a_constant,
    dispersion,
    f_counterterm,
    f_counterterm_closed_form,
    f_counterterm_inverse,
    f_logit,
    g_ratio,
    gamma0,
    k_symbol,
    thermal_symbol,
)

mpmath.mp.dps = 50


def f_oracle(t: float) -> float:
    t = mpmath.mpf(t)
    integrand = lambda p: p**2 * (1 / (abs(p**2 - 1) + t) - 1 / (p**2 + 1 + t))  # noqa: E731
    return float(mpmath.quad(integrand, [0, 1, 2, mpmath.inf]) / (2 * mpmath.pi**2))


# -- thermal symbol ------------------------------------------------------------


def test_thermal_symbol_at_zero_is_two_over_beta():
    assert thermal_symbol(0.0, 4.0) == pytest.approx(0.5, abs=1e-15)


def test_thermal_symbol_series_branch_is_continuous():
    beta = 2.0
    x = np.array([0.9999e-4, 1.0001e-4]) / beta
    values = thermal_symbol(x, beta)
    assert values[0] == pytest.approx(values[1], rel=1e-8)


def test_thermal_symbol_matches_mpmath():
    for x, beta in [(0.3, 1.0), (-2.0, 0.5), (1e-3, 7.0), (50.0, 2.0)]:
        expected = float(mpmath.mpf(x) * mpmath.coth(mpmath.mpf(beta) * x / 2))
        assert thermal_symbol(x, beta) == pytest.approx(expected, rel=1e-13)


def test_thermal_symbol_zero_temperature_is_absolute_value():
    x = np.array([-2.0, 0.0, 3.5])
    np.testing.assert_array_equal(thermal_symbol(x, math.inf), np.abs(x))


def test_thermal_symbol_returns_float_for_scalars():
    assert isinstance(thermal_symbol(1.0, 1.0), float)
    assert isinstance(thermal_symbol([1.0, 2.0], 1.0), np.ndarray)


def test_k_symbol_is_even_around_the_fermi_surface():
    params = ThermoParams(beta=3.0, mu=1.0)
    assert k_symbol(1.5, params) == pytest.approx(k_symbol(0.5, params), rel=1e-14)


def test_k_symbol_bounded_below_by_two_temperatures():
    params = ThermoParams(beta=5.0, mu=2.0)
    p2 = np.linspace(0.0, 10.0, 1001)
    assert np.all(k_symbol(p2, params) >= 2.0 / params.beta - 1e-15)



def test_k_symbol_is_nonincreasing_in_beta():
    p2 = np.linspace(0.0, 6.0, 601)
    betas = (0.2, 1.0, 3.0, 10.0, 50.0, 400.0)
    rows = [k_symbol(p2, ThermoParams(beta=b, mu=1.5)) for b in betas]
    for hotter, colder in zip(rows, rows[1:]):
        assert np.all(colder <= hotter * (1.0 + 1e-14))

# -- a and g -------------------------------------------------------------------


def test_g_ratio_limits():
    assert g_ratio(0.0) == pytest.approx(1.0, abs=1e-15)
    assert g_ratio(500.0) == pytest.approx(1.0, rel=1e-2)


def test_g_ratio_rejects_negative_argument():
    with pytest.raises(DomainError):
        g_ratio(-0.1)


def test_a_constant_value():
    assert a_constant() == pytest.approx(0.654, abs=1e-3)


def test_a_constant_is_the_minimum_of_g():
    t = np.linspace(1e-3, 40.0, 40001)
    assert a_constant() <= float(np.min(g_ratio(t))) + 1e-12


def test_sandwich_on_random_points():
    rng = np.random.default_rng(0)
    a = a_constant()
    for _ in range(1000):
        beta = 10.0 ** rng.uniform(-1.0, 2.0)
        mu = rng.uniform(-2.0, 4.0)
        p2 = rng.uniform(0.0, 10.0)
        k = k_symbol(p2, ThermoParams(beta, mu))
        envelope = abs(p2 - mu) + 2.0 / beta
        assert a * envelope <= k + 1e-12 * envelope
        assert k <= envelope * (1 + 1e-12)


# -- counterterm f -------------------------------------------------------------


@pytest.mark.parametrize("t", [1e-6, 0.1, 0.5, 1.0, 2.0, 30.0, 1e3])
def test_f_counterterm_against_mpmath(t):
    assert f_counterterm(t) == pytest.approx(f_oracle(t), rel=1e-8)


def test_f_counterterm_reference_values():
    assert f_counterterm(1.0) == pytest.approx(0.0744, abs=1e-4)
    assert f_counterterm(0.1) == pytest.approx(0.1688, abs=1e-4)


@pytest.mark.parametrize("t", [1e-10, 1e-4, 0.3, 1.0, 1.7, 25.0, 1e4])
def test_f_closed_form_agrees_with_quadrature(t):
    assert f_counterterm_closed_form(t) == pytest.approx(f_counterterm(t), rel=1e-9)


def test_f_is_decreasing():
    ts = np.logspace(-6, 3, 40)
    values = [f_counterterm(t) for t in ts]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_f_grows_logarithmically_at_zero():
    # f(t) ~ ln(1/t) / (2 pi^2) + const
    slope = (f_counterterm(1e-8) - f_counterterm(1e-6)) / math.log(100.0)
    assert slope == pytest.approx(1.0 / (2.0 * math.pi**2), rel=1e-3)


@pytest.mark.parametrize("t", [0.0, -1.0, math.nan])
def test_f_counterterm_domain(t):
    with pytest.raises(DomainError):
        f_counterterm(t)


@pytest.mark.parametrize("t", [1e-9, 0.02, 1.0, 40.0])
def test_f_inverse_round_trips(t):
    assert f_counterterm_inverse(f_counterterm(t)) == pytest.approx(t, rel=1e-10)


def test_f_inverse_is_strictly_decreasing():
    inverses = [f_counterterm_inverse(y) for y in np.linspace(0.02, 2.0, 15)]
    assert all(b < a for a, b in zip(inverses, inverses[1:]))


def test_f_inverse_decays_exponentially():
    # ln f^{-1}(y) = const - 2 pi^2 y once f^{-1}(y) is small
    ys = np.linspace(5.0, 20.0, 7)
    logs = [math.log(f_counterterm_inverse(y)) for y in ys]
    slopes = np.diff(logs) / np.diff(ys)
    np.testing.assert_allclose(slopes, -2.0 * math.pi**2, rtol=1e-4)


def test_f_inverse_rejects_nonpositive_values():
    with pytest.raises(DomainError):
        f_counterterm_inverse(0.0)


def test_f_inverse_reports_unreachable_targets(monkeypatch):
    import bcslab.symbols as symbols

    monkeypatch.setattr(symbols, "f_counterterm", lambda t: 1.0 / (1.0 + t))
    with pytest.raises(RangeError) as info:
        symbols.f_counterterm_inverse(5.0)
    assert "achieved" in info.value.context


# -- occupations ----------------------------------------------------------------


def test_gamma0_is_fermi_dirac():
    params = ThermoParams(beta=2.0, mu=1.0)
    assert gamma0(1.0, params) == pytest.approx(0.5)
    assert gamma0(3.0, params) == pytest.approx(1.0 / (math.exp(4.0) + 1.0), rel=1e-14)


def test_gamma0_zero_temperature_is_a_step():
    params = ThermoParams.from_temperature(0.0, 1.0)
    np.testing.assert_array_equal(gamma0(np.array([0.5, 1.0, 1.5]), params), [1.0, 0.5, 0.0])


def test_dispersion_is_hypot():
    assert dispersion(2.0, 0.75, 1.0) == pytest.approx(1.25)


def test_f_logit():
    assert f_logit(0.0) == pytest.approx(2.0)
    assert f_logit(0.5) == pytest.approx(2.0 * math.log(3.0), rel=1e-14)
    with pytest.raises(DomainError):
        f_logit(1.0)
