"""Scalar symbols of the BCS problem.

All functions accept floats or numpy arrays and return the same kind. Units
are hbar = 2m = 1, so momenta squared are energies.
"""

from __future__ import annotations

import functools
import logging
import math

import numpy as np
from scipy import integrate, optimize, special

from bcslab.errors import DomainError, NumericalError, RangeError
from bcslab.models import ThermoParams

logger = logging.getLogger(__name__)

SERIES_THRESHOLD = 1e-4
F_TAIL_START = 100.0
F_BRACKET = (1e-12, 1e6)
_QUAD = {"epsabs": 1e-13, "epsrel": 1e-12, "limit": 400}


def _output(value: np.ndarray) -> float | np.ndarray:
    return float(value) if np.ndim(value) == 0 else value


def thermal_symbol(x, beta: float) -> float | np.ndarray:
    """x * coth(beta * x / 2), with |x| at beta = inf."""
    x = np.asarray(x, dtype=float)
    if math.isinf(beta):
        return _output(np.abs(x))
    t = beta * x
    small = np.abs(t) < SERIES_THRESHOLD
    t_safe = np.where(small, 1.0, t)
    regular = x / np.tanh(t_safe / 2.0)
    t2 = t * t
    # t coth(t/2) = 2 + t^2/6 - t^4/360 + t^6/15120 - ...
    series = (2.0 + t2 / 6.0 - t2 * t2 / 360.0 + t2**3 / 15120.0) / beta
    return _output(np.where(small, series, regular))


def k_symbol(p2, params: ThermoParams) -> float | np.ndarray:
    """Dispersive symbol K_{beta,mu}(p) = (p^2 - mu) coth(beta (p^2 - mu) / 2)."""
    return thermal_symbol(np.asarray(p2, dtype=float) - params.mu, params.beta)


def g_ratio(t) -> float | np.ndarray:
    """g(t) = t (e^t + 1) / ((t + 2)(e^t - 1)), with g(0) = 1."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("g_ratio requires t >= 0")
    return _output(np.asarray(thermal_symbol(t, 1.0)) / (t + 2.0))


@functools.cache
def a_constant() -> float:
    """inf_{t>0} g(t), located by golden-section search on [1e-6, 60]."""
    for end in (1e-6, 1e9):
        if abs(g_ratio(end) - 1.0) > 1e-6:
            raise NumericalError("g does not approach 1 at the bracket end", t=end, g=g_ratio(end))
    result = optimize.minimize_scalar(g_ratio, bracket=(1e-6, 2.0, 60.0), method="golden", tol=1e-10)
    logger.debug("a_constant: t*=%.12g g=%.15g", result.x, result.fun)
    return float(result.fun)


def _tail_beyond(cutoff: float, t: float) -> float:
    """Exact integral over [cutoff, inf) of p^2 [1/(p^2-1+t) - 1/(p^2+1+t)]."""
    a, b = t - 1.0, t + 1.0
    head = math.sqrt(b) * math.atan(math.sqrt(b) / cutoff)
    if a > 0:
        return head - math.sqrt(a) * math.atan(math.sqrt(a) / cutoff)
    if a < 0:
        c = math.sqrt(-a)
        return head + c * math.atanh(c / cutoff)
    return head


def f_counterterm(t: float) -> float:
    """f(t) = (1/2pi^2) int_0^inf p^2 [1/(|p^2-1|+t) - 1/(p^2+1+t)] dp.

    The Fermi-surface log singularity is split off analytically after the
    substitution s = |p^2 - 1| on either side of p = 1; the remainders are
    integrated adaptively and the region p > 100 is added in closed form.
    """
    t = float(t)
    if not t > 0 or not math.isfinite(t):
        raise DomainError("f_counterterm requires t > 0", t=t)
    s_max = F_TAIL_START**2 - 1.0

    # below: int_0^1 p^2/(1-p^2+t) dp = 1/2 int_0^1 sqrt(1-s)/(s+t) ds
    below, _ = integrate.quad(lambda s: -s / ((1.0 + math.sqrt(1.0 - s)) * (s + t)), 0.0, 1.0, **_QUAD)
    below = 0.5 * (below + math.log1p(1.0 / t))

    # above: int_1^P p^2/(p^2-1+t) dp = 1/2 int_0^S sqrt(1+s)/(s+t) ds
    def above_integrand(s: float) -> float:
        return s / ((1.0 + math.sqrt(1.0 + s)) * (s + t))

    above = sum(integrate.quad(above_integrand, lo, hi, **_QUAD)[0] for lo, hi in ((0.0, 1.0), (1.0, 100.0), (100.0, s_max)))
    above = 0.5 * (above + math.log1p(s_max / t))

    b = 1.0 + t
    reference = sum(
        integrate.quad(lambda p: p * p / (p * p + b), lo, hi, **_QUAD)[0] for lo, hi in ((0.0, 1.0), (1.0, F_TAIL_START))
    )
    total = below + above - reference + _tail_beyond(F_TAIL_START, t)
    return total / (2.0 * math.pi**2)


def f_counterterm_closed_form(t: float) -> float:
    """Elementary-function evaluation of f(t)."""
    t = float(t)
    if not t > 0:
        raise DomainError("f_counterterm requires t > 0", t=t)
    rb = math.sqrt(1.0 + t)
    # atanh(1/rb), written to survive t -> 0
    one_minus = t / ((1.0 + rb) * rb)
    atanh_inv = 0.5 * math.log((1.0 + 1.0 / rb) / one_minus)
    total = -2.0 + rb * (atanh_inv + math.pi / 2.0)
    if t < 1.0:
        c = math.sqrt(1.0 - t)
        total += c * 0.5 * math.log((1.0 + c) * (1.0 + c) / t)
    elif t > 1.0:
        ra = math.sqrt(t - 1.0)
        total -= ra * math.atan(ra)
    return total / (2.0 * math.pi**2)


def f_counterterm_inverse(y: float) -> float:
    """The unique t > 0 with f(t) = y, by bisection in ln t."""
    y = float(y)
    if not y > 0 or not math.isfinite(y):
        raise DomainError("f_counterterm_inverse requires y > 0", y=y)
    lo, hi = F_BRACKET
    f_lo, f_hi = f_counterterm(lo), f_counterterm(hi)
    while f_lo < y and lo > 1e-280:
        lo *= 1e-8
        f_lo = f_counterterm(lo)
    while f_hi > y and hi < 1e280:
        hi *= 1e8
        f_hi = f_counterterm(hi)
    if not f_hi <= y <= f_lo:
        raise RangeError("y outside the range of f on the bracket", y=y, bracket=[lo, hi], achieved=[f_lo, f_hi])
    if y == f_lo:
        return lo
    if y == f_hi:
        return hi
    u = optimize.bisect(lambda u: f_counterterm(math.exp(u)) - y, math.log(lo), math.log(hi), xtol=1e-14, maxiter=400)
    return math.exp(u)


def gamma0(p2, params: ThermoParams) -> float | np.ndarray:
    """Normal-state (Fermi-Dirac) occupation."""
    x = np.asarray(p2, dtype=float) - params.mu
    if params.is_zero_temperature:
        return _output(np.where(x < 0, 1.0, np.where(x > 0, 0.0, 0.5)))
    return _output(special.expit(-params.beta * x))


def dispersion(p2, delta, mu: float) -> float | np.ndarray:
    """Quasi-particle energy E = sqrt((p^2 - mu)^2 + |delta|^2)."""
    return _output(np.hypot(np.asarray(p2, dtype=float) - mu, np.abs(np.asarray(delta, dtype=float))))


def f_logit(x) -> float | np.ndarray:
    """(1/x) ln((1+x)/(1-x)) on [0, 1), equal to 2 at x = 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x >= 1):
        raise DomainError("f_logit requires 0 <= x < 1")
    small = x < SERIES_THRESHOLD
    x_safe = np.where(small, 0.5, x)
    x2 = x * x
    series = 2.0 * (1.0 + x2 / 3.0 + x2 * x2 / 5.0)
    return _output(np.where(small, series, 2.0 * np.arctanh(x_safe) / x_safe))
