"""Radial pair potentials: catalog, Fourier transforms, norms and sector kernels.

Conventions: V-hat(p) = (2pi)^{-3/2} int V(x) e^{-ipx} dx, and the sector kernel
W_l(p, q) represents multiplication by V on the angular-momentum-l subspace in
momentum space, so that for radial h

    (V-hat * h)(p) = int_0^inf W_0(p, q) h(q) q^2 dq.
"""

from __future__ import annotations

import dataclasses
import functools
import logging
import math
import re
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import interpolate, optimize, special
from scipy.stats import qmc

from bcslab.errors import DomainError, KernelError, PotentialError
from bcslab.models import PotentialNorms, PotentialSpec

logger = logging.getLogger(__name__)

MODELS = ("gaussian", "square_well", "two_gaussian", "tabulated")
PARTS = ("full", "positive", "negative", "sqrt_positive", "sqrt_negative")
REQUIRED_PARAMS = {
    "gaussian": ("depth", "width"),
    "square_well": ("depth", "radius"),
    "two_gaussian": ("depth", "width", "depth2", "width2"),
    "tabulated": (),
}
_LENGTH_PARAMS = {"width", "radius", "width2"}

FOURIER_PREFACTOR = (2.0 * math.pi) ** -1.5
# Route B: W_l(p, q) = (2/pi) int r^2 V(r) j_l(pr) j_l(qr) dr
BESSEL_PREFACTOR = 2.0 / math.pi

GL_ORDER = 16
PANEL_WIDTH = 0.05
GAUSS_EXTENT = 12.0
SIGN_CHANGE_GRADING = 10
U_NODES = 64
U_NODES_MAX = 1024
U_TOL = 1e-10
NORM_TOL = 1e-9
TRANSFORM_TABLE_POINTS = 2049
_CHUNK_ELEMENTS = 4_000_000

Term = tuple[str, float, float]


# -- construction -----------------------------------------------------------


def make_potential(
    model: str,
    params: Mapping[str, float] | None = None,
    lambda_scale: float = 1.0,
    samples: tuple[Sequence[float], Sequence[float]] | None = None,
) -> PotentialSpec:
    if model not in MODELS:
        raise PotentialError(f"unknown potential model {model!r}", accepted=list(MODELS))
    params = dict(params or {})
    missing = [name for name in REQUIRED_PARAMS[model] if name not in params]
    if missing:
        raise PotentialError(f"{model} potential needs {', '.join(missing)}", model=model, missing=missing)
    extra = sorted(set(params) - set(REQUIRED_PARAMS[model]))
    if extra:
        raise PotentialError(f"{model} potential does not take {', '.join(extra)}", model=model, extra=extra)
    for name, value in params.items():
        if not math.isfinite(value):
            raise PotentialError(f"potential parameter {name} must be finite", name=name, value=value)
        if name in _LENGTH_PARAMS and value <= 0:
            raise PotentialError(f"potential parameter {name} must be > 0", name=name, value=value)
    if not math.isfinite(lambda_scale):
        raise PotentialError("lambda_scale must be finite", lambda_scale=lambda_scale)

    frozen_samples = None
    if model == "tabulated":
        if samples is None:
            raise PotentialError("tabulated potential needs samples")
        r, v = (np.asarray(s, dtype=float) for s in samples)
        _validate_samples(r, v)
        frozen_samples = (tuple(r.tolist()), tuple(v.tolist()))
    return PotentialSpec(
        model=model,
        params=tuple((name, float(params[name])) for name in REQUIRED_PARAMS[model]),
        lambda_scale=float(lambda_scale),
        samples=frozen_samples,
    )


def _validate_samples(r: np.ndarray, v: np.ndarray) -> None:
    if r.ndim != 1 or r.shape != v.shape or r.size < 2:
        raise PotentialError("table needs at least two (r, V) rows")
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
        raise PotentialError("table values must be finite")
    if r[0] < 0:
        raise PotentialError("table radii must be >= 0", r=float(r[0]))
    bad = np.flatnonzero(np.diff(r) <= 0)
    if bad.size:
        raise PotentialError("table radii must be strictly increasing", row=int(bad[0]) + 2, r=float(r[bad[0] + 1]))


def gaussian(depth: float, width: float, lambda_scale: float = 1.0) -> PotentialSpec:
    """V(r) = -depth * exp(-r^2 / (2 width^2))."""
    return make_potential("gaussian", {"depth": depth, "width": width}, lambda_scale)


def square_well(depth: float, radius: float, lambda_scale: float = 1.0) -> PotentialSpec:
    """V(r) = -depth for r < radius, 0 beyond."""
    return make_potential("square_well", {"depth": depth, "radius": radius}, lambda_scale)


def two_gaussian(depth: float, width: float, depth2: float, width2: float, lambda_scale: float = 1.0) -> PotentialSpec:
    """Sum of two gaussian wells with signed depths; a negative depth2 adds a repulsive tail."""
    return make_potential(
        "two_gaussian", {"depth": depth, "width": width, "depth2": depth2, "width2": width2}, lambda_scale
    )


def tabulated(r: Sequence[float], v: Sequence[float], lambda_scale: float = 1.0) -> PotentialSpec:
    return make_potential("tabulated", lambda_scale=lambda_scale, samples=(r, v))


def load_table(path: str | Path, lambda_scale: float = 1.0) -> PotentialSpec:
    """Read a two-column (r, V) table; '#' comments and one header line are allowed."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise PotentialError(f"cannot read potential table: {exc}", path=str(path)) from exc

    radii: list[float] = []
    values: list[float] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = [f for f in re.split(r"[,\s]+", line) if f]
        try:
            numbers = [float(f) for f in fields]
        except ValueError:
            if not radii:
                continue  # header
            raise PotentialError(f"non-numeric value on line {lineno}", path=str(path), line=lineno) from None
        if len(numbers) != 2:
            raise PotentialError(f"expected two columns on line {lineno}", path=str(path), line=lineno)
        if radii and numbers[0] <= radii[-1]:
            raise PotentialError(
                f"radius on line {lineno} is not strictly increasing", path=str(path), line=lineno, r=numbers[0]
            )
        radii.append(numbers[0])
        values.append(numbers[1])
    try:
        return tabulated(radii, values, lambda_scale)
    except PotentialError as exc:
        raise PotentialError(exc.message, path=str(path), **exc.context) from exc


def with_part(spec: PotentialSpec, part: str) -> PotentialSpec:
    """PotentialSpec of V+, V-, sqrt(V+) or sqrt(V-) of a full potential."""
    if part not in PARTS:
        raise DomainError(f"unknown potential part {part!r}", accepted=list(PARTS))
    if spec.part != "full" and part != spec.part:
        raise DomainError("parts can only be taken of the full potential", part=spec.part)
    return dataclasses.replace(spec, part=part)


def scaled(spec: PotentialSpec, lambda_scale: float) -> PotentialSpec:
    return dataclasses.replace(spec, lambda_scale=float(lambda_scale))


def attractive_part(spec: PotentialSpec) -> PotentialSpec:
    """The potential -V- = min(V, 0)."""
    return dataclasses.replace(spec, part="full", attractive_only=True)


# -- closed-form terms --------------------------------------------------------


def _model_terms(spec: PotentialSpec) -> list[Term] | None:
    s = spec.lambda_scale
    if spec.model == "gaussian":
        terms = [("gauss", -s * spec.param("depth"), spec.param("width"))]
    elif spec.model == "square_well":
        terms = [("well", -s * spec.param("depth"), spec.param("radius"))]
    elif spec.model == "two_gaussian":
        terms = [
            ("gauss", -s * spec.param("depth"), spec.param("width")),
            ("gauss", -s * spec.param("depth2"), spec.param("width2")),
        ]
    else:
        return None
    return [term for term in terms if term[1] != 0.0]


def _base_terms(spec: PotentialSpec) -> list[Term] | None:
    terms = _model_terms(spec)
    if terms is None or not spec.attractive_only:
        return terms
    signs = {math.copysign(1.0, a) for _, a, _ in terms}
    if signs == {1.0}:
        return []
    return terms if signs <= {-1.0} else None


def closed_terms(spec: PotentialSpec) -> list[Term] | None:
    """Represent the selected part as a sum of gaussian/well terms, or None.

    Mixed-sign sums have parts that are not such sums; the square root of
    a single term is again a single term.
    """
    base = _base_terms(spec)
    if base is None or spec.part == "full":
        return base
    signs = {math.copysign(1.0, a) for _, a, _ in base}
    if len(signs) > 1:
        return None
    want = 1.0 if spec.part.endswith("positive") else -1.0
    selected = [(kind, abs(a), w) for kind, a, w in base if math.copysign(1.0, a) == want]
    if not spec.part.startswith("sqrt") or not selected:
        return selected
    if len(selected) > 1:
        return None
    kind, a, w = selected[0]
    return [(kind, math.sqrt(a), math.sqrt(2.0) * w if kind == "gauss" else w)]


def _term_values(terms: list[Term], r: np.ndarray) -> np.ndarray:
    out = np.zeros_like(r)
    for kind, a, w in terms:
        if kind == "gauss":
            out += a * np.exp(-0.5 * (r / w) ** 2)
        else:
            out += np.where(r < w, a, 0.0)
    return out


def _j1_over_x(x: np.ndarray) -> np.ndarray:
    small = np.abs(x) < 1e-2
    x_safe = np.where(small, 1.0, x)
    x2 = x * x
    series = 1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0 - x2**3 / 45360.0
    return np.where(small, series, special.spherical_jn(1, x_safe) / x_safe)


def _term_transform(terms: list[Term], k: np.ndarray) -> np.ndarray:
    out = np.zeros_like(k)
    for kind, a, w in terms:
        if kind == "gauss":
            out += a * w**3 * np.exp(-0.5 * (w * k) ** 2)
        else:
            out += a * FOURIER_PREFACTOR * 4.0 * math.pi * w**3 * _j1_over_x(k * w)
    return out


# -- position space -----------------------------------------------------------


@functools.lru_cache(maxsize=32)
def _table_interpolant(samples: tuple[tuple[float, ...], tuple[float, ...]]) -> interpolate.PchipInterpolator:
    r, v = (np.asarray(s) for s in samples)
    return interpolate.PchipInterpolator(r, v, extrapolate=False)


def _full_values(spec: PotentialSpec, r: np.ndarray) -> np.ndarray:
    terms = _model_terms(spec)
    if terms is not None:
        values = _term_values(terms, r)
        return np.minimum(values, 0.0) if spec.attractive_only else values
    r_tab, v_tab = spec.samples
    inside = np.nan_to_num(_table_interpolant(spec.samples)(r), nan=0.0)
    # flat below the first sample, zero beyond the last
    values = spec.lambda_scale * np.where(r < r_tab[0], v_tab[0], np.where(r > r_tab[-1], 0.0, inside))
    return np.minimum(values, 0.0) if spec.attractive_only else values


def evaluate_position(spec: PotentialSpec, r) -> float | np.ndarray:
    """V(r) (or the selected part of it)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("evaluate_position requires r >= 0")
    full = _full_values(spec, np.atleast_1d(r))
    if spec.part == "full":
        out = full
    else:
        out = np.maximum(-full if spec.part.endswith("negative") else full, 0.0)
        if spec.part.startswith("sqrt"):
            out = np.sqrt(out)
    return float(out[0]) if r.ndim == 0 else out


# -- radial quadrature ---------------------------------------------------------


def _support(spec: PotentialSpec) -> tuple[float, list[float]]:
    """Outer radius of the support and the fixed panel breaks inside it."""
    if spec.model == "tabulated":
        r_tab = spec.samples[0]
        breaks = list(r_tab) if len(r_tab) <= 2000 else [r_tab[0]]
        return r_tab[-1], breaks
    if spec.model == "square_well":
        return spec.param("radius"), []
    widths = [spec.param(name) for name in ("width", "width2") if name in dict(spec.params)]
    return GAUSS_EXTENT * max(widths), []


@functools.lru_cache(maxsize=64)
def sign_changes(spec: PotentialSpec) -> tuple[float, ...]:
    """Radii where the full V changes sign."""
    full = dataclasses.replace(spec, part="full", attractive_only=False)
    r_max, _ = _support(spec)
    r = np.linspace(0.0, r_max, 4001)
    v = _full_values(full, r)
    roots = []
    for i in np.flatnonzero(v[:-1] * v[1:] < 0):
        roots.append(optimize.brentq(lambda x: float(_full_values(full, np.array([x]))[0]), r[i], r[i + 1], xtol=1e-14))
    return tuple(roots)


@functools.lru_cache(maxsize=64)
def radial_rule(spec: PotentialSpec, p_hi: float = 0.0, refine: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights in r over the support of V.

    Panels are at most PANEL_WIDTH wide (narrower when oscillating Bessel
    factors up to momentum p_hi enter the integrand) and break at sign
    changes of V, with dyadic grading toward each of them.
    """
    r_max, breaks = _support(spec)
    h = PANEL_WIDTH if p_hi <= 0 else min(PANEL_WIDTH, 0.5 / p_hi)
    h /= refine
    edges = {0.0, r_max, *breaks}
    for root in sign_changes(spec):
        edges.add(root)
        for level in range(1, SIGN_CHANGE_GRADING + 1):
            offset = PANEL_WIDTH * 2.0**-level
            edges.update(e for e in (root - offset, root + offset) if 0.0 < e < r_max)
    edges = np.array(sorted(e for e in edges if 0.0 <= e <= r_max))

    counts = np.maximum(1, np.ceil(np.diff(edges) / h).astype(int))
    panel_edges = np.concatenate(
        [np.linspace(lo, hi, n + 1)[:-1] for lo, hi, n in zip(edges[:-1], edges[1:], counts)] + [edges[-1:]]
    )
    x, wx = special.roots_legendre(GL_ORDER)
    mid = 0.5 * (panel_edges[1:] + panel_edges[:-1])
    half = 0.5 * np.diff(panel_edges)
    nodes = (mid[:, None] + half[:, None] * x).ravel()
    weights = (half[:, None] * wx).ravel()
    return nodes, weights


# -- momentum space ------------------------------------------------------------


def fourier_radial(spec: PotentialSpec, p) -> float | np.ndarray:
    """V-hat(p) under the (2pi)^{-3/2} convention."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise DomainError("fourier_radial requires p >= 0")
    flat = np.atleast_1d(p).ravel()
    terms = closed_terms(spec)
    if terms is not None:
        out = _term_transform(terms, flat)
    else:
        r, w = radial_rule(spec, float(flat.max(initial=0.0)))
        weight = FOURIER_PREFACTOR * 4.0 * math.pi * w * r**2 * evaluate_position(spec, r)
        out = np.empty_like(flat)
        chunk = max(1, _CHUNK_ELEMENTS // r.size)
        for start in range(0, flat.size, chunk):
            out[start : start + chunk] = special.spherical_jn(0, np.outer(flat[start : start + chunk], r)) @ weight
    return float(out[0]) if p.ndim == 0 else out.reshape(p.shape)


def transform_evaluator(spec: PotentialSpec, k_hi: float) -> Callable[[np.ndarray], np.ndarray]:
    """A fast k -> V-hat(k) on [0, k_hi]: closed form, or a spline of the quadrature."""
    terms = closed_terms(spec)
    if terms is not None:
        return lambda k: _term_transform(terms, k)
    k_hi = max(k_hi, 1e-8)
    ks = np.linspace(0.0, k_hi, TRANSFORM_TABLE_POINTS)
    spline = interpolate.CubicSpline(ks, fourier_radial(spec, ks))
    return lambda k: spline(np.minimum(k, k_hi))


def monte_carlo_convolution(spec: PotentialSpec, p: float, width: float, samples: int = 2**16, seed: int = 0) -> float:
    """(2pi)^{-3/2} int V-hat(p - q) exp(-q^2 / (2 width^2)) d^3q by quasi-Monte Carlo.

    q is drawn from the normal density proportional to the gaussian test
    function, which leaves width^3 * mean(V-hat(p - q)).
    """
    sampler = qmc.MultivariateNormalQMC(mean=np.zeros(3), cov=width**2 * np.eye(3), seed=seed)
    q = sampler.random(samples)
    k = np.linalg.norm(np.array([0.0, 0.0, p]) - q, axis=1)
    values = transform_evaluator(spec, float(k.max()))(k)
    return float(width**3 * np.mean(values))


# -- norms ---------------------------------------------------------------------


def _radial_integral(spec: PotentialSpec, fn: Callable[[np.ndarray], np.ndarray]) -> float:
    estimates = []
    for refine in (1, 2):
        r, w = radial_rule(spec, refine=refine)
        estimates.append(4.0 * math.pi * float(np.sum(w * r**2 * fn(evaluate_position(spec, r)))))
    coarse, fine = estimates
    if abs(fine - coarse) > NORM_TOL * max(abs(fine), 1e-300):
        raise PotentialError("radial quadrature of the potential does not converge", coarse=coarse, fine=fine)
    return fine


def _sup(spec: PotentialSpec) -> float:
    terms = closed_terms(spec)
    if terms is not None:
        # same-sign gaussian/well terms all peak at r = 0
        return float(sum(abs(a) for _, a, _ in terms))
    r, _ = radial_rule(spec, refine=2)
    values = evaluate_position(spec, r)
    i = int(np.argmax(values))
    best = float(values[i])
    lo, hi = r[max(i - 1, 0)], r[min(i + 1, r.size - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda x: -evaluate_position(spec, x), bounds=(lo, hi), method="bounded")
        best = max(best, -float(res.fun))
    return best


@functools.lru_cache(maxsize=64)
def decompose_and_norms(spec: PotentialSpec) -> PotentialNorms:
    """V = V+ - V- with L^1, L^{3/2} and L^inf norms of both parts."""
    negative = with_part(spec, "negative")
    positive = with_part(spec, "positive")
    norms = {}
    for label, part in (("negative", negative), ("positive", positive)):
        norms[f"l1_{label}"] = _radial_integral(part, lambda v: v)
        norms[f"l32_{label}"] = _radial_integral(part, lambda v: v**1.5) ** (2.0 / 3.0)
        norms[f"linf_{label}"] = _sup(part)
    logger.debug("norms of %s: %s", spec.model, norms)
    return PotentialNorms(positive=positive, negative=negative, **norms)


# -- sector kernels ------------------------------------------------------------


def _legendre_average(
    transform: Callable[[np.ndarray], np.ndarray], ell: int, p: np.ndarray, q: np.ndarray, n_u: int
) -> np.ndarray:
    u, wu = special.roots_legendre(n_u)
    projector = special.eval_legendre(ell, u) * wu
    out = np.empty((p.size, q.size))
    chunk = max(1, _CHUNK_ELEMENTS // (q.size * n_u))
    qq = q[None, :, None]
    for start in range(0, p.size, chunk):
        pp = p[start : start + chunk, None, None]
        k2 = pp**2 + qq**2 - 2.0 * (pp * qq) * u
        out[start : start + chunk] = transform(np.sqrt(np.maximum(k2, 0.0))) @ projector
    return out / math.sqrt(2.0 * math.pi)


def _route_a(spec: PotentialSpec, ell: int, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    transform = transform_evaluator(spec, float(p.max(initial=0.0) + q.max(initial=0.0)))
    n_u = U_NODES
    previous = _legendre_average(transform, ell, p, q, n_u)
    change = math.inf
    while n_u < U_NODES_MAX:
        n_u *= 2
        current = _legendre_average(transform, ell, p, q, n_u)
        change = float(np.max(np.abs(current - previous), initial=0.0))
        if change <= U_TOL * max(float(np.max(np.abs(current), initial=0.0)), 1e-300):
            logger.debug("sector kernel l=%d converged with %d angular nodes", ell, n_u)
            return current
        previous = current
    raise KernelError("angular quadrature of the sector kernel did not converge", ell=ell, n_u=n_u, change=change)


def _route_b(spec: PotentialSpec, ell: int, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    r, w = radial_rule(spec, float(max(p.max(initial=0.0), q.max(initial=0.0))))
    v = evaluate_position(spec, r)
    keep = v != 0.0
    r, weight = r[keep], BESSEL_PREFACTOR * w[keep] * r[keep] ** 2 * v[keep]
    jp = special.spherical_jn(ell, np.outer(p, r))
    jq = jp if q is p else special.spherical_jn(ell, np.outer(q, r))
    return (jp * weight) @ jq.T


@dataclass(frozen=True)
class SectorKernel:
    """W_l(p, q) of one potential (part) and one angular momentum."""

    spec: PotentialSpec
    ell: int
    route: str = "A"

    def matrix(self, p, q=None) -> np.ndarray:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        q = p if q is None else np.atleast_1d(np.asarray(q, dtype=float))
        if closed_terms(self.spec) == []:
            return np.zeros((p.size, q.size))
        builder = _route_a if self.route == "A" else _route_b
        return builder(self.spec, self.ell, p, q)

    def __call__(self, p: float, q: float) -> float:
        return float(self.matrix([p], [q])[0, 0])


def sector_kernel(spec: PotentialSpec, ell: int, route: str = "auto", ell_max: int | None = None) -> SectorKernel:
    """Kernel of V in sector ell; route "A" averages V-hat against P_l, "B" uses Bessel transforms."""
    if ell < 0 or (ell_max is not None and ell > ell_max):
        raise DomainError("ell outside the configured range", ell=ell, ell_max=ell_max)
    if route == "auto":
        route = "A" if closed_terms(spec) is not None else "B"
        if route == "B":
            logger.debug("no closed-form transform for %s (%s part), using the Bessel route", spec.model, spec.part)
    if route not in ("A", "B"):
        raise DomainError(f"unknown kernel route {route!r}", accepted=["A", "B", "auto"])
    return SectorKernel(spec=spec, ell=ell, route=route)
