"""Gap equation, BCS free energy and the diagnostics of a solution.

All momentum sums run over the radial grid with measure p^2 w; the factor 4pi
turns them into three-dimensional integrals of radial functions.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy import special

from bcslab.discretize import assemble_sector_operator, build_grid, sector_potential_matrix
from bcslab.errors import DomainError, NonConvergenceError
from bcslab.linear_criterion import lowest_eigenpair
from bcslab.models import GapState, PotentialSpec, RadialGrid, StationarityResiduals, ThermoParams
from bcslab.symbols import dispersion, gamma0, thermal_symbol

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi
SEED_FRACTION = 0.1
TRIVIAL_THRESHOLD = 1e-12
MAX_HALVINGS = 4
ADMISSIBILITY_SLACK = 1e-10
RESIDUAL_MASK = 1e-6
SEED_MODES = ("constant", "linear-mode")


def _energy_scale(params: ThermoParams) -> float:
    return abs(params.mu) or 1.0


def _pair_factor(energy: np.ndarray, params: ThermoParams) -> np.ndarray:
    """tanh(beta E / 2) / E, continued to beta/2 (T > 0) or 0 (T = 0) at E = 0."""
    zero = energy == 0.0
    safe = np.where(zero, 1.0, energy)
    if params.is_zero_temperature:
        return np.where(zero, 0.0, 1.0 / safe)
    return np.where(zero, 0.5 * params.beta, np.tanh(0.5 * params.beta * safe) / safe)


def gap_map(delta: np.ndarray, grid: RadialGrid, kernel: np.ndarray, params: ThermoParams) -> np.ndarray:
    """G(delta)_i = -sum_j W_0(p_i, p_j) delta_j tanh(beta E_j / 2) / E_j p_j^2 w_j."""
    energy = np.asarray(dispersion(grid.p2, delta, params.mu))
    return -kernel @ (delta * _pair_factor(energy, params) * grid.measure)


def _seed(seed_mode: str, grid: RadialGrid, spec: PotentialSpec, params: ThermoParams) -> np.ndarray:
    amplitude = SEED_FRACTION * _energy_scale(params)
    if seed_mode == "constant":
        return np.full(grid.size, amplitude)
    if seed_mode == "linear-mode":
        _, mode = lowest_eigenpair(assemble_sector_operator(grid, spec, 0, params))
        return amplitude * mode / np.max(np.abs(mode))
    raise DomainError(f"unknown seed mode {seed_mode!r}", accepted=list(SEED_MODES))


def solve_gap(
    spec: PotentialSpec,
    params: ThermoParams,
    grid: RadialGrid | None = None,
    seed_mode: str = "constant",
    damping: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 20000,
) -> GapState:
    """Damped fixed-point iteration for the s-wave gap equation.

    The damping is halved (at most four times) whenever the residual grows.
    """
    if not 0 < damping <= 1:
        raise DomainError("damping must lie in (0, 1]", damping=damping)
    grid = grid or build_grid(mu=params.mu)
    kernel = sector_potential_matrix(grid, spec, 0)
    delta = _seed(seed_mode, grid, spec, params)
    scale = _energy_scale(params)
    theta, halvings = damping, 0
    history: list[float] = []
    previous = math.inf

    for iteration in range(1, max_iter + 1):
        image = gap_map(delta, grid, kernel, params)
        size = float(np.max(np.abs(delta)))
        residual = float(np.max(np.abs(delta - image)))
        history.append(residual / (size + scale))
        if size < TRIVIAL_THRESHOLD * scale:
            logger.info("gap iteration collapsed to the trivial solution after %d steps", iteration)
            return build_state(np.zeros(grid.size), grid, spec, params, 0.0, iteration, seed_mode, history)
        # relative to |delta| so a run still decaying towards zero keeps going
        if residual <= tol * size:
            logger.info("gap iteration converged after %d steps, sup delta = %.6g", iteration, size)
            return build_state(delta, grid, spec, params, history[-1], iteration, seed_mode, history)
        if residual > previous and halvings < MAX_HALVINGS:
            theta *= 0.5
            halvings += 1
            logger.info("residual increased; damping halved to %g", theta)
        previous = residual
        delta = (1.0 - theta) * delta + theta * image
        if iteration % 1000 == 0:
            logger.debug("gap iteration %d: residual %.3e", iteration, history[-1])

    raise NonConvergenceError(
        "gap iteration did not converge",
        iterations=max_iter,
        tol=tol,
        residual=history[-1],
        residual_history=history[-100:],
    )


def reconstruct_state(delta: np.ndarray, p2: np.ndarray, params: ThermoParams) -> tuple[np.ndarray, np.ndarray]:
    """(gamma, alpha_hat) of the quasi-free state generated by the gap function."""
    delta = np.asarray(delta, dtype=float)
    x = np.asarray(p2, dtype=float) - params.mu
    energy = np.asarray(dispersion(p2, delta, params.mu))
    # epsilon = 1 / (e^{beta E} + 1), so tanh(beta E / 2) = 1 - 2 epsilon
    eps = np.zeros_like(energy) if params.is_zero_temperature else special.expit(-params.beta * energy)
    zero = energy == 0.0
    safe = np.where(zero, 1.0, energy)
    ratio = np.where(zero, 0.0, x / safe)
    above = 0.5 * (delta**2 / (safe * (safe + np.abs(x))) + 2.0 * ratio * eps)
    below = 0.5 * (1.0 - ratio * (1.0 - 2.0 * eps))
    gamma = np.where(zero, 0.5, np.where(x > 0, above, below))
    alpha_hat = 0.5 * delta * _pair_factor(energy, params)
    return gamma, alpha_hat


def _check_admissible(gamma: np.ndarray, alpha_hat: np.ndarray) -> None:
    if np.any(gamma < -ADMISSIBILITY_SLACK) or np.any(gamma > 1 + ADMISSIBILITY_SLACK):
        raise DomainError("occupation outside [0, 1]", worst=float(np.max(np.abs(gamma - 0.5))) + 0.5)
    excess = alpha_hat**2 - gamma * (1.0 - gamma)
    if np.any(excess > ADMISSIBILITY_SLACK):
        raise DomainError("|alpha|^2 exceeds gamma (1 - gamma)", excess=float(np.max(excess)))


def entropy(gamma: np.ndarray, alpha_hat: np.ndarray, grid: RadialGrid) -> float:
    """S = -4pi sum [s ln s + (1 - s) ln(1 - s)] p^2 w with s (1 - s) = gamma (1 - gamma) - alpha^2."""
    q = np.maximum(gamma * (1.0 - gamma) - alpha_hat**2, 0.0)
    root = np.sqrt(np.maximum(0.25 - q, 0.0))
    large = 0.5 + root
    small = q / large
    summand = special.xlogy(small, small) + large * np.log1p(-small)
    return -FOUR_PI * float(np.sum(grid.measure * summand))


def interaction_energy(alpha_hat: np.ndarray, grid: RadialGrid, spec: PotentialSpec) -> float:
    """int V |alpha|^2 dx for radial alpha_hat."""
    weighted = alpha_hat * grid.measure
    return FOUR_PI * float(weighted @ sector_potential_matrix(grid, spec, 0) @ weighted)


def free_energy(
    gamma: np.ndarray, alpha_hat: np.ndarray, grid: RadialGrid, spec: PotentialSpec, params: ThermoParams
) -> float:
    """BCS free energy of (gamma, alpha_hat)."""
    gamma = np.asarray(gamma, dtype=float)
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    _check_admissible(gamma, alpha_hat)
    kinetic = FOUR_PI * float(np.sum(grid.measure * (grid.p2 - params.mu) * gamma))
    value = kinetic + interaction_energy(alpha_hat, grid, spec)
    if not params.is_zero_temperature:
        value -= params.temperature * entropy(gamma, alpha_hat, grid)
    return value


def normal_free_energy(grid: RadialGrid, spec: PotentialSpec, params: ThermoParams) -> float:
    g0 = np.asarray(gamma0(grid.p2, params))
    return free_energy(g0, np.zeros_like(g0), grid, spec, params)


def _dispersion_infimum(grid: RadialGrid, energy: np.ndarray, mu: float, trivial: bool) -> float:
    if trivial:
        return 0.0 if mu > 0 else abs(mu)
    i = int(np.argmin(energy))
    best = float(energy[i])
    if i == energy.size - 1:
        return best
    if i == 0:
        # E is even in p, so fit in p^2 and read off the value at p = 0
        coeffs = np.polyfit(grid.p2[:3], energy[:3], 2)
        candidate = float(np.polyval(coeffs, 0.0))
    else:
        p = grid.nodes[i - 1 : i + 2]
        a, b, c = np.polyfit(p, energy[i - 1 : i + 2], 2)
        vertex = -b / (2.0 * a) if a > 0 else math.nan
        candidate = float(np.polyval((a, b, c), vertex)) if p[0] <= vertex <= p[2] else best
    return max(min(best, candidate), 0.0) if math.isfinite(candidate) else best


def energy_gap(state: GapState) -> float:
    """Xi = inf_p E(p), refined by a local quadratic fit around the minimizing node."""
    return _dispersion_infimum(state.grid, state.energy, state.params.mu, state.converged_to_trivial)


def build_state(
    delta: np.ndarray,
    grid: RadialGrid,
    spec: PotentialSpec,
    params: ThermoParams,
    residual_sup: float = 0.0,
    iterations: int = 0,
    seed_mode: str = "constant",
    history: list[float] | None = None,
) -> GapState:
    delta = np.asarray(delta, dtype=float)
    trivial = not np.any(delta)
    energy = np.asarray(dispersion(grid.p2, delta, params.mu))
    gamma, alpha_hat = reconstruct_state(delta, grid.p2, params)
    return GapState(
        grid=grid,
        params=params,
        delta=delta,
        energy=energy,
        gamma=gamma,
        alpha_hat=alpha_hat,
        xi=_dispersion_infimum(grid, energy, params.mu, trivial),
        f_value=free_energy(gamma, alpha_hat, grid, spec, params),
        f_normal=normal_free_energy(grid, spec, params),
        density=FOUR_PI * float(np.sum(grid.measure * gamma)),
        residual_sup=residual_sup,
        iterations=iterations,
        converged_to_trivial=trivial,
        seed_mode=seed_mode,
        residual_history=tuple(history or ()),
    )


def stationarity_residuals(state: GapState, spec: PotentialSpec) -> StationarityResiduals:
    """Defects of the two Euler-Lagrange equations of the free energy, relative to |mu|.

    Nodes with |2 gamma - 1| <= 1e-6 are skipped, where both equations
    degenerate.
    """
    grid, params = state.grid, state.params
    x = grid.p2 - params.mu
    d = 2.0 * state.gamma - 1.0
    mask = np.abs(d) > RESIDUAL_MASK
    if not np.any(mask):
        return StationarityResiduals(r_alpha=0.0, r_gamma=0.0)
    convolution = sector_potential_matrix(grid, spec, 0) @ (state.alpha_hat * grid.measure)
    scale = _energy_scale(params)
    alpha_defect = convolution[mask] - x[mask] * state.alpha_hat[mask] / d[mask]
    gamma_defect = x[mask] / d[mask] + np.asarray(thermal_symbol(state.energy[mask], params.beta))
    return StationarityResiduals(
        r_alpha=float(np.max(np.abs(alpha_defect))) / scale,
        r_gamma=float(np.max(np.abs(gamma_defect))) / scale,
    )


def optimal_gamma_zero_temperature(alpha_hat, p2, mu: float) -> np.ndarray:
    """Zero-temperature minimizing occupation for fixed |alpha_hat|."""
    a2 = np.asarray(alpha_hat, dtype=float) ** 2
    if np.any(a2 > 0.25):
        raise DomainError("|alpha_hat| must be <= 1/2")
    x = np.asarray(p2, dtype=float) - mu
    root = np.sqrt(1.0 - 4.0 * a2)
    lower = 2.0 * a2 / (1.0 + root)  # (1 - root) / 2
    return np.where(x < 0, 1.0 - lower, np.where(x > 0, lower, 0.5))


def zero_temperature_energy_difference(
    alpha_hat: np.ndarray, grid: RadialGrid, spec: PotentialSpec, mu: float
) -> float:
    """F(gamma_opt, alpha) - F(normal) at T = 0."""
    a2 = np.asarray(alpha_hat, dtype=float) ** 2
    if np.any(a2 > 0.25):
        raise DomainError("|alpha_hat| must be <= 1/2")
    lowered = 4.0 * a2 / (1.0 + np.sqrt(1.0 - 4.0 * a2))  # 1 - sqrt(1 - 4 alpha^2)
    kinetic = 0.5 * FOUR_PI * float(np.sum(grid.measure * np.abs(grid.p2 - mu) * lowered))
    return kinetic + interaction_energy(np.asarray(alpha_hat, dtype=float), grid, spec)


def second_variation(
    delta_hat: np.ndarray, grid: RadialGrid, spec: PotentialSpec, params: ThermoParams, step: float = 1e-3
) -> float:
    """1/2 d^2/dt^2 F(gamma0, t delta_hat) at t = 0, by central differences."""
    g0 = np.asarray(gamma0(grid.p2, params))
    delta_hat = np.asarray(delta_hat, dtype=float)
    values = [free_energy(g0, t * delta_hat, grid, spec, params) for t in (-step, 0.0, step)]
    return (values[0] - 2.0 * values[1] + values[2]) / (2.0 * step**2)
