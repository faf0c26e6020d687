# Licensed under GPL v3 (see https://www.gnu.org/licenses/).
"""
Residual checks of the two limits of the model, evaluated on analytic
candidate solutions with grid stencils.

Small λ: with μ² = σ²/8 the operator L_λ = λ∂²ₜ + H_BS differs from the
Black-Scholes Hamiltonian H_BS = -(σ²/2)∂²ₓ + σ²/8 by exactly λ∂²ₜ, so
‖L_λψ - H_BSψ‖ = λ‖ψ_tt‖.

Large λ: after the gauge factor exp(-τ/2λ) and z = x√(2λ/σ²) the equation
reads (∂²_τ + ∂²_z)g = g/(4λ²). The Poisson kernel is harmonic, so it solves
this up to a residual of order λ⁻². The z-grid is held fixed, which means the
x-domain it represents grows like √λ (see x_grid_for).
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.stats import linregress

from .closed_forms import bs_mass_term, cauchy_poisson
from .errors import ContractViolation, FloorDominatedError, ParameterDomainError, ResolutionError
from .grid import apply_laplacian, rescale

SLOPE_WINDOW = (-2.3, -1.7)
MIN_R_SQUARED = 0.99
FLOOR_FRACTION = 0.1


def gauge_factor(tau, lam):
    """exp(-τ/(2λ)), the Wick-rotated gauge factor; tends to 1 as λ grows."""
    if lam <= 0:
        raise ParameterDomainError(f"lambda must be > 0, got {lam!r}")
    return math.exp(-tau / (2.0 * lam))


def cauchy_rhs(z, tau, lam):
    """Right-hand side g/(4λ²) of the large-λ equation, for g the Poisson kernel."""
    if lam <= 0:
        raise ParameterDomainError(f"lambda must be > 0, got {lam!r}")
    return cauchy_poisson(z, tau) / (4.0 * lam ** 2)


def x_grid_for(z_grid, params):
    """The x-grid a fixed z-grid stands for at these parameters."""
    return rescale(z_grid, math.sqrt(params.sigma ** 2 / (2.0 * params.lam)))


@dataclass(frozen=True)
class SpaceTimeTestFunction:
    """ψ(x, t) = exp(-(x - center)²/(2 width²))·cos(ω t)."""
    center: float = 0.0
    width: float = 1.0
    omega: float = 1.0

    def __call__(self, x, t):
        return np.exp(-0.5 * ((x - self.center) / self.width) ** 2) * math.cos(self.omega * t)

    def second_time_derivative(self, x, t):
        return -self.omega ** 2 * self(x, t)


@dataclass(frozen=True)
class BSLimitReport:
    lam: float
    defect_norm: float
    predicted_norm: float
    relative_difference: float

    def as_dict(self):
        return {"lambda": self.lam, "defect_norm": self.defect_norm,
                "predicted_norm": self.predicted_norm,
                "relative_difference": self.relative_difference}


def _l2(grid, values):
    return math.sqrt(grid.dx * float(np.dot(grid.weights(), np.abs(values) ** 2)))


def bs_limit_defect(psi, params, lam, grid, t=0.3, dt=1e-3):
    """
    Both sides of ‖L_λψ - H_BSψ‖ = λ‖ψ_tt‖.

    The left side applies the discretized operators (x stencil, central time
    difference) and subtracts; the right side uses the analytic ψ_tt.
    """
    if lam <= 0:
        raise ParameterDomainError(f"lambda must be > 0, got {lam!r}")
    x = grid.coordinates()
    diffusion = params.sigma ** 2 / 2.0
    mass = bs_mass_term(params.sigma)
    now = psi(x, t)
    psi_tt = (psi(x, t + dt) - 2.0 * now + psi(x, t - dt)) / dt ** 2
    hamiltonian = -diffusion * apply_laplacian(grid, now) + mass * now
    operator = lam * psi_tt + hamiltonian
    defect = _l2(grid, operator - hamiltonian)
    predicted = lam * _l2(grid, psi.second_time_derivative(x, t))
    scale = max(defect, predicted)
    relative = abs(defect - predicted) / scale if scale > 0 else 0.0
    return BSLimitReport(lam=lam, defect_norm=defect, predicted_norm=predicted,
                         relative_difference=relative)


def _check_resolution(tau, grid):
    if tau <= 0:
        raise ParameterDomainError(f"tau must be > 0, got {tau!r}")
    if grid.dx > tau / 20.0:
        raise ResolutionError(f"dz={grid.dx:g} does not resolve the kernel of scale {tau:g}: need dz <= {tau / 20.0:g}")


def _harmonic_part(tau, grid):
    # Stencils act on the analytic kernel at z ± h and τ ± h, so no boundary ghosts enter.
    h = grid.dx
    z = grid.offsets_from_center()
    g = cauchy_poisson(z, tau)
    g_zz = (cauchy_poisson(z + h, tau) - 2.0 * g + cauchy_poisson(z - h, tau)) / h ** 2
    g_tt = (cauchy_poisson(z, tau + h) - 2.0 * g + cauchy_poisson(z, tau - h)) / h ** 2
    return g, g_tt + g_zz


def _relative_norm(grid, values, reference):
    w = grid.weights()
    return math.sqrt(float(np.dot(w, values ** 2)) / float(np.dot(w, reference ** 2)))


def cauchy_residual(lam, tau, grid):
    """‖(∂²_τ + ∂²_z)g - g/(4λ²)‖ / ‖g‖ for g the Poisson kernel centred on the grid."""
    if lam <= 0:
        raise ParameterDomainError(f"lambda must be > 0, got {lam!r}")
    _check_resolution(tau, grid)
    g, harmonic = _harmonic_part(tau, grid)
    return _relative_norm(grid, harmonic - g / (4.0 * lam ** 2), g)


def harmonic_residual(tau, grid):
    """The λ = ∞ residual: the stencil floor of cauchy_residual on this grid."""
    _check_resolution(tau, grid)
    g, harmonic = _harmonic_part(tau, grid)
    return _relative_norm(grid, harmonic, g)


@dataclass(frozen=True)
class ScanResult:
    lambdas: Tuple[float, ...]
    residuals: Tuple[float, ...]
    slope: float
    intercept: float
    r_squared: float
    floor: float = 0.0

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.lambdas, self.lambdas[1:])):
            raise ContractViolation("lambda values must be strictly increasing")
        if any(not r > 0 for r in self.residuals):
            raise ContractViolation("residuals must be strictly positive")
        if not math.isfinite(self.slope):
            raise ContractViolation("fitted slope is not finite")

    @property
    def supports_inverse_square(self):
        lo, hi = SLOPE_WINDOW
        return lo <= self.slope <= hi and self.r_squared >= MIN_R_SQUARED

    def as_dict(self):
        return {"lambdas": list(self.lambdas), "residuals": list(self.residuals),
                "slope": self.slope, "intercept": self.intercept,
                "r_squared": self.r_squared, "floor": self.floor,
                "supports_inverse_square": self.supports_inverse_square}


def fit_power_law(lambdas, residuals, floor=0.0):
    """Least-squares line through (log λ, log residual)."""
    lambdas = tuple(float(v) for v in lambdas)
    residuals = tuple(float(v) for v in residuals)
    if len(lambdas) != len(residuals) or len(lambdas) < 2:
        raise ContractViolation("need at least two (lambda, residual) pairs of equal length")
    if any(not v > 0 for v in lambdas + residuals):
        raise ContractViolation("lambdas and residuals must be strictly positive")
    fit = linregress(np.log(lambdas), np.log(residuals))
    return ScanResult(lambdas, residuals, float(fit.slope), float(fit.intercept),
                      float(fit.rvalue ** 2), floor)


def scan_lambda(lambdas, tau, grid, workers=None):
    """cauchy_residual over increasing λ, fitted on a log-log scale."""
    lambdas = [float(v) for v in lambdas]
    if len(lambdas) < 4:
        raise ContractViolation(f"a scan needs at least 4 lambda values, got {len(lambdas)}")
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])) or lambdas[0] <= 0:
        raise ContractViolation("lambda values must be positive and strictly increasing")

    start = time.monotonic()
    floor = harmonic_residual(tau, grid)
    with ThreadPoolExecutor(max_workers=workers or 1, thread_name_prefix="Residuals") as pool:
        residuals = list(pool.map(lambda lam: cauchy_residual(lam, tau, grid), lambdas))

    at_floor = sum(1 for r in residuals if floor >= FLOOR_FRACTION * r)
    if at_floor > len(residuals) / 2:
        raise FloorDominatedError(
            f"{at_floor} of {len(residuals)} residuals are within 10x of the stencil floor "
            f"{floor:.3g}; refine the z-grid (dz={grid.dx:g}) or lower the lambda values"
        )
    result = fit_power_law(lambdas, residuals, floor)
    logging.info(
        f"[Residuals] scan over {len(lambdas)} lambdas finished in {time.monotonic() - start:.2f}s: "
        f"slope={result.slope:.4f} r2={result.r_squared:.5f} floor={floor:.3g}"
    )
    return result
