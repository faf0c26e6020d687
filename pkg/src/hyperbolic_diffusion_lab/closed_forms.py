# Licensed under GPL v3 (see https://www.gnu.org/licenses/).
"""
Analytic reference solutions used as oracles by the solvers and tests.

Zero interest rate and forward-measure conventions throughout.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import erf
from scipy.stats import norm

from .errors import ParameterDomainError
from .grid import Field


def _require_positive(**values):
    for name, value in values.items():
        if not (math.isfinite(value) and value > 0):
            raise ParameterDomainError(f"{name} must be > 0, got {value!r}")


def heat_kernel(x, tau, K, x0=0.0):
    """(4πKτ)^(-1/2)·exp(-(x-x0)²/(4Kτ)); variance 2Kτ."""
    _require_positive(tau=tau, K=K)
    x = np.asarray(x, dtype=float)
    return np.exp(-((x - x0) ** 2) / (4.0 * K * tau)) / math.sqrt(4.0 * math.pi * K * tau)


def cauchy_poisson(z, tau, center=0.0):
    """Poisson kernel of the half-plane, (1/π)·τ/((z-c)²+τ²)."""
    _require_positive(tau=tau)
    z = np.asarray(z, dtype=float)
    return tau / (math.pi * ((z - center) ** 2 + tau ** 2))


def bs_call_price(spot, strike, sigma, tau):
    """Zero-rate Black-Scholes call."""
    _require_positive(spot=spot, strike=strike, sigma=sigma, tau=tau)
    vol = sigma * math.sqrt(tau)
    d1 = (math.log(spot / strike) + 0.5 * vol ** 2) / vol
    d2 = d1 - vol
    return float(spot * norm.cdf(d1) - strike * norm.cdf(d2))


def bs_mass_term(sigma):
    """Constant σ²/8 of the Black-Scholes Hamiltonian."""
    _require_positive(sigma=sigma)
    return sigma ** 2 / 8.0


def telegraph_variance(tau, K, lam, var0=0.0, rate0=0.0):
    """
    Second central moment of a telegraph solution λu_ττ + u_τ = K u_xx.

    var0 is the initial variance and rate0 its initial growth rate (0 when the
    field starts with v = 0). For τ ≫ λ the growth becomes the diffusive 2Kτ;
    for τ ≲ λ it is ballistic, ≈ Kτ²/λ.
    """
    _require_positive(K=K, lam=lam)
    if tau < 0:
        raise ParameterDomainError(f"tau must be >= 0, got {tau!r}")
    relax = -math.expm1(-tau / lam)
    return var0 + 2.0 * K * tau + lam * (rate0 - 2.0 * K) * relax


def kac_variance(t, params, var0=0.0):
    """Position variance of a persistent random walk with stationary ±c velocities."""
    return telegraph_variance(t, params.K, params.lam, var0=var0)


class DensityKind(str, Enum):
    HEAT_KERNEL = "heat_kernel"
    CAUCHY_POISSON = "cauchy_poisson"


@dataclass(frozen=True)
class AnalyticDensity:
    """
    A closed-form probability density on the real line.

    For HEAT_KERNEL, scale is Kτ (variance 2·scale); for CAUCHY_POISSON it is
    the half-width τ.
    """
    kind: DensityKind
    scale: float
    center: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", DensityKind(self.kind))
        _require_positive(scale=self.scale)

    @classmethod
    def heat(cls, tau, K, center=0.0):
        _require_positive(tau=tau, K=K)
        return cls(DensityKind.HEAT_KERNEL, K * tau, center)

    @classmethod
    def cauchy(cls, tau, center=0.0):
        return cls(DensityKind.CAUCHY_POISSON, tau, center)

    def pdf(self, x):
        if self.kind is DensityKind.HEAT_KERNEL:
            return heat_kernel(x, 1.0, self.scale, self.center)
        return cauchy_poisson(x, self.scale, self.center)

    def sample(self, grid):
        return Field(grid, self.pdf(grid.coordinates()))

    def mass_within(self, radius):
        """Exact mass on [center - radius, center + radius]."""
        if radius < 0:
            raise ParameterDomainError(f"radius must be >= 0, got {radius!r}")
        if self.kind is DensityKind.HEAT_KERNEL:
            return float(erf(radius / math.sqrt(4.0 * self.scale)))
        return 2.0 / math.pi * math.atan(radius / self.scale)

    def quantile(self, p):
        if not 0.0 < p < 1.0:
            raise ParameterDomainError(f"quantile level must be in (0, 1), got {p!r}")
        if self.kind is DensityKind.HEAT_KERNEL:
            return float(norm.ppf(p, loc=self.center, scale=math.sqrt(2.0 * self.scale)))
        return self.center + self.scale * math.tan(math.pi * (p - 0.5))

    def interquartile_range(self):
        return self.quantile(0.75) - self.quantile(0.25)

    @property
    def variance(self):
        if self.kind is DensityKind.HEAT_KERNEL:
            return 2.0 * self.scale
        return math.inf
