# Licensed under GPL v3 (see https://www.gnu.org/licenses/).
"""
Probability densities built from model states and the statistics computed
on them: moments, robust quantiles, the Green's-function convolution and the
Martingale defect E[X|x0] - x0.

Densities are never renormalized in place. Expectations divide by the
computed mass, and the raw mass is always reported next to them.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import quad

from .errors import ContractViolation, DegenerateDensityError, SingularMetricError
from .grid import Field, total_mass
from .spectral_kg import apply_inverse_d

TRUNCATION_THRESHOLD = 1e-3


@dataclass(frozen=True)
class SnapshotDiagnostics:
    tau: float
    mass: float
    mean: float
    variance: float
    median: float
    negative_mass_fraction: float

    def as_dict(self):
        return {"tau": self.tau, "mass": self.mass, "mean": self.mean,
                "variance": self.variance, "median": self.median,
                "negative_mass_fraction": self.negative_mass_fraction}


def _real_values(density):
    if not isinstance(density, Field):
        raise ContractViolation("expected a Field")
    if density.is_complex:
        raise ContractViolation("densities must be real-valued")
    return density.values


def _cumulative(density):
    """Cell edges and cumulative mass of the positive part over them."""
    grid = density.grid
    positive = np.clip(_real_values(density), 0.0, None)
    cells = positive * grid.weights() * grid.dx
    return grid.cell_edges(), np.concatenate(([0.0], np.cumsum(cells)))


def _quantile(edges, cdf, level):
    total = cdf[-1]
    target = level * total
    idx = int(np.searchsorted(cdf, target, side="left"))
    idx = min(max(idx, 1), len(cdf) - 1)
    lo, hi = cdf[idx - 1], cdf[idx]
    frac = (target - lo) / (hi - lo) if hi > lo else 0.0
    return float(edges[idx - 1] + frac * (edges[idx] - edges[idx - 1]))


def _first_moment(density):
    grid = density.grid
    return float(grid.dx * np.dot(grid.weights(), grid.coordinates() * density.values))


def describe(density, tau=0.0):
    """Mass, mean, variance, median and negative-mass fraction of one snapshot."""
    values = _real_values(density)
    grid = density.grid
    w = grid.weights() * grid.dx
    x = grid.coordinates()
    mass = total_mass(density)
    abs_mass = float(np.dot(w, np.abs(values)))
    negative = float(np.dot(w, np.clip(-values, 0.0, None)))
    mean = variance = median = math.nan
    if mass > 0:
        mean = float(np.dot(w, x * values)) / mass
        variance = float(np.dot(w, (x - mean) ** 2 * values)) / mass
    edges, cdf = _cumulative(density)
    if cdf[-1] > 0:
        median = _quantile(edges, cdf, 0.5)
    return SnapshotDiagnostics(
        tau=float(tau),
        mass=mass,
        mean=mean,
        variance=variance,
        median=median,
        negative_mass_fraction=negative / abs_mass if abs_mass > 0 else 0.0,
    )


@dataclass(frozen=True)
class DensitySeries:
    """Densities at strictly increasing times, each with its diagnostics."""
    times: Tuple[float, ...]
    densities: Tuple[Field, ...]
    diagnostics: Tuple[SnapshotDiagnostics, ...]

    def __post_init__(self):
        if not (len(self.times) == len(self.densities) == len(self.diagnostics)):
            raise ContractViolation("times, densities and diagnostics must have equal length")
        if len(self.times) == 0:
            raise ContractViolation("a DensitySeries holds at least one snapshot")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ContractViolation("snapshot times must be strictly increasing")
        grids = {d.grid for d in self.densities}
        if len(grids) != 1:
            raise ContractViolation("all snapshots must share one grid")

    @classmethod
    def from_snapshots(cls, times, densities):
        times = tuple(float(t) for t in times)
        densities = tuple(densities)
        diagnostics = tuple(describe(d, t) for t, d in zip(times, densities))
        return cls(times, densities, diagnostics)

    @property
    def grid(self):
        return self.densities[0].grid

    @property
    def final(self):
        return self.densities[-1]

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class MartingaleReport:
    x0: float
    expectation: float
    defect: float
    mass: float
    term1: float
    term2: float
    truncated: bool
    tail_estimate: float

    def as_dict(self):
        return {"x0": self.x0, "expectation": self.expectation, "defect": self.defect,
                "mass": self.mass, "term1": self.term1, "term2": self.term2,
                "truncated": self.truncated, "tail_estimate": self.tail_estimate}


def _tail_estimate(density, center, mass):
    # Cauchy-like tail A/(x-m)² through the edge value has mass p(edge)·|edge - m|.
    grid = density.grid
    values = np.abs(density.values)
    left = values[0] * abs(grid.x_min - center)
    right = values[-1] * abs(grid.coordinate(grid.n_points - 1) - center)
    return float((left + right) / mass)


def martingale_defect(density, x0, components: Optional[Tuple[Field, Field]] = None):
    """
    E[X|x0] from a (possibly unnormalized) density and its defect from x0.

    components, when given, are the two halves whose sum is density; term1 and
    term2 are their contributions to the normalized first moment.
    """
    _real_values(density)
    mass = total_mass(density)
    if not mass > 0:
        raise DegenerateDensityError(f"density has non-positive total mass {mass!r}")
    expectation = _first_moment(density) / mass
    if components is None:
        term1, term2 = expectation, 0.0
    else:
        first, second = components
        term1 = _first_moment(first) / mass
        term2 = _first_moment(second) / mass
    tail = _tail_estimate(density, expectation, mass)
    truncated = tail > TRUNCATION_THRESHOLD
    if truncated:
        logging.warning(
            f"[Measures] density mass beyond the grid edge estimated at {tail:.3g}; "
            "the expectation is a truncated principal value"
        )
    return MartingaleReport(
        x0=float(x0),
        expectation=expectation,
        defect=expectation - x0,
        mass=mass,
        term1=term1,
        term2=term2,
        truncated=truncated,
        tail_estimate=tail,
    )


@dataclass(frozen=True)
class RobustStats:
    median: float
    q25: float
    q75: float
    iqr: float
    k: float
    tail_mass: float

    def as_dict(self):
        return {"median": self.median, "q25": self.q25, "q75": self.q75,
                "iqr": self.iqr, "k": self.k, "tail_mass": self.tail_mass}


def robust_stats(density, k=5.0):
    """Median, IQR and the fraction of mass beyond median ± k·IQR."""
    edges, cdf = _cumulative(density)
    total = cdf[-1]
    if not total > 0:
        raise DegenerateDensityError("density has no positive mass")
    median = _quantile(edges, cdf, 0.5)
    q25 = _quantile(edges, cdf, 0.25)
    q75 = _quantile(edges, cdf, 0.75)
    iqr = q75 - q25
    lo, hi = median - k * iqr, median + k * iqr
    inside = np.interp(hi, edges, cdf) - np.interp(lo, edges, cdf)
    return RobustStats(median=median, q25=q25, q75=q75, iqr=iqr, k=float(k),
                       tail_mass=float((total - inside) / total))


def truncated_moment(density, order, radius, center=0.0):
    """∫ (x - center)^order p(x) dx over |x - center| ≤ radius."""
    values = _real_values(density)
    grid = density.grid
    offsets = grid.coordinates() - center
    inside = np.abs(offsets) <= radius
    w = grid.weights() * grid.dx
    return float(np.sum(w[inside] * offsets[inside] ** order * values[inside]))


def greens_convolution(field, mu):
    """(G * f)(x) with G(u) = exp(-μ|u|)/(2μ), computed as D⁻¹f in Fourier space."""
    return Field(field.grid, apply_inverse_d(field.grid, field.values, mu))


def greens_convolution_quadrature(fn, points, mu, bounds=(-np.inf, np.inf)):
    """
    Independent evaluation of ∫ exp(-μ|x-y|)/(2μ)·f(y) dy at each x in points.

    fn is a callable on the real line, negligible outside bounds. The integral
    is split at the kernel's kink and real and imaginary parts are integrated
    separately.
    """
    if mu <= 0:
        raise SingularMetricError("the Green's function of D needs mu > 0")
    a, b = bounds

    def kernel(y, x, part):
        return part(np.exp(-mu * abs(x - y)) / (2.0 * mu) * fn(y))

    out = np.empty(len(points), dtype=complex)
    for i, x in enumerate(points):
        total = 0j
        for part, unit in ((np.real, 1.0), (np.imag, 1j)):
            for lo, hi in ((a, x), (x, b)):
                if hi <= lo:
                    continue
                value, _ = quad(kernel, lo, hi, args=(x, part), epsabs=1e-14, epsrel=1e-12, limit=200)
                total += unit * value
        out[i] = total
    return out


def density_components_from_kg(state, params):
    """The two halves ½|ψ|² and ½|ψ̇·(G*ψ̇)| of the Klein-Gordon density."""
    psi, psi_dot = state.amplitudes()
    green = apply_inverse_d(state.grid, psi_dot, params.mu)
    first = 0.5 * np.abs(psi) ** 2
    second = 0.5 * np.abs(psi_dot * green)
    return Field(state.grid, first), Field(state.grid, second)


def density_from_kg(state, params):
    first, second = density_components_from_kg(state, params)
    density = Field(state.grid, first.values + second.values)
    logging.debug(f"[Measures] Klein-Gordon density mass {total_mass(density):.6g}")
    return density


def martingale_report_from_kg(state, params, x0):
    first, second = density_components_from_kg(state, params)
    density = Field(state.grid, first.values + second.values)
    return martingale_defect(density, x0, components=(first, second))


def call_price_from_density(density, spot, strike, martingale=True):
    """
    Zero-rate call priced against a log-return density p(x), S_T = spot·e^x.

    With martingale=True the returns are shifted so that E[S_T] = spot, which
    is what lets a symmetric diffusion density price like Black-Scholes.
    """
    values = _real_values(density)
    if spot <= 0 or strike <= 0:
        raise ContractViolation("spot and strike must be positive")
    grid = density.grid
    w = grid.weights() * grid.dx
    mass = float(np.dot(w, values))
    if not mass > 0:
        raise DegenerateDensityError(f"density has non-positive total mass {mass!r}")
    growth = np.exp(grid.coordinates())
    drift = 1.0
    if martingale:
        drift = float(np.dot(w, growth * values)) / mass
    terminal = spot * growth / drift
    return float(np.dot(w, np.maximum(terminal - strike, 0.0) * values)) / mass
