# Licensed under GPL v3 (see https://www.gnu.org/licenses/).
"""
Uniform 1-D grids, fields sampled on them, and the three-point
second-derivative operator L used by every solver.

Coordinates are log-prices throughout. Periodic grids exclude the right end
point (δx = L/n); Reflecting and Absorbing grids include both ends
(δx = L/(n-1)) and integrate with trapezoid weights.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ContractViolation, ParameterDomainError


class Boundary(str, Enum):
    PERIODIC = "periodic"
    REFLECTING = "reflecting"
    ABSORBING = "absorbing"


@dataclass(frozen=True)
class Grid1D:
    n_points: int
    x_min: float
    x_max: float
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise ContractViolation(f"n_points must be an integer >= 3, got {self.n_points!r}")
        object.__setattr__(self, "n_points", int(self.n_points))
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise ContractViolation("grid bounds must be finite")
        if not self.x_max > self.x_min:
            raise ContractViolation(f"x_max ({self.x_max}) must exceed x_min ({self.x_min})")
        if not self.dx > 0:
            raise ContractViolation("grid spacing underflows to zero")

    @property
    def periodic(self):
        return self.boundary is Boundary.PERIODIC

    @property
    def length(self):
        return self.x_max - self.x_min

    @property
    def dx(self):
        cells = self.n_points if self.periodic else self.n_points - 1
        return (self.x_max - self.x_min) / cells

    def coordinate(self, i):
        return self.x_min + i * self.dx

    def coordinates(self):
        return self.x_min + np.arange(self.n_points) * self.dx

    def offsets_from_center(self):
        """(i - (n-1)/2)·δx: distances to the grid midpoint, exact under translation."""
        return (np.arange(self.n_points) - (self.n_points - 1) / 2.0) * self.dx

    def weights(self):
        """Quadrature weights: 1 everywhere, ½ at the ends of non-periodic grids."""
        w = np.ones(self.n_points)
        if not self.periodic:
            w[0] = w[-1] = 0.5
        return w

    def cell_edges(self):
        """
        Edges of the quadrature cells, length n+1. Node i owns
        [edge[i], edge[i+1]]; non-periodic end nodes own half cells.
        """
        x = self.coordinates()
        half = 0.5 * self.dx
        edges = np.empty(self.n_points + 1)
        edges[1:-1] = x[:-1] + half
        edges[0] = x[0] - half if self.periodic else x[0]
        edges[-1] = x[-1] + half if self.periodic else x[-1]
        return edges

    def wavenumbers(self):
        if not self.periodic:
            raise ContractViolation("wavenumbers are only defined on periodic grids")
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    def as_dict(self):
        return {"n_points": self.n_points, "x_min": self.x_min, "x_max": self.x_max,
                "boundary": self.boundary.value}


@dataclass(frozen=True, eq=False)
class Field:
    """Real or complex samples on a grid. Values are copied and frozen."""
    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, copy=True)
        if values.dtype.kind not in "fc":
            values = values.astype(float)
        if values.ndim != 1 or values.shape[0] != self.grid.n_points:
            raise ContractViolation(
                f"field length {values.shape} does not match grid n_points={self.grid.n_points}"
            )
        if not np.all(np.isfinite(values)):
            raise ContractViolation("field contains NaN or Inf")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, fn(grid.coordinates()))

    @classmethod
    def zeros(cls, grid, dtype=float):
        return cls(grid, np.zeros(grid.n_points, dtype=dtype))

    @property
    def is_complex(self):
        return self.values.dtype.kind == "c"

    def __len__(self):
        return self.grid.n_points

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def with_values(self, values):
        return Field(self.grid, values)


def _check_same_grid(f, g):
    if f.grid != g.grid:
        raise ContractViolation("fields live on different grids")


def apply_laplacian(grid, u):
    """Stencil on a bare array; the solvers call this in their inner loops."""
    if u.shape[0] != grid.n_points:
        raise ContractViolation("field length does not match its grid")
    if grid.periodic:
        left = np.roll(u, 1)
        right = np.roll(u, -1)
    else:
        left = np.empty_like(u)
        right = np.empty_like(u)
        left[1:] = u[:-1]
        right[:-1] = u[1:]
        if grid.boundary is Boundary.REFLECTING:
            # mirror ghosts f[-1] = f[1], f[n] = f[n-2]
            left[0] = u[1]
            right[-1] = u[-2]
        else:
            left[0] = 0.0
            right[-1] = 0.0
    return (left - 2.0 * u + right) / grid.dx ** 2


def laplacian(f):
    """(f[i-1] - 2f[i] + f[i+1]) / δx² with the grid's boundary ghosts."""
    if not isinstance(f, Field):
        raise ContractViolation("laplacian expects a Field")
    return Field(f.grid, apply_laplacian(f.grid, f.values))


def total_mass(f):
    """δx·Σ wᵢ fᵢ (trapezoid ends on non-periodic grids)."""
    mass = f.grid.dx * np.dot(f.grid.weights(), f.values)
    return complex(mass) if f.is_complex else float(mass)


def inner_product(f, g):
    """δx·Σ wᵢ conj(fᵢ) gᵢ."""
    _check_same_grid(f, g)
    value = f.grid.dx * np.sum(f.grid.weights() * np.conj(f.values) * g.values)
    return complex(value) if (f.is_complex or g.is_complex) else float(value)


def l1_distance(f, g):
    _check_same_grid(f, g)
    return float(f.grid.dx * np.dot(f.grid.weights(), np.abs(f.values - g.values)))


def rescale(grid, factor):
    """Grid with coordinates multiplied by factor; n_points and boundary kept."""
    if not (math.isfinite(factor) and factor > 0):
        raise ParameterDomainError(f"rescale factor must be positive, got {factor!r}")
    return Grid1D(grid.n_points, grid.x_min * factor, grid.x_max * factor, grid.boundary)


def rescale_to_z(grid, params):
    """x -> z = x·√(2λ/σ²), the coordinate in which the large-λ equation is λ-free."""
    if params.lam <= 0 or params.sigma <= 0:
        raise ParameterDomainError("rescale_to_z needs lambda > 0 and sigma > 0")
    return rescale(grid, math.sqrt(2.0 * params.lam / params.sigma ** 2))
