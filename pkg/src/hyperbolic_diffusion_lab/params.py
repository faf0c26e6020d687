# Licensed under GPL v3 (see https://www.gnu.org/licenses/).
"""Model parameters shared by every solver."""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import ParameterDomainError


@dataclass(frozen=True)
class ModelParams:
    """
    Parameters of the hyperbolic-diffusion model.

    lam:         relaxation time λ (> 0)
    sigma:       volatility σ (> 0)
    mu:          mass parameter μ (≥ 0)
    diffusivity: K (> 0); σ²/2 when omitted
    """
    lam: float
    sigma: float
    mu: float = 0.0
    diffusivity: Optional[float] = field(default=None)

    def __post_init__(self):
        for name in ("lam", "sigma", "mu"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterDomainError(f"{name} must be finite, got {value!r}")
        if self.lam <= 0:
            raise ParameterDomainError(f"relaxation time lambda must be > 0, got {self.lam!r}")
        if self.sigma <= 0:
            raise ParameterDomainError(f"volatility sigma must be > 0, got {self.sigma!r}")
        if self.mu < 0:
            raise ParameterDomainError(f"mass mu must be >= 0, got {self.mu!r}")
        if self.diffusivity is None:
            object.__setattr__(self, "diffusivity", self.sigma ** 2 / 2.0)
        elif not math.isfinite(self.diffusivity) or self.diffusivity <= 0:
            raise ParameterDomainError(f"diffusivity K must be > 0, got {self.diffusivity!r}")

    @classmethod
    def from_volatility(cls, lam, sigma, mu=0.0):
        """Backward hyperbolic heat equation: K = σ²/2."""
        return cls(lam=lam, sigma=sigma, mu=mu)

    @classmethod
    def hyperbolic_heat(cls, lam, diffusivity, mu=0.0):
        """Forward hyperbolic heat equation with diffusivity K (σ = √(2K))."""
        if diffusivity <= 0:
            raise ParameterDomainError(f"diffusivity K must be > 0, got {diffusivity!r}")
        return cls(lam=lam, sigma=math.sqrt(2.0 * diffusivity), mu=mu, diffusivity=diffusivity)

    @property
    def K(self):
        return self.diffusivity

    @property
    def wave_speed(self):
        """Propagation speed √(K/λ)."""
        return math.sqrt(self.diffusivity / self.lam)

    @property
    def flip_rate(self):
        """Velocity-reversal rate 1/(2λ) of the matching persistent random walk."""
        return 1.0 / (2.0 * self.lam)

    def as_dict(self):
        return {"lambda": self.lam, "sigma": self.sigma, "mu": self.mu,
                "diffusivity": self.diffusivity}


class ProfileKind(str, Enum):
    GAUSSIAN = "gaussian"
    POINT = "point"
    UNIFORM = "uniform"
    BUMP = "bump"


DEFAULT_WIDTHS = {ProfileKind.GAUSSIAN: 0.05, ProfileKind.BUMP: 0.1}


@dataclass(frozen=True)
class InitialProfile:
    """
    Shape of the initial density, shared by the PDE and particle solvers.

    gaussian: standard deviation `width` (default 0.05)
    point:    all mass at `center`
    uniform:  flat on [center - width, center + width], the whole grid if width is None
    bump:     compact raised cosine of half-width `width` (default 0.1)
    """
    kind: ProfileKind = ProfileKind.GAUSSIAN
    center: float = 0.0
    width: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ProfileKind(self.kind))
        if self.width is None and self.kind in DEFAULT_WIDTHS:
            object.__setattr__(self, "width", DEFAULT_WIDTHS[self.kind])
        if self.width is not None and not (math.isfinite(self.width) and self.width > 0):
            raise ParameterDomainError(f"profile width must be > 0, got {self.width!r}")
        if not math.isfinite(self.center):
            raise ParameterDomainError(f"profile center must be finite, got {self.center!r}")

    @property
    def variance(self):
        """Variance of the continuous profile; None for a grid-wide uniform start."""
        if self.kind is ProfileKind.POINT:
            return 0.0
        if self.kind is ProfileKind.GAUSSIAN:
            return self.width ** 2
        if self.kind is ProfileKind.UNIFORM:
            return None if self.width is None else self.width ** 2 / 3.0
        return self.width ** 2 * (1.0 / 3.0 - 2.0 / math.pi ** 2)

    def as_dict(self):
        return {"kind": self.kind.value, "center": self.center, "width": self.width}
