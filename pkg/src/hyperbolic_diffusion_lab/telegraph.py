# Licensed under GPL v3 (see https://www.gnu.org/licenses/).
"""
Explicit finite-difference solver for the Wick-rotated hyperbolic diffusion
(telegraph) equation

    λ u_ττ + u_τ = K u_xx - μ² u        (μ = 0 by default)

marched as the pair (u, v = u_τ). Both updates come from the same second
order Taylor step with u_ττ replaced through the equation:

    u⁺ = u + (dt - dt²/2λ) v + (K dt²/2λ) L u - (μ²/λ) u dt²/2
    v⁺ = v + (dt/λ)(K L u - v) - (dt μ²/λ) u

Von Neumann analysis of this pair bounds the step three ways: the CFL
condition dt ≤ δx/c, the damping condition dt ≤ 2λ and the parabolic
condition dt ≤ 2/(4K/δx² + μ²). dt_max is 0.9 times the smallest.
"""

import logging
import math
import time
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .errors import (ContractViolation, NumericalBlowupError, StabilityError,
                     UnsupportedDomainError)
from .grid import Boundary, Field, apply_laplacian, total_mass
from .measures import DensitySeries
from .params import InitialProfile, ModelParams, ProfileKind  # noqa: F401

SAFETY_FACTOR = 0.9

StepCoefficients = namedtuple(
    "StepCoefficients", ["u_from_v", "u_from_lap", "u_from_u", "v_from_lap", "v_from_v", "v_from_u"]
)


@dataclass(frozen=True)
class TelegraphState:
    u: Field
    v: Field
    tau: float = 0.0
    n_steps: int = 0

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise ContractViolation("u and v must share one grid")
        if self.u.is_complex or self.v.is_complex:
            raise ContractViolation("telegraph fields are real")
        if self.tau < 0:
            raise ContractViolation(f"tau must be >= 0, got {self.tau!r}")

    @classmethod
    def at_rest(cls, u, tau=0.0):
        """State with density u and v ≡ 0."""
        return cls(u, Field.zeros(u.grid), tau)

    @property
    def grid(self):
        return self.u.grid


@dataclass(frozen=True)
class StabilityReport:
    dt: float
    dt_max: float
    wave_speed: float
    cfl_ratio: float
    diffusion_number: float
    cfl_bound: float
    damping_bound: float
    diffusion_bound: float
    accepted: bool

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def check_stability(grid, params, dt):
    """Report the stable step range of the explicit scheme on this grid."""
    c = params.wave_speed
    dx = grid.dx
    cfl_bound = dx / c
    damping_bound = 2.0 * params.lam
    diffusion_bound = 2.0 / (4.0 * params.K / dx ** 2 + params.mu ** 2)
    dt_max = SAFETY_FACTOR * min(cfl_bound, damping_bound, diffusion_bound)
    # 1e-9 slack absorbs the rounding of span/n_steps in evolve
    accepted = bool(dt > 0 and dt <= dt_max * (1.0 + 1e-9))
    return StabilityReport(
        dt=dt,
        dt_max=dt_max,
        wave_speed=c,
        cfl_ratio=c * dt / dx,
        diffusion_number=params.K * dt / dx ** 2,
        cfl_bound=cfl_bound,
        damping_bound=damping_bound,
        diffusion_bound=diffusion_bound,
        accepted=accepted,
    )


def step_coefficients(params, dt):
    lam, K, mu2 = params.lam, params.K, params.mu ** 2
    half_dt2 = dt * dt / (2.0 * lam)
    return StepCoefficients(
        u_from_v=dt - half_dt2,
        u_from_lap=K * half_dt2,
        u_from_u=mu2 * half_dt2,
        v_from_lap=dt / lam * K,
        v_from_v=dt / lam,
        v_from_u=dt * mu2 / lam,
    )


def _advance(u, v, lap, coeffs, with_mass):
    u_next = u + coeffs.u_from_v * v + coeffs.u_from_lap * lap
    v_next = v + (coeffs.v_from_lap * lap - coeffs.v_from_v * v)
    if with_mass:
        u_next = u_next - coeffs.u_from_u * u
        v_next = v_next - coeffs.v_from_u * u
    return u_next, v_next


def _march(state, params, n_steps, dt, on_step=None):
    grid = state.grid
    coeffs = step_coefficients(params, dt)
    with_mass = params.mu > 0
    u = state.u.values
    v = state.v.values
    for k in range(1, n_steps + 1):
        u, v = _advance(u, v, apply_laplacian(grid, u), coeffs, with_mass)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise NumericalBlowupError(state.n_steps + k)
        if on_step is not None:
            on_step(k, u)
    return u, v


def step(state, params, dt):
    """One explicit step. Refuses unstable steps with the StabilityReport."""
    report = check_stability(state.grid, params, dt)
    if not report.accepted:
        raise StabilityError(report)
    u, v = _march(state, params, 1, dt)
    return TelegraphState(Field(state.grid, u), Field(state.grid, v),
                          state.tau + dt, state.n_steps + 1)


def advance(state, params, n_steps, dt):
    """n_steps explicit steps of size dt, returning only the final state."""
    if n_steps < 0:
        raise ContractViolation("n_steps must be >= 0")
    report = check_stability(state.grid, params, dt)
    if not report.accepted:
        raise StabilityError(report)
    if n_steps == 0:
        return state
    u, v = _march(state, params, n_steps, dt)
    return TelegraphState(Field(state.grid, u), Field(state.grid, v),
                          state.tau + n_steps * dt, state.n_steps + n_steps)


def plan_steps(span, dt):
    """(n_steps, dt_eff): equal steps no longer than dt that cover span exactly."""
    if span == 0:
        return 0, 0.0
    n_steps = max(1, int(math.ceil(span / dt * (1.0 - 1e-12))))
    return n_steps, span / n_steps


def evolve(initial, params, tau_final, dt, stride=1):
    """
    March from initial.tau to tau_final and record snapshots.

    The step is shrunk to span/ceil(span/dt) so the last snapshot sits at
    tau_final exactly. Snapshots are taken every `stride` steps (stride=None
    keeps only the endpoints); the initial and final states are always included.
    """
    if dt <= 0:
        raise ContractViolation(f"dt must be > 0, got {dt!r}")
    if stride is not None and stride < 1:
        raise ContractViolation(f"stride must be >= 1, got {stride!r}")
    span = tau_final - initial.tau
    if span < 0:
        raise ContractViolation(f"tau_final {tau_final} precedes the initial time {initial.tau}")

    grid = initial.grid
    n_steps, dt_eff = plan_steps(span, dt)
    if n_steps == 0:
        return DensitySeries.from_snapshots([initial.tau], [initial.u])

    report = check_stability(grid, params, dt_eff)
    if not report.accepted:
        raise StabilityError(report)

    logging.info(
        f"[Telegraph] {n_steps} steps of dt={dt_eff:.4g} (dt_max={report.dt_max:.4g}, "
        f"cfl_ratio={report.cfl_ratio:.3g}) to tau={tau_final:g}"
    )
    times = [initial.tau]
    snapshots = [initial.u]
    progress_every = max(1, n_steps // 10)

    def on_step(k, u):
        if k == n_steps or (stride is not None and k % stride == 0):
            times.append(tau_final if k == n_steps else initial.tau + k * dt_eff)
            snapshots.append(Field(grid, u))
        if k % progress_every == 0:
            logging.debug(f"[Telegraph] step {k}/{n_steps}")

    start = time.monotonic()
    _march(initial, params, n_steps, dt_eff, on_step=on_step)
    series = DensitySeries.from_snapshots(times, snapshots)
    final = series.diagnostics[-1]
    logging.info(
        f"[Telegraph] finished in {time.monotonic() - start:.2f}s: mass={final.mass:.12g} "
        f"variance={final.variance:.6g}"
    )
    return series


def _profile_values(grid, profile):
    x = grid.coordinates()
    c, w = profile.center, profile.width
    if profile.kind is ProfileKind.GAUSSIAN:
        return np.exp(-0.5 * ((x - c) / w) ** 2)
    if profile.kind is ProfileKind.POINT:
        values = np.zeros(grid.n_points)
        values[int(np.argmin(np.abs(x - c)))] = 1.0
        return values
    if profile.kind is ProfileKind.UNIFORM:
        if w is None:
            return np.ones(grid.n_points)
        return (np.abs(x - c) <= w).astype(float)
    inside = np.abs(x - c) < w
    return np.where(inside, 0.5 * (1.0 + np.cos(np.pi * (x - c) / w)), 0.0)


def initial_state(grid, profile=None):
    """Density of unit discrete mass with the given profile, at rest (v ≡ 0)."""
    profile = profile or InitialProfile()
    values = _profile_values(grid, profile)
    mass = total_mass(Field(grid, values))
    if not mass > 0:
        raise ContractViolation(f"initial profile {profile.kind.value} has no mass on this grid")
    return TelegraphState.at_rest(Field(grid, values / mass))


def _forward_difference(u, grid):
    if grid.periodic:
        right = np.roll(u, -1)
    else:
        right = np.append(u[1:], u[-2])
    return (right - u) / grid.dx


def _backward_difference(q, grid):
    if grid.periodic:
        left = np.roll(q, 1)
    else:
        left = np.insert(q[:-1], 0, -q[0])
    return (q - left) / grid.dx


def cattaneo_flux(state, params, q_prev, dt):
    """
    Advance the relaxing flux q + λ q_τ = -K u_x by one step.

    q lives on the staggered points x + δx/2, so that the backward difference
    of the forward difference is the grid Laplacian and continuity
    u_τ + q_x = 0 is carried over exactly by the explicit scheme.
    """
    grid = state.grid
    if grid.boundary is Boundary.ABSORBING:
        raise UnsupportedDomainError("flux tracking needs a periodic or reflecting grid")
    if q_prev.grid != grid:
        raise ContractViolation("flux and state live on different grids")
    q = q_prev.values
    r = dt / params.lam
    return Field(grid, q + r * (-params.K * _forward_difference(state.u.values, grid) - q))


def continuity_residual(state, q):
    """max|u_τ + q_x|, relative to max|u_τ| when that is non-zero."""
    residual = state.v.values + _backward_difference(q.values, state.grid)
    scale = float(np.max(np.abs(state.v.values)))
    value = float(np.max(np.abs(residual)))
    return value / scale if scale > 0 else value
