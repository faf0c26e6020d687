# Licensed under GPL v3 (see https://www.gnu.org/licenses/).
"""
Monte-Carlo oracle: the persistent random walk of Kac.

Each particle moves at constant speed c and reverses direction at the event
times of a Poisson process of rate a. Its density solves

    u_ττ + 2a u_τ = c² u_xx

which is λu_ττ + u_τ = K u_xx after dividing by 2a, so

    a = 1/(2λ),   c = √(K/λ).

Flip times are sampled exactly, so the only error is sampling noise.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, ParameterDomainError
from .grid import Field
from .params import InitialProfile, ProfileKind


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    positions: np.ndarray
    velocities: np.ndarray
    t: float
    rng_seed: int
    speed: float

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float)
        velocities = np.array(self.velocities, dtype=float)
        if positions.ndim != 1 or positions.shape != velocities.shape or positions.size < 1:
            raise ContractViolation("positions and velocities must be equal-length, non-empty vectors")
        if not np.all(np.abs(velocities) == self.speed):
            raise ContractViolation("every velocity must have magnitude equal to the speed")
        positions.setflags(write=False)
        velocities.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "velocities", velocities)

    def __len__(self):
        return self.positions.size

    def mean(self):
        return float(np.mean(self.positions))

    def variance(self):
        return float(np.var(self.positions))


def _draw_initial(rng, n, init):
    c, w = init.center, init.width
    if init.kind is ProfileKind.POINT:
        return np.full(n, float(c))
    if init.kind is ProfileKind.GAUSSIAN:
        return rng.normal(c, w, size=n)
    if init.kind is ProfileKind.UNIFORM:
        if w is None:
            raise ContractViolation("uniform particle start needs an explicit width")
        return rng.uniform(c - w, c + w, size=n)
    # raised cosine by rejection against a uniform proposal
    out = np.empty(n)
    filled = 0
    while filled < n:
        proposal = rng.uniform(-w, w, size=2 * (n - filled))
        keep = proposal[rng.uniform(size=proposal.size) < 0.5 * (1.0 + np.cos(np.pi * proposal / w))]
        take = keep[: n - filled]
        out[filled:filled + take.size] = c + take
        filled += take.size
    return out


def simulate(n_particles, init, params, t_final, seed):
    """
    Run n_particles independent walkers to t_final.

    seed may be an integer or a numpy SeedSequence; identical seeds give
    bit-identical ensembles.
    """
    if int(n_particles) != n_particles or n_particles < 1:
        raise ParameterDomainError(f"n_particles must be a positive integer, got {n_particles!r}")
    if t_final < 0:
        raise ParameterDomainError(f"t_final must be >= 0, got {t_final!r}")
    init = init or InitialProfile(ProfileKind.POINT)
    n = int(n_particles)
    rng = np.random.default_rng(seed)
    c = params.wave_speed
    mean_free_time = 2.0 * params.lam

    positions = _draw_initial(rng, n, init)
    signs = rng.integers(0, 2, size=n) * 2 - 1
    remaining = np.full(n, float(t_final))
    active = np.flatnonzero(remaining > 0)
    events = 0
    while active.size:
        wait = rng.exponential(mean_free_time, size=active.size)
        left = remaining[active]
        flight = np.minimum(wait, left)
        positions[active] += signs[active] * c * flight
        flips = wait < left
        signs[active[flips]] *= -1
        remaining[active] = np.where(flips, left - flight, 0.0)
        events += int(flips.sum())
        active = active[flips]
    logging.debug(f"[Particles] {n} walkers, {events} velocity reversals up to t={t_final:g}")
    return ParticleEnsemble(positions, signs * c, float(t_final),
                            seed if isinstance(seed, int) else -1, c)


def _bin_index(positions, grid):
    dx = grid.dx
    if grid.periodic:
        origin = grid.x_min - 0.5 * dx
        return np.floor((positions - origin) / dx).astype(np.int64) % grid.n_points
    idx = np.floor((positions - grid.x_min) / dx + 0.5).astype(np.int64)
    return np.clip(idx, 0, grid.n_points - 1)


def histogram_counts(positions, grid):
    """Integer counts per grid cell. Periodic grids wrap, others clip to the end bins."""
    return np.bincount(_bin_index(np.asarray(positions, dtype=float), grid),
                       minlength=grid.n_points).astype(np.int64)


def merge_counts(*counts):
    """Element-wise sum of per-shard bin counts."""
    if not counts:
        raise ContractViolation("nothing to merge")
    total = np.zeros_like(counts[0])
    for c in counts:
        total = total + c
    return total


def density_from_counts(counts, grid):
    """Counts normalized so that the density has total_mass 1."""
    n = int(np.sum(counts))
    if n < 1:
        raise ContractViolation("no particles to histogram")
    return Field(grid, counts / (n * grid.dx * grid.weights()))


def histogram(ensembles, grid):
    """Density of one ensemble, or of a list of shard ensembles merged bin by bin."""
    if isinstance(ensembles, ParticleEnsemble):
        ensembles = [ensembles]
    counts = [histogram_counts(e.positions, grid) for e in ensembles]
    return density_from_counts(merge_counts(*counts), grid)


def shard_sizes(n_particles, shards):
    base, extra = divmod(int(n_particles), shards)
    return [base + (1 if i < extra else 0) for i in range(shards)]


def simulate_shards(n_particles, init, params, t_final, seed, shards=1, workers=None):
    """
    Split the ensemble into shards seeded from SeedSequence(seed).spawn(shards).

    Returns the shard ensembles in submission order. The result depends on
    seed and shards only: the worker count changes wall time, not the ensemble.
    """
    if shards < 1 or shards > n_particles:
        raise ContractViolation(f"shards must be in [1, n_particles], got {shards!r}")
    children = np.random.SeedSequence(seed).spawn(shards)
    sizes = shard_sizes(n_particles, shards)
    start = time.monotonic()
    with ThreadPoolExecutor(max_workers=workers or 1, thread_name_prefix="Particles") as pool:
        futures = [pool.submit(simulate, size, init, params, t_final, child)
                   for size, child in zip(sizes, children)]
        parts = [f.result() for f in futures]
    logging.info(
        f"[Particles] {n_particles} walkers in {shards} shard(s) finished in "
        f"{time.monotonic() - start:.2f}s"
    )
    return parts


def join_shards(parts, seed):
    return ParticleEnsemble(
        np.concatenate([p.positions for p in parts]),
        np.concatenate([p.velocities for p in parts]),
        parts[0].t,
        seed,
        parts[0].speed,
    )


def simulate_sharded(n_particles, init, params, t_final, seed, shards=1, workers=None):
    """simulate_shards joined into one ensemble."""
    return join_shards(simulate_shards(n_particles, init, params, t_final, seed,
                                       shards=shards, workers=workers), seed)
