# tests/test_04_particles.py

import numpy as np
import pytest

from hyperbolic_diffusion_lab.closed_forms import kac_variance
from hyperbolic_diffusion_lab.errors import ContractViolation, ParameterDomainError
from hyperbolic_diffusion_lab.grid import Grid1D, l1_distance, total_mass
from hyperbolic_diffusion_lab.params import InitialProfile, ModelParams
from hyperbolic_diffusion_lab.particles import (ParticleEnsemble, density_from_counts, histogram,
                                                histogram_counts, join_shards, merge_counts,
                                                shard_sizes, simulate, simulate_sharded,
                                                simulate_shards)
from hyperbolic_diffusion_lab.residuals import fit_power_law
from hyperbolic_diffusion_lab.telegraph import check_stability, evolve, initial_state

POINT = InitialProfile("point", 0.0)


def test_walkers_keep_constant_speed(heat_params):
    ensemble = simulate(1000, POINT, heat_params, 2.0, seed=1)
    assert len(ensemble) == 1000
    assert np.all(np.abs(ensemble.velocities) == heat_params.wave_speed)
    assert ensemble.t == 2.0
    assert ensemble.rng_seed == 1


def test_point_start_respects_speed_bound(heat_params):
    t = 3.0
    ensemble = simulate(20000, POINT, heat_params, t, seed=5)
    reach = np.max(np.abs(ensemble.positions))
    assert reach <= heat_params.wave_speed * t * (1.0 + 1e-12)
    # walkers that never flipped sit exactly on the light cone
    assert reach == pytest.approx(heat_params.wave_speed * t)


def test_same_seed_same_ensemble(heat_params):
    a = simulate(500, InitialProfile("gaussian"), heat_params, 1.0, seed=9)
    b = simulate(500, InitialProfile("gaussian"), heat_params, 1.0, seed=9)
    c = simulate(500, InitialProfile("gaussian"), heat_params, 1.0, seed=10)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.velocities, b.velocities)
    assert not np.array_equal(a.positions, c.positions)


def test_zero_time_keeps_initial_positions(heat_params):
    ensemble = simulate(100, InitialProfile("uniform", 0.5, 0.1), heat_params, 0.0, seed=0)
    assert np.all(np.abs(ensemble.positions - 0.5) <= 0.1)


@pytest.mark.parametrize("n, t", [(0, 1.0), (2.5, 1.0), (10, -1.0)])
def test_simulate_rejects_bad_arguments(heat_params, n, t):
    with pytest.raises(ParameterDomainError):
        simulate(n, POINT, heat_params, t, seed=0)


def test_ensemble_requires_matching_speed():
    with pytest.raises(ContractViolation):
        ParticleEnsemble(np.zeros(3), np.array([1.0, -1.0, 0.5]), 0.0, 0, 1.0)


def test_variance_follows_persistent_walk_law():
    params = ModelParams.hyperbolic_heat(0.5, 0.02)
    t = 20 * params.lam
    ensemble = simulate(100000, POINT, params, t, seed=11)
    assert ensemble.variance() == pytest.approx(kac_variance(t, params), rel=0.02)
    assert abs(ensemble.mean()) < 0.01


def test_variance_becomes_diffusive():
    params = ModelParams.hyperbolic_heat(0.5, 0.02)
    t = 100 * params.lam
    ensemble = simulate(100000, POINT, params, t, seed=12)
    assert ensemble.variance() == pytest.approx(2 * params.K * t, rel=0.05)


def test_histogram_wraps_on_periodic_grid():
    grid = Grid1D(4, 0.0, 4.0)
    # bin i covers [i - 0.5, i + 0.5); 3.6 and -0.4 both belong to bin 0
    counts = histogram_counts([3.6, -0.4, 0.2, 1.0, 2.49, 7.0], grid)
    assert counts.tolist() == [3, 1, 1, 1]


def test_histogram_clips_on_closed_grid():
    grid = Grid1D(5, 0.0, 4.0, "reflecting")
    counts = histogram_counts([-3.0, 0.2, 0.6, 3.9, 12.0], grid)
    assert counts.tolist() == [2, 1, 0, 0, 2]


def test_histogram_density_has_unit_mass(heat_params):
    for grid in (Grid1D(64, -1.0, 1.0), Grid1D(65, -1.0, 1.0, "reflecting")):
        ensemble = simulate(5000, InitialProfile("gaussian", 0.0, 0.2), heat_params, 0.5, seed=3)
        assert total_mass(histogram(ensemble, grid)) == pytest.approx(1.0)


def test_merge_and_normalize_counts():
    grid = Grid1D(4, 0.0, 4.0)
    merged = merge_counts(np.array([1, 0, 0, 1]), np.array([0, 2, 0, 0]))
    assert merged.tolist() == [1, 2, 0, 1]
    assert total_mass(density_from_counts(merged, grid)) == pytest.approx(1.0)
    with pytest.raises(ContractViolation):
        density_from_counts(np.zeros(4, dtype=int), grid)
    with pytest.raises(ContractViolation):
        merge_counts()


def test_shard_sizes():
    assert shard_sizes(10, 3) == [4, 3, 3]
    assert sum(shard_sizes(100001, 4)) == 100001


def test_sharded_result_does_not_depend_on_workers(heat_params):
    a = simulate_sharded(4000, InitialProfile("gaussian"), heat_params, 1.0, seed=21, shards=4, workers=1)
    b = simulate_sharded(4000, InitialProfile("gaussian"), heat_params, 1.0, seed=21, shards=4, workers=4)
    assert np.array_equal(a.positions, b.positions)
    assert len(a) == 4000
    with pytest.raises(ContractViolation):
        simulate_sharded(3, POINT, heat_params, 1.0, seed=0, shards=4)


def test_walkers_match_finite_differences(heat_params, periodic_grid):
    profile = InitialProfile("gaussian", 0.0, 0.05)
    ensemble = simulate_sharded(200000, profile, heat_params, 1.0, seed=42, shards=4, workers=2)
    mc = histogram(ensemble, periodic_grid)
    dt = check_stability(periodic_grid, heat_params, 1.0).dt_max
    fd = evolve(initial_state(periodic_grid, profile), heat_params, 1.0, dt, stride=None).final
    assert l1_distance(fd, mc) < 0.05


def test_shard_histograms_merge_to_the_joined_histogram(heat_params, periodic_grid):
    profile = InitialProfile("gaussian", 0.0, 0.05)
    parts = simulate_shards(6000, profile, heat_params, 1.0, seed=9, shards=3, workers=3)
    assert [len(p) for p in parts] == [2000, 2000, 2000]
    joined = join_shards(parts, 9)
    assert np.array_equal(joined.positions,
                          simulate_sharded(6000, profile, heat_params, 1.0, seed=9, shards=3).positions)
    assert np.array_equal(histogram(parts, periodic_grid).values,
                          histogram(joined, periodic_grid).values)


def test_walker_error_shrinks_like_inverse_square_root(heat_params, periodic_grid):
    profile = InitialProfile("gaussian", 0.0, 0.05)
    dt = check_stability(periodic_grid, heat_params, 1.0).dt_max
    fd = evolve(initial_state(periodic_grid, profile), heat_params, 1.0, dt, stride=None).final
    sizes = [1000, 10000, 100000]
    errors = [l1_distance(fd, histogram(simulate(n, profile, heat_params, 1.0, seed=n), periodic_grid))
              for n in sizes]
    assert errors[0] > errors[1] > errors[2]
    assert -0.65 <= fit_power_law(sizes, errors).slope <= -0.35
