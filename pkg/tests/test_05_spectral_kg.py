# tests/test_05_spectral_kg.py

import math

import numpy as np
import pytest

from hyperbolic_diffusion_lab.errors import ContractViolation, SingularMetricError, UnsupportedDomainError
from hyperbolic_diffusion_lab.grid import Field, Grid1D
from hyperbolic_diffusion_lab.params import ModelParams
from hyperbolic_diffusion_lab.spectral_kg import (KGState, apply_inverse_d, block_inner_product,
                                                  build_hamiltonian, build_metric,
                                                  check_pseudo_hermiticity, eigenvalues,
                                                  evolve_amplitudes, evolve_exact, l2_norm,
                                                  metric_eigenvalues, metric_inner_product,
                                                  metric_norm, symbol)

LATTICE = [(lam, mu) for lam in (0.5, 1.0, 2.0) for mu in (0.5, 1.0, 2.0)]


@pytest.fixture
def kg_grid():
    return Grid1D(64, -10.0, 10.0)


def random_state(grid, lam, seed):
    rng = np.random.default_rng(seed)
    n = grid.n_points
    psi = rng.normal(size=n) + 1j * rng.normal(size=n)
    psi_dot = rng.normal(size=n) + 1j * rng.normal(size=n)
    return KGState.from_amplitudes(grid, psi, psi_dot, lam), psi, psi_dot


@pytest.mark.parametrize("lam, mu", LATTICE)
def test_hamiltonian_is_pseudo_hermitian(kg_grid, lam, mu):
    params = ModelParams(lam, 1.0, mu)
    H = build_hamiltonian(kg_grid, params)
    eta = build_metric(kg_grid, params)
    assert check_pseudo_hermiticity(H, eta) <= 1e-12
    # H itself is not Hermitian
    assert np.max(np.abs(H.blocks - np.conj(np.swapaxes(H.blocks, 1, 2)))) > 0.1


@pytest.mark.parametrize("lam, mu", LATTICE)
def test_spectrum_is_real_plus_minus_omega(kg_grid, lam, mu):
    H = build_hamiltonian(kg_grid, ModelParams(lam, 1.0, mu))
    eig = eigenvalues(H)
    omega = np.sqrt(kg_grid.wavenumbers() ** 2 + mu ** 2)
    assert np.max(np.abs(eig.imag)) <= 1e-12
    assert np.allclose(eig.real[:, 0], -omega, atol=1e-10)
    assert np.allclose(eig.real[:, 1], omega, atol=1e-10)
    assert np.allclose(H.trace(), 0.0, atol=1e-12)
    assert np.allclose(H.determinant(), -H.d, rtol=1e-12)


def test_metric_is_positive_definite(kg_grid):
    lam, mu = 0.5, 1.0
    eta = build_metric(kg_grid, ModelParams(lam, 1.0, mu))
    values = metric_eigenvalues(eta)
    d = symbol(kg_grid, mu)
    expected = np.sort(np.stack([np.full(d.size, lam ** 2 / 4.0), 1.0 / (4.0 * d)], axis=1), axis=1)
    assert np.all(values > 0)
    assert np.allclose(values, expected, atol=1e-14)


@pytest.mark.parametrize("lam, mu", LATTICE)
def test_metric_norm_is_conserved(kg_grid, lam, mu):
    params = ModelParams(lam, 1.0, mu)
    H = build_hamiltonian(kg_grid, params)
    state, _, _ = random_state(kg_grid, lam, seed=17)
    norm0 = metric_norm(state, mu)
    for t in (0.1, 1.0, 10.0):
        assert metric_norm(evolve_exact(state, H, t), mu) == pytest.approx(norm0, rel=1e-10)


def test_plain_norm_is_not_conserved(kg_grid):
    lam, mu = 1.0, 1.0
    params = ModelParams(lam, 1.0, mu)
    x = kg_grid.coordinates()
    state = KGState.from_amplitudes(kg_grid, np.exp(-x ** 2), np.zeros(kg_grid.n_points), lam)
    before = l2_norm(state)
    after = l2_norm(evolve_exact(state, build_hamiltonian(kg_grid, params), 1.0))
    assert abs(after - before) / before > 1e-6


def test_block_product_is_scaled_metric_product(kg_grid):
    lam, mu = 2.0, 0.5
    eta = build_metric(kg_grid, ModelParams(lam, 1.0, mu))
    a, _, _ = random_state(kg_grid, lam, seed=1)
    b, _, _ = random_state(kg_grid, lam, seed=2)
    block = block_inner_product(a, b, eta)
    metric = metric_inner_product(a, b, mu)
    assert block == pytest.approx(lam ** 2 * metric, rel=1e-12)


def test_exact_propagator_matches_amplitude_evolution(kg_grid):
    lam, mu, t = 0.5, 2.0, 0.7
    params = ModelParams(lam, 1.0, mu)
    state, psi, psi_dot = random_state(kg_grid, lam, seed=4)
    evolved = evolve_exact(state, build_hamiltonian(kg_grid, params), t)
    psi_t, psi_dot_t = evolve_amplitudes(kg_grid, psi, psi_dot, params, t)
    got_psi, got_dot = evolved.amplitudes()
    assert np.allclose(got_psi, psi_t, atol=1e-10)
    assert np.allclose(got_dot, psi_dot_t, atol=1e-10)


def test_single_mode_returns_after_one_period():
    grid = Grid1D(32, 0.0, 2 * math.pi)
    lam, mu = 1.0, 0.75
    params = ModelParams(lam, 1.0, mu)
    x = grid.coordinates()
    state = KGState.from_amplitudes(grid, np.cos(3 * x), np.zeros(32), lam)
    period = 2 * math.pi / math.sqrt(9 + mu ** 2)
    back = evolve_exact(state, build_hamiltonian(grid, params), period)
    assert np.allclose(back.psi1.values, state.psi1.values, atol=1e-12)


def test_amplitudes_round_trip(kg_grid):
    state, psi, psi_dot = random_state(kg_grid, 0.5, seed=8)
    got_psi, got_dot = state.amplitudes()
    assert np.allclose(got_psi, psi)
    assert np.allclose(got_dot, psi_dot)


def test_inverse_d_inverts_the_symbol(kg_grid):
    mu = 1.3
    x = kg_grid.coordinates()
    f = np.exp(-x ** 2)
    # D f = -f'' + mu^2 f, with f'' taken spectrally
    k = kg_grid.wavenumbers()
    d_f = np.fft.ifft((k ** 2 + mu ** 2) * np.fft.fft(f))
    assert np.allclose(apply_inverse_d(kg_grid, d_f, mu), f, atol=1e-12)


def test_spectral_toolkit_rejects_closed_grids_and_zero_mass():
    closed = Grid1D(16, -1.0, 1.0, "reflecting")
    with pytest.raises(UnsupportedDomainError):
        build_hamiltonian(closed, ModelParams(1.0, 1.0, 1.0))
    with pytest.raises(SingularMetricError):
        build_metric(Grid1D(16, -1.0, 1.0), ModelParams(1.0, 1.0, 0.0))
    with pytest.raises(SingularMetricError):
        apply_inverse_d(Grid1D(16, -1.0, 1.0), np.ones(16), 0.0)


def test_state_contracts(kg_grid):
    other = Grid1D(64, -5.0, 5.0)
    with pytest.raises(ContractViolation):
        KGState(Field(kg_grid, np.ones(64)), Field(other, np.ones(64)), 1.0)
    with pytest.raises(ContractViolation):
        KGState.from_amplitudes(kg_grid, np.ones(64), np.ones(64), 0.0)
    state, _, _ = random_state(kg_grid, 1.0, seed=0)
    H = build_hamiltonian(kg_grid, ModelParams(2.0, 1.0, 1.0))
    with pytest.raises(ContractViolation):
        evolve_exact(state, H, 1.0)


def test_corrupted_metric_is_detected(kg_grid):
    lam, mu = 1.0, 1.0
    params = ModelParams(lam, 1.0, mu)
    H = build_hamiltonian(kg_grid, params)
    corrupted = build_metric(kg_grid, params).copy()
    # lambda^2 -> lambda^2 + 0.1 in one off-diagonal entry of every block
    corrupted[:, 0, 1] += 0.1 / 8.0
    assert check_pseudo_hermiticity(H, corrupted) > 1e-3
