# Licensed under GPL v3 (see https://www.gnu.org/licenses/).
"""
Two-component Klein-Gordon system in Fourier space.

With Ψ₁ = ψ + iλψ̇ and Ψ₂ = ψ - iλψ̇ the equation ψ̈ = -Dψ,
D = -∂²ₓ + μ², becomes i∂ₜΨ = HΨ with, per Fourier mode k,

    H_k = ½ [[ λD + 1/λ,   λD - 1/λ],
             [-λD + 1/λ,  -λD - 1/λ]],        D = D_k = k² + μ²

H_k is not Hermitian but satisfies H† = η H η⁻¹ for the positive metric

    η_k = ⅛ [[λ² + 1/D,  λ² - 1/D],
             [λ² - 1/D,  λ² + 1/D]]

so its spectrum ±√D is real and the η-norm is conserved.

D is taken from its exact Fourier symbol, which is what makes D⁻¹ cheap; the
module therefore works on periodic grids with μ > 0 only.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, SingularMetricError, UnsupportedDomainError
from .grid import Field, inner_product


def _check_domain(grid, mu):
    if not grid.periodic:
        raise UnsupportedDomainError("the spectral Klein-Gordon toolkit needs a periodic grid")
    if mu <= 0:
        raise SingularMetricError("mu must be > 0: D is not invertible at k = 0 when mu = 0")


def symbol(grid, mu):
    """D_k = k² + μ² on the grid's FFT wavenumbers."""
    return grid.wavenumbers() ** 2 + mu ** 2


@dataclass(frozen=True)
class KGState:
    psi1: Field
    psi2: Field
    lam: float

    def __post_init__(self):
        if self.psi1.grid != self.psi2.grid:
            raise ContractViolation("psi1 and psi2 must share one grid")
        if not self.psi1.grid.periodic:
            raise UnsupportedDomainError("KGState lives on a periodic grid")
        if self.lam == 0:
            raise ContractViolation("lambda must be non-zero")
        if not (self.psi1.is_complex and self.psi2.is_complex):
            object.__setattr__(self, "psi1", Field(self.psi1.grid, self.psi1.values.astype(complex)))
            object.__setattr__(self, "psi2", Field(self.psi2.grid, self.psi2.values.astype(complex)))

    @classmethod
    def from_amplitudes(cls, grid, psi, psi_dot, lam):
        psi = np.asarray(psi)
        psi_dot = np.asarray(psi_dot)
        return cls(Field(grid, psi + 1j * lam * psi_dot),
                   Field(grid, psi - 1j * lam * psi_dot), lam)

    @property
    def grid(self):
        return self.psi1.grid

    def amplitudes(self):
        """(ψ, ψ̇) as complex arrays."""
        a, b = self.psi1.values, self.psi2.values
        return 0.5 * (a + b), (a - b) / (2j * self.lam)

    def spectra(self):
        return np.fft.fft(self.psi1.values), np.fft.fft(self.psi2.values)


@dataclass(frozen=True, eq=False)
class KGOperator:
    """Per-mode blocks of H, shape (n, 2, 2), with the D_k they were built from."""
    grid: object
    params: object
    d: np.ndarray
    blocks: np.ndarray

    def trace(self):
        return np.trace(self.blocks, axis1=1, axis2=2)

    def determinant(self):
        return np.linalg.det(self.blocks)


def _frozen(array):
    array.setflags(write=False)
    return array


def build_hamiltonian(grid, params):
    _check_domain(grid, params.mu)
    lam = params.lam
    d = symbol(grid, params.mu)
    blocks = np.empty((grid.n_points, 2, 2))
    blocks[:, 0, 0] = lam * d + 1.0 / lam
    blocks[:, 0, 1] = lam * d - 1.0 / lam
    blocks[:, 1, 0] = -lam * d + 1.0 / lam
    blocks[:, 1, 1] = -lam * d - 1.0 / lam
    blocks *= 0.5
    logging.debug(f"[SpectralKG] built {grid.n_points} Hamiltonian blocks, lambda={lam:g} mu={params.mu:g}")
    return KGOperator(grid, params, _frozen(d), _frozen(blocks))


def build_metric(grid, params):
    """η blocks, shape (n, 2, 2), Hermitian positive definite."""
    _check_domain(grid, params.mu)
    lam2 = params.lam ** 2
    inv_d = 1.0 / symbol(grid, params.mu)
    blocks = np.empty((grid.n_points, 2, 2))
    blocks[:, 0, 0] = blocks[:, 1, 1] = lam2 + inv_d
    blocks[:, 0, 1] = blocks[:, 1, 0] = lam2 - inv_d
    blocks /= 8.0
    return _frozen(blocks)


def check_pseudo_hermiticity(H, eta):
    """max_k ‖H_k† η_k - η_k H_k‖ (Frobenius)."""
    if eta.shape != H.blocks.shape:
        raise ContractViolation(f"metric shape {eta.shape} does not match operator {H.blocks.shape}")
    h_dagger = np.conj(np.swapaxes(H.blocks, 1, 2))
    defect = h_dagger @ eta - eta @ H.blocks
    return float(np.max(np.linalg.norm(defect, axis=(1, 2))))


def eigenvalues(H):
    """Eigenvalues of every block, shape (n, 2), ascending by real part."""
    values = np.linalg.eigvals(H.blocks).astype(complex)
    order = np.argsort(values.real, axis=1)
    return np.take_along_axis(values, order, axis=1)


def metric_eigenvalues(eta):
    return np.linalg.eigvalsh(eta)


def _check_state(state, H):
    if state.grid != H.grid:
        raise ContractViolation("state and operator live on different grids")
    if state.lam != H.params.lam:
        raise ContractViolation("state and operator use different lambda")


def evolve_exact(state, H, t):
    """
    Ψ(t) = exp(-iHt)Ψ(0) mode by mode. Since H_k² = D_k·I,

        exp(-iH_k t) = cos(ω t) I - i sin(ω t)/ω H_k,   ω = √D_k.
    """
    _check_state(state, H)
    omega = np.sqrt(H.d)
    cos_t = np.cos(omega * t)
    sinc_t = np.sin(omega * t) / omega
    a, b = state.spectra()
    h = H.blocks
    ha = h[:, 0, 0] * a + h[:, 0, 1] * b
    hb = h[:, 1, 0] * a + h[:, 1, 1] * b
    a_t = cos_t * a - 1j * sinc_t * ha
    b_t = cos_t * b - 1j * sinc_t * hb
    return KGState(Field(state.grid, np.fft.ifft(a_t)), Field(state.grid, np.fft.ifft(b_t)), state.lam)


def evolve_amplitudes(grid, psi, psi_dot, params, t):
    """
    Propagate (ψ, ψ̇) under ψ̈ = -Dψ directly:

        ψ̂(t) = cos(ωt) ψ̂ + sin(ωt)/ω ψ̂̇,   ψ̂̇(t) = -ω sin(ωt) ψ̂ + cos(ωt) ψ̂̇
    """
    _check_domain(grid, params.mu)
    omega = np.sqrt(symbol(grid, params.mu))
    p = np.fft.fft(psi)
    q = np.fft.fft(psi_dot)
    c, s = np.cos(omega * t), np.sin(omega * t)
    return np.fft.ifft(c * p + s / omega * q), np.fft.ifft(-omega * s * p + c * q)


def apply_inverse_d(grid, values, mu):
    _check_domain(grid, mu)
    return np.fft.ifft(np.fft.fft(values) / symbol(grid, mu))


def metric_inner_product(a, b, mu):
    """
    ⟨a|b⟩_η = ½(⟨ψ_a|ψ_b⟩ + ⟨ψ̇_a|D⁻¹ψ̇_b⟩).

    D⁻¹ is the convolution with the one-dimensional Green's function
    exp(-μ|u|)/(2μ), applied in Fourier space.
    """
    if a.grid != b.grid or a.lam != b.lam:
        raise ContractViolation("states must share grid and lambda")
    grid = a.grid
    psi_a, dot_a = a.amplitudes()
    psi_b, dot_b = b.amplitudes()
    first = inner_product(Field(grid, psi_a), Field(grid, psi_b))
    second = inner_product(Field(grid, dot_a), Field(grid, apply_inverse_d(grid, dot_b, mu)))
    return complex(0.5 * (first + second))


def block_inner_product(a, b, eta):
    """
    ⟨Ψ_a, η Ψ_b⟩ summed over modes (Parseval-normalized).

    Equals λ²·metric_inner_product: η carries λ²/4 on the ψ direction.
    """
    if a.grid != b.grid:
        raise ContractViolation("states must share one grid")
    grid = a.grid
    a1, a2 = a.spectra()
    b1, b2 = b.spectra()
    eb1 = eta[:, 0, 0] * b1 + eta[:, 0, 1] * b2
    eb2 = eta[:, 1, 0] * b1 + eta[:, 1, 1] * b2
    total = np.sum(np.conj(a1) * eb1 + np.conj(a2) * eb2)
    return complex(grid.dx / grid.n_points * total)


def metric_norm(state, mu):
    return metric_inner_product(state, state, mu).real


def l2_norm(state):
    """Plain ⟨Ψ|Ψ⟩ = ‖Ψ₁‖² + ‖Ψ₂‖², not conserved by the dynamics."""
    return float(inner_product(state.psi1, state.psi1).real + inner_product(state.psi2, state.psi2).real)
