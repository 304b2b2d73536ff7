"""Discretized physical system: grid, potentials, Hamiltonian blocks, initial state.

The model is a pair of harmonic diabatic surfaces in a dimensionless
normal coordinate Q, displaced vertically by the half-gap ``delta`` and
horizontally by their equilibrium positions, coupled by a constant
interstate term and driven through a transition dipole::

    V_g(Q) = -delta + (omega_g / 2) (Q - q_g)^2
    V_e(Q) = +delta + (omega_e / 2) (Q - q_e)^2

with the kinetic operator T = (omega_ref / 2) P^2 realized spectrally on
a periodic Fourier grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .state import BlockDensity

COUPLING_SHAPES = ("constant", "linear")


@dataclass(frozen=True)
class GridSpec:
    """Uniform 1-D coordinate grid, [q_min, q_max) with n_points samples.

    n_points must be a power of two (>= 8) so spectral differentiation
    maps cleanly onto the FFT.
    """

    n_points: int = 128
    q_min: float = -8.0
    q_max: float = 8.0

    def __post_init__(self) -> None:
        n = self.n_points
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"n_points must be a power of two >= 8, got {n}")
        if not self.q_max > self.q_min:
            raise ValueError(f"q_max must exceed q_min, got [{self.q_min}, {self.q_max}]")

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.n_points


@dataclass(frozen=True)
class Grid:
    """Built grid: coordinate samples and the conjugate momentum ladder."""

    q: np.ndarray
    p: np.ndarray
    dq: float
    dp: float


def build_grid(spec: GridSpec) -> Grid:
    """Coordinate samples q_i = q_min + i dq and the standard DFT momentum
    ladder (k = 0..N/2-1 positive, then negative), dp = 2 pi / (N dq)."""
    n = spec.n_points
    dq = spec.dq
    q = spec.q_min + dq * np.arange(n)
    dp = 2.0 * np.pi / (n * dq)
    k = np.arange(n)
    k[n // 2 :] -= n
    return Grid(q=q, p=dp * k, dq=dq, dp=dp)


@dataclass(frozen=True)
class VibronicModel:
    """Physical parameters of the two-surface model (energies in eV).

    Defaults are the reference parameter set used throughout:
    omega_g = omega_e = 0.07 eV, half-gap delta = 0.7 eV, constant
    interstate coupling v_ge = 0.05 eV, equilibrium positions 0 and
    -0.1, unit transition dipole.

    ``mu`` may be a scalar (constant dipole) or a per-grid-point profile.
    ``omega_ref`` sets the kinetic prefactor and defaults to omega_g;
    it only matters when the two surface frequencies differ.
    ``coupling_shape`` selects a constant interstate coupling v_ge * I
    or a linear one v_ge * diag(Q).
    """

    omega_g: float = 0.07
    omega_e: float = 0.07
    delta: float = 0.7
    q_g: float = 0.0
    q_e: float = -0.1
    v_ge: float = 0.05
    mu: float | tuple = 1.0
    omega_ref: float | None = None
    coupling_shape: str = "constant"

    def __post_init__(self) -> None:
        for name in ("omega_g", "omega_e"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.omega_ref is not None and self.omega_ref <= 0:
            raise ValueError("omega_ref must be positive")
        if self.coupling_shape not in COUPLING_SHAPES:
            raise ValueError(
                f"coupling_shape must be one of {COUPLING_SHAPES}, got {self.coupling_shape!r}"
            )
        if not np.all(np.isreal(np.asarray(self.mu))):
            raise ValueError("mu must be real")

    @property
    def kinetic_prefactor(self) -> float:
        return self.omega_g if self.omega_ref is None else self.omega_ref

    def vertical_gap(self, q: float = 0.0) -> float:
        """V_e(q) - V_g(q); at q = 0 this fixes the pump carrier."""
        v_g = -self.delta + 0.5 * self.omega_g * (q - self.q_g) ** 2
        v_e = +self.delta + 0.5 * self.omega_e * (q - self.q_e) ** 2
        return v_e - v_g


@dataclass(frozen=True)
class HamiltonianBlocks:
    """Dense Hermitian blocks of the field-free Hamiltonian (eV)."""

    h_e: np.ndarray
    h_g: np.ndarray
    v_eg: np.ndarray
    mu_matrix: np.ndarray


def build_potentials(model: VibronicModel, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Diabatic potential samples (V_g, V_e) on the grid, in eV."""
    v_g = -model.delta + 0.5 * model.omega_g * (grid.q - model.q_g) ** 2
    v_e = +model.delta + 0.5 * model.omega_e * (grid.q - model.q_e) ** 2
    return v_g, v_e


def build_kinetic(grid: Grid, omega_ref: float) -> np.ndarray:
    """Dense kinetic matrix T = (omega_ref / 2) P^2 via spectral differentiation.

    The matrix is real symmetric, so Hamiltonian application stays in
    plain matrix multiplication.
    """
    kin_p = 0.5 * omega_ref * grid.p**2
    n = grid.q.size
    t = np.fft.ifft(kin_p[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0)
    t = t.real  # imaginary residue is FFT roundoff
    return 0.5 * (t + t.T)


def build_hamiltonian(model: VibronicModel, grid: Grid) -> HamiltonianBlocks:
    """Assemble all four Hamiltonian blocks for a model on a grid."""
    v_g, v_e = build_potentials(model, grid)
    t = build_kinetic(grid, model.kinetic_prefactor)
    n = grid.q.size
    if model.coupling_shape == "linear":
        v_eg = model.v_ge * np.diag(grid.q)
    else:
        v_eg = model.v_ge * np.eye(n)
    mu = np.asarray(model.mu, dtype=float)
    if mu.ndim == 0:
        mu_matrix = float(mu) * np.eye(n)
    elif mu.shape == (n,):
        mu_matrix = np.diag(mu)
    else:
        raise ValueError(f"mu must be a scalar or a length-{n} profile, got shape {mu.shape}")
    return HamiltonianBlocks(h_e=t + np.diag(v_e), h_g=t + np.diag(v_g), v_eg=v_eg, mu_matrix=mu_matrix)


def _require_hermitian(h: np.ndarray, tol: float = 1e-10) -> None:
    defect = np.linalg.norm(h - h.conj().T)
    scale = max(np.linalg.norm(h), 1.0)
    if defect > tol * scale:
        raise ValueError(f"matrix is not Hermitian (relative defect {defect / scale:.2e})")


def ground_eigenpair(h_g: np.ndarray) -> tuple[float, np.ndarray]:
    """Lowest eigenvalue and unit-norm eigenvector, phase-fixed so the
    largest-magnitude component is real and positive."""
    _require_hermitian(h_g)
    energies, vectors = np.linalg.eigh(h_g)
    phi = vectors[:, 0]
    pivot = phi[np.argmax(np.abs(phi))]
    phi = phi * (abs(pivot) / pivot) if pivot != 0 else phi
    return float(energies[0]), phi.astype(complex)


def ground_vibronic_state(h_g: np.ndarray) -> BlockDensity:
    """Pure initial state |phi_0><phi_0| on the lower surface.

    phi_0 is obtained by dense diagonalization, which satisfies the
    eigen-residual contract ||h_g phi - E phi|| < 1e-10 outright.
    """
    _, phi = ground_eigenpair(h_g)
    return BlockDensity.pure(psi_e=None, psi_g=phi)
