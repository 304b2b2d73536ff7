"""Instantaneous time derivative of a block density operator.

Three generators add up to the full open-system derivative, each a pure
function returning a BlockDensity-valued rate in fs^-1:

* coherent commutator with the field-free Hamiltonian,
* quench dissipator (excited population decays to the ground surface at
  rate gamma_q, coherences at gamma_q / 2),
* control coupling through the transition dipole, with the sign
  convention that positive K in the tracking construction can only
  raise the target overlap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import HamiltonianBlocks
from .state import BlockDensity
from .units import HBAR_EV_FS


@dataclass(frozen=True)
class LindbladSpec:
    """Single quench channel with rate gamma_q (fs^-1).

    A pure-dephasing channel is reserved as a future extension; only the
    quench operator is implemented.
    """

    gamma_q: float = 0.003

    def __post_init__(self) -> None:
        if self.gamma_q < 0:
            raise ValueError(f"gamma_q must be non-negative, got {self.gamma_q}")


def _check_dims(h: HamiltonianBlocks, rho: BlockDensity) -> None:
    if h.h_e.shape != rho.rho_e.shape:
        raise ValueError(
            f"dimension mismatch: Hamiltonian {h.h_e.shape} vs state {rho.rho_e.shape}"
        )


def coherent_derivative(h: HamiltonianBlocks, rho: BlockDensity) -> BlockDensity:
    """-(i/hbar) [H0, rho], expanded blockwise."""
    _check_dims(h, rho)
    he, hg, v = h.h_e, h.h_g, h.v_eg
    v_dag = v.conj().T
    f = -1j / HBAR_EV_FS
    d_e = f * (he @ rho.rho_e + v @ rho.rho_ge - rho.rho_e @ he - rho.rho_eg @ v_dag)
    d_g = f * (hg @ rho.rho_g + v_dag @ rho.rho_eg - rho.rho_g @ hg - rho.rho_ge @ v)
    d_eg = f * (he @ rho.rho_eg + v @ rho.rho_g - rho.rho_eg @ hg - rho.rho_e @ v)
    d_ge = f * (hg @ rho.rho_ge + v_dag @ rho.rho_e - rho.rho_ge @ he - rho.rho_g @ v_dag)
    return BlockDensity(d_e, d_g, d_eg, d_ge)


def quench_dissipator(spec: LindbladSpec, rho: BlockDensity) -> BlockDensity:
    """Lindblad quench channel: population flows e -> g at gamma_q,
    coherences decay at gamma_q / 2.  Exactly trace preserving."""
    g = spec.gamma_q
    return BlockDensity(
        rho_e=-g * rho.rho_e,
        rho_g=+g * rho.rho_e,
        rho_eg=-0.5 * g * rho.rho_eg,
        rho_ge=-0.5 * g * rho.rho_ge,
    )


def control_derivative(epsilon: float, mu_matrix: np.ndarray, rho: BlockDensity) -> BlockDensity:
    """-(i/hbar) [H_c, rho] with H_c carrying zero diagonal blocks and
    off-diagonal blocks -mu eps(t)."""
    c_eg = -epsilon * mu_matrix.conj().T
    c_ge = -epsilon * mu_matrix
    f = -1j / HBAR_EV_FS
    d_e = f * (c_eg @ rho.rho_ge - rho.rho_eg @ c_ge)
    d_g = f * (c_ge @ rho.rho_eg - rho.rho_ge @ c_eg)
    d_eg = f * (c_eg @ rho.rho_g - rho.rho_e @ c_eg)
    d_ge = f * (c_ge @ rho.rho_e - rho.rho_g @ c_ge)
    return BlockDensity(d_e, d_g, d_eg, d_ge)


def total_derivative(
    h: HamiltonianBlocks,
    spec: LindbladSpec,
    epsilon: float,
    rho: BlockDensity,
    dissipation: bool = True,
    control: bool = True,
) -> BlockDensity:
    """Sum of the enabled generators; with both flags off this is the
    coherent derivative alone."""
    d = coherent_derivative(h, rho)
    if dissipation:
        d = d + quench_dissipator(spec, rho)
    if control:
        d = d + control_derivative(epsilon, h.mu_matrix, rho)
    return d


def _real_diagonal(m: np.ndarray) -> np.ndarray | None:
    """Diagonal of m as a real vector, or None if m is not a real diagonal matrix."""
    d = np.diagonal(m)
    if np.count_nonzero(m - np.diag(d)) or np.any(d.imag != 0 if np.iscomplexobj(d) else False):
        return None
    return np.ascontiguousarray(d.real if np.iscomplexobj(d) else d, dtype=float)


class Generator:
    """Pre-bound fast evaluator of the full derivative for one track.

    Same math as total_derivative, rearranged for the propagation loop:
    with real-diagonal coupling and dipole, the commutator needs four
    dense matrix products per call instead of sixteen (Hermitian blocks
    reuse B - B^dagger, and the lower coherence block is the adjoint of
    the upper one).  Falls back to the generic composition when either
    off-diagonal block is not a real diagonal matrix.
    """

    def __init__(self, h: HamiltonianBlocks, gamma: float = 0.0):
        if gamma < 0:
            raise ValueError("gamma must be non-negative")
        self.h = h
        self.gamma = gamma
        self._he = np.ascontiguousarray(h.h_e, dtype=complex)
        self._hg = np.ascontiguousarray(h.h_g, dtype=complex)
        self._v_diag = _real_diagonal(h.v_eg)
        self._mu_diag = _real_diagonal(h.mu_matrix)
        self._spec = LindbladSpec(gamma_q=gamma)

    @property
    def fast_path(self) -> bool:
        return self._v_diag is not None and self._mu_diag is not None

    def __call__(self, rho: BlockDensity, epsilon: float = 0.0) -> BlockDensity:
        if not self.fast_path:
            return total_derivative(self.h, self._spec, epsilon, rho)
        w = self._v_diag - epsilon * self._mu_diag  # effective e<->g coupling
        wc = w[:, None]
        b_e = self._he @ rho.rho_e + wc * rho.rho_ge
        b_g = self._hg @ rho.rho_g + wc * rho.rho_eg
        c_eg = self._he @ rho.rho_eg - rho.rho_eg @ self._hg + wc * rho.rho_g - rho.rho_e * w
        f = -1j / HBAR_EV_FS
        d_e = f * (b_e - b_e.conj().T)
        d_g = f * (b_g - b_g.conj().T)
        d_eg = f * c_eg
        if self.gamma:
            g = self.gamma
            d_e -= g * rho.rho_e
            d_g += g * rho.rho_e
            d_eg -= 0.5 * g * rho.rho_eg
        return BlockDensity(d_e, d_g, d_eg, d_eg.conj().T)
