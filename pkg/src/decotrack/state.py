"""Block density operator for a two-electronic-surface system on a grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BlockDensity:
    """Density operator stored as four N x N coordinate-space blocks::

        rho = [[rho_e,  rho_eg],
               [rho_ge, rho_g ]]

    ``e`` labels the upper electronic surface, ``g`` the lower one.
    Physical states keep ``rho_e`` and ``rho_g`` Hermitian and
    ``rho_ge == rho_eg``^dagger; the same container also carries time
    derivatives, which obey the pairing but are traceless.

    Arithmetic (`+`, `-`, scalar `*`) acts blockwise so integrators can
    form linear combinations directly.
    """

    rho_e: np.ndarray
    rho_g: np.ndarray
    rho_eg: np.ndarray
    rho_ge: np.ndarray

    # -- construction ------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> "BlockDensity":
        return cls(*(np.zeros((n, n), dtype=complex) for _ in range(4)))

    @classmethod
    def pure(cls, psi_e: np.ndarray | None, psi_g: np.ndarray | None) -> "BlockDensity":
        """Projector onto the two-component wavefunction (psi_e, psi_g).

        Either component may be None (taken as zero).  The combined
        wavefunction is not renormalized here.
        """
        if psi_e is None and psi_g is None:
            raise ValueError("at least one wavefunction component is required")
        n = len(psi_e) if psi_e is not None else len(psi_g)
        pe = np.zeros(n, dtype=complex) if psi_e is None else np.asarray(psi_e, dtype=complex)
        pg = np.zeros(n, dtype=complex) if psi_g is None else np.asarray(psi_g, dtype=complex)
        return cls(
            rho_e=np.outer(pe, pe.conj()),
            rho_g=np.outer(pg, pg.conj()),
            rho_eg=np.outer(pe, pg.conj()),
            rho_ge=np.outer(pg, pe.conj()),
        )

    @classmethod
    def from_full(cls, full: np.ndarray) -> "BlockDensity":
        """Split a 2N x 2N matrix (e block first) into the four blocks."""
        m = np.asarray(full, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise ValueError(f"expected a square 2N x 2N matrix, got {m.shape}")
        n = m.shape[0] // 2
        return cls(
            rho_e=m[:n, :n].copy(),
            rho_g=m[n:, n:].copy(),
            rho_eg=m[:n, n:].copy(),
            rho_ge=m[n:, :n].copy(),
        )

    # -- views and measures -------------------------------------------

    @property
    def n(self) -> int:
        return self.rho_e.shape[0]

    def full(self) -> np.ndarray:
        """Assemble the 2N x 2N matrix with the e block in the upper left."""
        return np.block([[self.rho_e, self.rho_eg], [self.rho_ge, self.rho_g]])

    def trace(self) -> float:
        return float(np.trace(self.rho_e).real + np.trace(self.rho_g).real)

    def copy(self) -> "BlockDensity":
        return BlockDensity(
            self.rho_e.copy(), self.rho_g.copy(), self.rho_eg.copy(), self.rho_ge.copy()
        )

    def hermitized(self) -> "BlockDensity":
        """Project onto the Hermitian-paired subspace."""
        eg = 0.5 * (self.rho_eg + self.rho_ge.conj().T)
        return BlockDensity(
            rho_e=0.5 * (self.rho_e + self.rho_e.conj().T),
            rho_g=0.5 * (self.rho_g + self.rho_g.conj().T),
            rho_eg=eg,
            rho_ge=eg.conj().T,
        )

    def max_block_diff(self, other: "BlockDensity") -> float:
        """Largest absolute entry difference over all four blocks."""
        return max(
            float(np.max(np.abs(a - b))) if a.size else 0.0
            for a, b in zip(self._blocks(), other._blocks())
        )

    def hermiticity_defect(self) -> float:
        """Relative Frobenius deviation from Hermitian pairing."""
        num = (
            np.linalg.norm(self.rho_e - self.rho_e.conj().T)
            + np.linalg.norm(self.rho_g - self.rho_g.conj().T)
            + 2.0 * np.linalg.norm(self.rho_ge - self.rho_eg.conj().T)
        )
        den = (
            np.linalg.norm(self.rho_e)
            + np.linalg.norm(self.rho_g)
            + 2.0 * np.linalg.norm(self.rho_eg)
        )
        return float(num / den) if den > 0 else 0.0

    def _blocks(self):
        return (self.rho_e, self.rho_g, self.rho_eg, self.rho_ge)

    # -- blockwise linear algebra --------------------------------------

    def __add__(self, other: "BlockDensity") -> "BlockDensity":
        return BlockDensity(
            self.rho_e + other.rho_e,
            self.rho_g + other.rho_g,
            self.rho_eg + other.rho_eg,
            self.rho_ge + other.rho_ge,
        )

    def __sub__(self, other: "BlockDensity") -> "BlockDensity":
        return BlockDensity(
            self.rho_e - other.rho_e,
            self.rho_g - other.rho_g,
            self.rho_eg - other.rho_eg,
            self.rho_ge - other.rho_ge,
        )

    def __mul__(self, scalar: complex) -> "BlockDensity":
        return BlockDensity(
            scalar * self.rho_e,
            scalar * self.rho_g,
            scalar * self.rho_eg,
            scalar * self.rho_ge,
        )

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BlockDensity):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self._blocks(), other._blocks()))
