"""Buffered lockstep stepper for the three co-propagating tracks.

The tracking stage advances target, uncontrolled and controlled states
through the same fixed-step scheme with the field frozen per step.  For
a frozen field the generator is linear and autonomous, so the classical
4th-order step equals the degree-4 Taylor polynomial of the propagator;
this module evaluates that polynomial with preallocated buffers, batching
the elementwise work across the three tracks.  One generator application
needs four dense products per track (the Hermitian blocks reuse
B - B^dagger and the lower coherence block is the adjoint of the upper).

Track order in the stacks: 0 = target, 1 = system, 2 = controlled.
"""

from __future__ import annotations

import numpy as np

from .model import HamiltonianBlocks
from .propagator import PropagationError
from .state import BlockDensity
from .units import HBAR_EV_FS

TRACKS = ("target", "system", "controlled")


class TripleTracker:
    """Holds the stacked (3, N, N) blocks and all scratch buffers."""

    def __init__(
        self,
        blocks: HamiltonianBlocks,
        gamma: float,
        branch_state: BlockDensity,
        dt: float,
        trace_drift_limit: float = 1e-6,
    ):
        n = branch_state.n
        self.n = n
        self.dt = dt
        self.trace_drift_limit = trace_drift_limit
        self._he = np.ascontiguousarray(blocks.h_e, dtype=complex)
        self._hg = np.ascontiguousarray(blocks.h_g, dtype=complex)
        v = np.diagonal(blocks.v_eg)
        mu = np.diagonal(blocks.mu_matrix)
        if np.count_nonzero(blocks.v_eg - np.diag(v)) or np.count_nonzero(
            blocks.mu_matrix - np.diag(mu)
        ):
            raise ValueError("fused engine requires diagonal coupling and dipole blocks")
        self._v = v.real.copy()
        self._mu = mu.real.copy()
        # per-track quench rates: the target evolves freely
        self._gam = np.array([0.0, gamma, gamma])[:, None, None]
        self._gam_half = 0.5 * self._gam

        shape = (3, n, n)
        self.E = np.empty(shape, dtype=complex)
        self.G = np.empty(shape, dtype=complex)
        self.C = np.empty(shape, dtype=complex)
        for k in range(3):
            self.E[k] = branch_state.rho_e
            self.G[k] = branch_state.rho_g
            self.C[k] = branch_state.rho_eg
        self._traces = self._track_traces()

        def buf():
            return np.empty(shape, dtype=complex)

        self._uE, self._uG, self._uC = buf(), buf(), buf()
        self._aE, self._aG, self._aC = buf(), buf(), buf()
        self._bE, self._bG = buf(), buf()
        self._t1, self._t2, self._tmp = buf(), buf(), buf()
        self._dE, self._dG, self._dC = buf(), buf(), buf()

    # -- generator application ----------------------------------------

    def _apply(self, eps: float, E, G, C) -> None:
        """Write the generator applied to (E, G, C) into (_dE, _dG, _dC)."""
        he, hg, tmp = self._he, self._hg, self._tmp
        dE, dG, dC = self._dE, self._dG, self._dC
        w = np.broadcast_to(self._v, (3, self.n)).copy()
        if eps:
            w[2] -= eps * self._mu
        w_row = w[:, :, None]
        w_col = w[:, None, :]

        bE, bG, t1, t2 = self._bE, self._bG, self._t1, self._t2
        for k in range(3):
            np.matmul(he, E[k], out=bE[k])
            np.matmul(hg, G[k], out=bG[k])
            np.matmul(he, C[k], out=t1[k])
            np.matmul(C[k], hg, out=t2[k])

        # coupling: W row-scales the adjoint coherence into the Hermitian
        # blocks and enters the coherence block from both sides
        np.conjugate(C.transpose(0, 2, 1), out=tmp)
        tmp *= w_row
        bE += tmp
        np.multiply(w_row, C, out=tmp)
        bG += tmp
        t1 -= t2
        np.multiply(w_row, G, out=tmp)
        t1 += tmp
        np.multiply(E, w_col, out=tmp)
        t1 -= tmp

        f = -1j / HBAR_EV_FS
        np.conjugate(bE.transpose(0, 2, 1), out=tmp)
        np.subtract(bE, tmp, out=dE)
        dE *= f
        np.conjugate(bG.transpose(0, 2, 1), out=tmp)
        np.subtract(bG, tmp, out=dG)
        dG *= f
        np.multiply(t1, f, out=dC)

        np.multiply(self._gam, E, out=tmp)
        dE -= tmp
        dG += tmp
        np.multiply(self._gam_half, C, out=tmp)
        dC -= tmp

    # -- stepping -------------------------------------------------------

    def step(self, eps: float, t: float) -> None:
        """Advance all three tracks by dt with the field frozen at eps."""
        uE, uG, uC = self._uE, self._uG, self._uC
        aE, aG, aC = self._aE, self._aG, self._aC
        np.copyto(uE, self.E)
        np.copyto(uG, self.G)
        np.copyto(uC, self.C)
        np.copyto(aE, self.E)
        np.copyto(aG, self.G)
        np.copyto(aC, self.C)
        for order in (1, 2, 3, 4):
            scale = self.dt / order
            self._apply(eps, uE, uG, uC)
            np.multiply(self._dE, scale, out=uE)
            np.multiply(self._dG, scale, out=uG)
            np.multiply(self._dC, scale, out=uC)
            aE += uE
            aG += uG
            aC += uC
        # Hermitian symmetrization of the population blocks; the
        # coherence pairing is exact by construction
        tmp = self._tmp
        np.conjugate(aE.transpose(0, 2, 1), out=tmp)
        aE += tmp
        aE *= 0.5
        np.conjugate(aG.transpose(0, 2, 1), out=tmp)
        aG += tmp
        aG *= 0.5
        np.copyto(self.E, aE)
        np.copyto(self.G, aG)
        np.copyto(self.C, aC)
        self._check_traces(t)

    def _track_traces(self) -> np.ndarray:
        return np.einsum("kii->k", self.E).real + np.einsum("kii->k", self.G).real

    def _check_traces(self, t: float) -> None:
        traces = self._track_traces()
        drift = traces - self._traces
        bad = ~np.isfinite(traces) | (np.abs(drift) > self.trace_drift_limit)
        if np.any(bad):
            k = int(np.nonzero(bad)[0][0])
            raise PropagationError(
                f"trace drifted by {drift[k]:.3e} in one step "
                f"(limit {self.trace_drift_limit:.1e}); reduce dt",
                track=TRACKS[k],
                time=t,
            )
        self._traces = traces

    # -- views ----------------------------------------------------------

    def state(self, track: int | str) -> BlockDensity:
        """Copy of a track's state as a BlockDensity."""
        k = TRACKS.index(track) if isinstance(track, str) else track
        return BlockDensity(
            rho_e=self.E[k].copy(),
            rho_g=self.G[k].copy(),
            rho_eg=self.C[k].copy(),
            rho_ge=self.C[k].conj().T.copy(),
        )

    def view(self, track: int | str) -> BlockDensity:
        """Lightweight view (the coherence adjoint is still materialized)."""
        k = TRACKS.index(track) if isinstance(track, str) else track
        return BlockDensity(
            rho_e=self.E[k],
            rho_g=self.G[k],
            rho_eg=self.C[k],
            rho_ge=self.C[k].conj().T,
        )
