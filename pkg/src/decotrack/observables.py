"""Reported quantities: populations, purity, target overlap, field spectrum."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .model import HamiltonianBlocks
from .state import BlockDensity
from .units import HBAR_EV_FS

_RESIDUE_TOL = 1e-12

SPECTRUM_WINDOWS = ("hann", "rect")

#: Column order contract for trajectory tables; extra diagnostic columns follow.
TRAJECTORY_COLUMNS = (
    "t_fs",
    "pop_e_target",
    "pop_e_system",
    "pop_e_controlled",
    "purity_target",
    "purity_system",
    "purity_controlled",
    "J_system",
    "J_controlled",
    "field",
)
EXTRA_COLUMNS = ("J_controlled_norm", "dJdt_control")


def _real(value: complex, what: str) -> float:
    if abs(value.imag) > _RESIDUE_TOL * max(1.0, abs(value.real)):
        raise ValueError(f"{what} has imaginary residue {value.imag:.3e}")
    return float(value.real)


def _tr_prod(a: np.ndarray, b: np.ndarray) -> complex:
    return complex(np.einsum("ij,ji->", a, b))


def excited_population(rho: BlockDensity) -> float:
    """Tr rho_e (real part; imaginary residue asserted small)."""
    return _real(complex(np.trace(rho.rho_e)), "excited population")


def purity(rho: BlockDensity) -> float:
    """Tr rho^2 over the full space:
    Tr(rho_e^2) + Tr(rho_g^2) + 2 Re Tr(rho_eg rho_ge)."""
    val = (
        _tr_prod(rho.rho_e, rho.rho_e)
        + _tr_prod(rho.rho_g, rho.rho_g)
        + 2.0 * _tr_prod(rho.rho_eg, rho.rho_ge).real
    )
    return _real(complex(val), "purity")


def overlap(rho_c: BlockDensity, rho_tar: BlockDensity) -> float:
    """J = Tr{rho_C rho_tar}; for a pure target this is the expectation
    of the target projector in the controlled state."""
    if rho_c.n != rho_tar.n:
        raise ValueError(f"states live on different grids: {rho_c.n} vs {rho_tar.n}")
    val = (
        _tr_prod(rho_c.rho_e, rho_tar.rho_e)
        + _tr_prod(rho_c.rho_g, rho_tar.rho_g)
        + _tr_prod(rho_c.rho_eg, rho_tar.rho_ge)
        + _tr_prod(rho_c.rho_ge, rho_tar.rho_eg)
    )
    return _real(val, "overlap")


def total_energy(h: HamiltonianBlocks, rho: BlockDensity) -> float:
    """Tr(H0 rho) in eV."""
    val = (
        _tr_prod(h.h_e, rho.rho_e)
        + _tr_prod(h.h_g, rho.rho_g)
        + _tr_prod(h.v_eg, rho.rho_ge)
        + _tr_prod(h.v_eg.conj().T, rho.rho_eg)
    )
    return _real(val, "energy")


def field_spectrum(
    series: np.ndarray,
    dt: float,
    window: str = "hann",
    pad_factor: int = 4,
) -> tuple[np.ndarray, np.ndarray]:
    """One-sided discrete Fourier magnitude of a real field series.

    The series is apodized (Hann by default), zero-padded to pad_factor
    times its length for readable peaks, and binned in energy via
    E_k = hbar 2 pi k / (M dt).  Returns (energies_eV, magnitudes).
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 16:
        raise ValueError(f"need a 1-D series of at least 16 samples, got shape {x.shape}")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if window == "hann":
        w = np.hanning(x.size)
    elif window == "rect":
        w = np.ones(x.size)
    else:
        raise ValueError(f"window must be one of {SPECTRUM_WINDOWS}, got {window!r}")
    m = int(pad_factor) * x.size
    magnitude = np.abs(np.fft.rfft(w * x, n=m))
    energies = HBAR_EV_FS * 2.0 * np.pi * np.fft.rfftfreq(m, d=dt)
    return energies, magnitude


@dataclass
class TrajectoryRecord:
    """Per-step time series of field and observables for the three tracks.

    All arrays share the length of ``times``.  ``metadata`` echoes the
    configuration and resolved run constants (K used, carrier, stage
    boundaries); ``final_states`` keeps the end-of-run block densities
    per track for programmatic use (not serialized).
    """

    times: np.ndarray
    pop_e_target: np.ndarray
    pop_e_system: np.ndarray
    pop_e_controlled: np.ndarray
    purity_target: np.ndarray
    purity_system: np.ndarray
    purity_controlled: np.ndarray
    j_system: np.ndarray
    j_controlled: np.ndarray
    field: np.ndarray
    j_controlled_norm: np.ndarray
    dj_control: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)
    final_states: dict[str, BlockDensity] | None = None

    def column_table(self) -> list[tuple[str, np.ndarray]]:
        """(name, series) pairs in the serialization order."""
        return [
            ("t_fs", self.times),
            ("pop_e_target", self.pop_e_target),
            ("pop_e_system", self.pop_e_system),
            ("pop_e_controlled", self.pop_e_controlled),
            ("purity_target", self.purity_target),
            ("purity_system", self.purity_system),
            ("purity_controlled", self.purity_controlled),
            ("J_system", self.j_system),
            ("J_controlled", self.j_controlled),
            ("field", self.field),
            ("J_controlled_norm", self.j_controlled_norm),
            ("dJdt_control", self.dj_control),
        ]

    def validate(self, tol: float = 1e-8) -> None:
        """Check the series-shape and range invariants."""
        n = self.times.size
        for name, col in self.column_table():
            if col.size != n:
                raise ValueError(f"column {name} has length {col.size}, expected {n}")
        for name in ("pop_e_target", "pop_e_system", "pop_e_controlled"):
            col = getattr(self, name)
            if np.any(col < -tol) or np.any(col > 1.0 + tol):
                raise ValueError(f"{name} leaves [0, 1] beyond tolerance")
        for name in ("purity_target", "purity_system", "purity_controlled"):
            col = getattr(self, name)
            if np.any(col <= 0.0) or np.any(col > 1.0 + tol):
                raise ValueError(f"{name} leaves (0, 1] beyond tolerance")

    def control_slice(self) -> slice:
        """Samples at or after the branch into the three tracks."""
        t_branch = self.metadata.get("t_branch_fs", 0.0)
        start = int(np.searchsorted(self.times, t_branch - 1e-12))
        return slice(start, None)
