"""External fields: Gaussian pump and the tracking feedback field.

The tracking field is the instantaneous maximizer of the target-overlap
rate: with the control Hamiltonian carrying -mu eps off-diagonal blocks,
the choice

    eps = 2 K Im Tr{rho_C mu_full rho_tar}

makes the control contribution to d Tr{rho_C rho_tar}/dt equal to
K |Tr{...}|^2 / hbar >= 0 at every instant.  Two independent evaluations
are provided: the full-space trace form and the blockwise partial-trace
form; they must agree to near machine precision and the test suite holds
them to that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .state import BlockDensity
from .units import HBAR_EV_FS

_FWHM_FACTOR = 2.0 * np.sqrt(2.0 * np.log(2.0))  # field-envelope FWHM = factor * sigma


@dataclass(frozen=True)
class PumpPulse:
    """Gaussian pump: eps0 exp(-(t - t_max)^2 / 2 sigma_L^2) cos(omega_L t).

    ``omega_L`` or ``t_max`` set to None are resolved against the model
    at run time: the carrier to the vertical gap at Q = 0, the peak time
    to 4 sigma_L so the pulse is fully contained in [0, t_max + 4 sigma].
    """

    epsilon0: float = 0.228
    sigma_L: float = 12.0 / _FWHM_FACTOR
    t_max: float | None = None
    omega_L: float | None = None

    def __post_init__(self) -> None:
        if self.sigma_L <= 0:
            raise ValueError(f"sigma_L must be positive, got {self.sigma_L}")
        if self.epsilon0 < 0:
            raise ValueError(f"epsilon0 must be non-negative, got {self.epsilon0}")

    @classmethod
    def from_fwhm(cls, fwhm: float, **kwargs) -> "PumpPulse":
        return cls(sigma_L=fwhm / _FWHM_FACTOR, **kwargs)

    @property
    def fwhm(self) -> float:
        return _FWHM_FACTOR * self.sigma_L


@dataclass(frozen=True)
class ControlSchedule:
    """Envelope magnitude K and on/off gating for the tracking field.

    ``k_value`` is in energy / dipole^2; None requests auto-calibration
    at run start.  ``off_windows`` are half-open (t_start, t_end) pairs
    in fs during which the field is forced to zero.
    """

    k_value: float | None = None
    off_windows: tuple[tuple[float, float], ...] = ()
    enabled: bool = True

    def __post_init__(self) -> None:
        if self.k_value is not None and self.k_value < 0:
            raise ValueError(f"k_value must be non-negative, got {self.k_value}")
        last_end = -np.inf
        for t0, t1 in self.off_windows:
            if t1 < t0:
                raise ValueError(f"off window ({t0}, {t1}) has negative length")
            if t0 < last_end:
                raise ValueError("off windows must be disjoint and ordered")
            last_end = t1


def pump_field(t: float, pulse: PumpPulse) -> float:
    """Real pump field value at time t (cosine carrier).

    omega_L is stored as an energy (eV); the carrier phase advances at
    omega_L / hbar rad per fs.
    """
    if pulse.t_max is None or pulse.omega_L is None:
        raise ValueError("pump pulse must be resolved (t_max and omega_L set)")
    arg = (t - pulse.t_max) / pulse.sigma_L
    return pulse.epsilon0 * np.exp(-0.5 * arg * arg) * np.cos(pulse.omega_L * t / HBAR_EV_FS)


def _mu_full(mu_matrix: np.ndarray, n: int) -> np.ndarray:
    """Off-diagonal dipole structure on the full 2N space (e block first)."""
    m = np.zeros((2 * n, 2 * n), dtype=complex)
    m[:n, n:] = mu_matrix.conj().T
    m[n:, :n] = mu_matrix
    return m


def _as_mu_matrix(mu, n: int) -> np.ndarray:
    mu = np.asarray(mu)
    if mu.ndim == 1:
        return np.diag(mu.astype(complex))
    return mu


def _check_same_grid(rho_c: BlockDensity, rho_tar: BlockDensity) -> None:
    if rho_c.n != rho_tar.n:
        raise ValueError(f"states live on different grids: {rho_c.n} vs {rho_tar.n}")


def tracking_field_general(
    rho_c: BlockDensity,
    rho_tar: BlockDensity,
    mu_matrix: np.ndarray,
    k_value: float,
) -> float:
    """Tracking field from the full-space trace expression.

    Computed as -i K (Tr{rho_C mu rho_tar} - Tr{rho_tar mu rho_C}); the
    bracket is anti-Hermitian for Hermitian-paired inputs, so the result
    is real up to roundoff.  The imaginary residue is asserted small.
    """
    _check_same_grid(rho_c, rho_tar)
    m = _mu_full(_as_mu_matrix(mu_matrix, rho_c.n), rho_c.n)
    fc = rho_c.full()
    ft = rho_tar.full()
    bracket = np.trace(fc @ m @ ft) - np.trace(ft @ m @ fc)
    eps = -1j * k_value * bracket
    scale = max(1.0, abs(eps.real))
    if abs(eps.imag) > 1e-12 * scale:
        raise ValueError(
            f"tracking field has imaginary residue {eps.imag:.3e}; "
            "inputs are not Hermitian-paired"
        )
    return float(eps.real)


def _tr3(a: np.ndarray, mu_diag: np.ndarray | None, mu: np.ndarray | None, b: np.ndarray) -> complex:
    """Tr(a . mu . b) with a diagonal fast path."""
    if mu_diag is not None:
        return complex(np.einsum("ij,j,ji->", a, mu_diag, b))
    return complex(np.einsum("ij,jk,ki->", a, mu, b, optimize=True))


def tracking_field_blocks(
    rho_c: BlockDensity,
    rho_tar: BlockDensity,
    mu_matrix: np.ndarray,
    k_value: float,
) -> float:
    """Tracking field from the eight coordinate partial traces.

    Each positive term is paired with the (conjugate) partner it cancels
    against when rho_C == rho_tar, so the field vanishes identically at
    equality.  A 1-D mu_matrix is interpreted as the diagonal of the
    dipole matrix.
    """
    _check_same_grid(rho_c, rho_tar)
    mu = np.asarray(mu_matrix)
    if mu.ndim == 1:
        mu_diag, mu_m = np.asarray(mu), None
    else:
        d = np.diagonal(mu)
        mu_diag = d if not np.count_nonzero(mu - np.diag(d)) else None
        mu_m = mu
    c, t = rho_c, rho_tar
    pairs = (
        (_tr3(c.rho_ge, mu_diag, mu_m, t.rho_g), _tr3(t.rho_ge, mu_diag, mu_m, c.rho_g)),
        (_tr3(c.rho_e, mu_diag, mu_m, t.rho_ge), _tr3(t.rho_e, mu_diag, mu_m, c.rho_ge)),
        (_tr3(c.rho_g, mu_diag, mu_m, t.rho_eg), _tr3(t.rho_g, mu_diag, mu_m, c.rho_eg)),
        (_tr3(c.rho_eg, mu_diag, mu_m, t.rho_e), _tr3(t.rho_eg, mu_diag, mu_m, c.rho_e)),
    )
    total = sum(plus - minus for plus, minus in pairs)
    return float(k_value * total.imag)


def gated_field(t: float, raw_field: float, schedule: ControlSchedule) -> float:
    """Zero inside any off window or when the schedule is disabled."""
    if not schedule.enabled:
        return 0.0
    for t0, t1 in schedule.off_windows:
        if t0 <= t < t1:
            return 0.0
    return raw_field
