import numpy as np
import pytest

from decotrack import (
    Generator,
    GridSpec,
    HamiltonianBlocks,
    PropagationError,
    PropagatorConfig,
    VibronicModel,
    build_grid,
    build_hamiltonian,
    convergence_report,
    ground_eigenpair,
    ground_vibronic_state,
    propagate,
    step,
    total_energy,
)
from decotrack.observables import excited_population, purity
from decotrack.state import BlockDensity
from decotrack.units import HBAR_EV_FS


def grid_system(n=64, v_ge=0.05, gamma=0.0):
    grid = build_grid(GridSpec(n_points=n, q_min=-8, q_max=8))
    h = build_hamiltonian(VibronicModel(v_ge=v_ge), grid)
    return grid, h, Generator(h, gamma=gamma)


def test_config_validation():
    with pytest.raises(ValueError):
        PropagatorConfig(dt=0.0)
    with pytest.raises(ValueError):
        PropagatorConfig(tolerance=-1.0)
    with pytest.raises(ValueError):
        PropagatorConfig(scheme="chebyshev")


def test_stationary_ground_state():
    _, h, gen = grid_system(v_ge=0.0)
    rho = ground_vibronic_state(h.h_g)
    out = propagate(rho, None, 0.0, 100.0, PropagatorConfig(dt=0.1), lambda r, e: gen(r, e))
    assert abs(excited_population(out)) < 1e-8
    assert abs(purity(out) - 1.0) < 1e-8


def test_two_level_rabi_oracle():
    # closed-form two-level populations with detuning
    h = HamiltonianBlocks(
        h_e=np.array([[0.7]]),
        h_g=np.array([[-0.7]]),
        v_eg=np.array([[0.05]]),
        mu_matrix=np.array([[1.0]]),
    )
    gen = Generator(h, gamma=0.0)
    rho = BlockDensity.pure(psi_e=None, psi_g=np.array([1.0]))
    seen = []
    propagate(
        rho,
        None,
        0.0,
        100.0,
        PropagatorConfig(dt=0.005),
        lambda r, e: gen(r, e),
        observers=[lambda t, r, e: seen.append((t, excited_population(r)))],
    )
    v, half_gap = 0.05, 0.7
    omega = np.sqrt(v**2 + half_gap**2) / HBAR_EV_FS
    amplitude = v**2 / (v**2 + half_gap**2)
    err = max(abs(p - amplitude * np.sin(omega * t) ** 2) for t, p in seen)
    assert err < 1e-6


def test_decoupled_quench_exponential_oracle():
    # with no interstate coupling the excited trace decays exactly exponentially
    _, h, gen = grid_system(v_ge=0.0, gamma=0.003)
    _, phi_g = ground_eigenpair(h.h_g)
    _, phi_e = ground_eigenpair(h.h_e)
    n = phi_g.size
    rho = BlockDensity(
        rho_e=0.5 * np.outer(phi_e, phi_e.conj()),
        rho_g=0.5 * np.outer(phi_g, phi_g.conj()),
        rho_eg=np.zeros((n, n), complex),
        rho_ge=np.zeros((n, n), complex),
    )
    out = propagate(rho, None, 0.0, 100.0, PropagatorConfig(dt=0.1), lambda r, e: gen(r, e))
    assert abs(excited_population(out) - 0.5 * np.exp(-0.3)) < 1e-5


def test_zero_duration_returns_input():
    _, h, gen = grid_system(n=16)
    rho = ground_vibronic_state(h.h_g)
    out = propagate(rho, None, 5.0, 5.0, PropagatorConfig(dt=0.01), lambda r, e: gen(r, e))
    assert out == rho
    assert out is not rho


def test_propagation_composability():
    _, h, gen = grid_system(n=32)
    rho = ground_vibronic_state(h.h_g)
    cfg = PropagatorConfig(dt=0.01)
    mid = propagate(rho, None, 0.0, 50.0, cfg, lambda r, e: gen(r, e))
    two_leg = propagate(mid, None, 50.0, 100.0, cfg, lambda r, e: gen(r, e))
    one_leg = propagate(rho, None, 0.0, 100.0, cfg, lambda r, e: gen(r, e))
    assert two_leg.max_block_diff(one_leg) < 1e-12


def test_propagation_determinism():
    _, h, gen = grid_system(n=16, gamma=0.002)
    rho = ground_vibronic_state(h.h_g)
    cfg = PropagatorConfig(dt=0.05)
    a = propagate(rho, None, 0.0, 20.0, cfg, lambda r, e: gen(r, e))
    b = propagate(rho, None, 0.0, 20.0, cfg, lambda r, e: gen(r, e))
    assert a == b


def test_non_integer_interval_rejected():
    _, h, gen = grid_system(n=16)
    rho = ground_vibronic_state(h.h_g)
    with pytest.raises(ValueError):
        propagate(rho, None, 0.0, 0.1234567, PropagatorConfig(dt=0.01), lambda r, e: gen(r, e))


def test_step_rejects_unstable_dt():
    # 1 fs at a 1.4 eV carrier is far outside the stability region
    _, h, gen = grid_system(n=64)
    rho = ground_vibronic_state(h.h_g)
    with pytest.raises(PropagationError):
        for _ in range(50):
            rho = step(rho, lambda r, t: gen(r, 0.0), 1.0)


def test_unitary_limit_conservation_short():
    # pumped-like superposition, free evolution: trace, purity, energy hold
    grid, h, gen = grid_system(n=32)
    _, phi_g = ground_eigenpair(h.h_g)
    psi_e = phi_g * np.sqrt(0.5)
    psi_g = phi_g * np.sqrt(0.5)
    rho = BlockDensity.pure(psi_e=psi_e, psi_g=psi_g)
    e_start = total_energy(h, rho)
    p_start = purity(rho)
    out = propagate(rho, None, 0.0, 100.0, PropagatorConfig(dt=0.005), lambda r, e: gen(r, e))
    assert abs(out.trace() - 1.0) < 1e-10
    assert abs(purity(out) - p_start) < 1e-8
    assert abs(total_energy(h, out) - e_start) < 1e-6


def test_positivity_monitored_short():
    grid, h, gen = grid_system(n=32, gamma=0.003)
    _, phi_g = ground_eigenpair(h.h_g)
    rho = BlockDensity.pure(psi_e=phi_g * np.sqrt(0.4), psi_g=phi_g * np.sqrt(0.6))
    mins = []

    def watch(t, r, e):
        if round(t / 0.05) % 100 == 0:
            mins.append(np.linalg.eigvalsh(r.full()).min())

    propagate(rho, None, 0.0, 50.0, PropagatorConfig(dt=0.05), lambda r, e: gen(r, e), observers=[watch])
    assert min(mins) > -1e-6


def test_convergence_report_fourth_order():
    # pump-driven short scenario exposes the dt^4 error cleanly
    from decotrack.control import PumpPulse, pump_field
    from decotrack.harness import resolve_pump

    grid, h, gen = grid_system(n=32, gamma=0.003)
    pump = resolve_pump(PumpPulse(), VibronicModel())
    rho0 = ground_vibronic_state(h.h_g)

    def run(dt_value):
        out = propagate(
            rho0,
            lambda t: pump_field(t, pump),
            0.0,
            48.0,
            PropagatorConfig(dt=dt_value),
            lambda r, e: gen(r, e),
            freeze_field=False,
        )
        return {"pop_e": excited_population(out), "purity": purity(out)}

    report = convergence_report(run, [0.02, 0.01, 0.005])
    rows = [r for r in report.rows if not r.flagged]
    assert len(rows) == 2
    ratio = rows[0].deltas["pop_e"] / rows[1].deltas["pop_e"]
    assert 8.0 < ratio < 32.0
    orders = report.orders()
    assert 3.0 < orders["pop_e"] < 5.0
    assert report.format_table()


def test_convergence_report_single_dt_empty():
    report = convergence_report(lambda dt: {"pop_e": 1.0}, [0.01])
    assert report.rows == []


def test_convergence_report_flags_unstable_rows():
    _, h, gen = grid_system(n=64, gamma=0.003)
    rho0 = ground_vibronic_state(h.h_g)

    def run(dt_value):
        out = propagate(rho0, None, 0.0, 40.0, PropagatorConfig(dt=dt_value), lambda r, e: gen(r, e))
        return {"pop_e": excited_population(out)}

    report = convergence_report(run, [1.0, 0.02, 0.01])
    flagged = [r for r in report.rows if r.flagged]
    assert len(flagged) == 1 and flagged[0].dt == 1.0
    assert "UNSTABLE" in report.format_table()
