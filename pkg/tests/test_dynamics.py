import numpy as np
import pytest

from decotrack import (
    Generator,
    GridSpec,
    HamiltonianBlocks,
    LindbladSpec,
    VibronicModel,
    build_grid,
    build_hamiltonian,
    coherent_derivative,
    control_derivative,
    quench_dissipator,
    total_derivative,
)
from decotrack.state import BlockDensity
from decotrack.units import HBAR_EV_FS


def toy_blocks(v=0.05):
    return HamiltonianBlocks(
        h_e=np.array([[0.7]]),
        h_g=np.array([[-0.7]]),
        v_eg=np.array([[v]]),
        mu_matrix=np.array([[1.0]]),
    )


def random_state(n, rng, hermitian_pair=True):
    m = rng.normal(size=(2 * n, 2 * n)) + 1j * rng.normal(size=(2 * n, 2 * n))
    if hermitian_pair:
        m = m @ m.conj().T
        m /= np.trace(m).real
    return BlockDensity.from_full(m)


def derivative_trace(d):
    return complex(np.trace(d.rho_e) + np.trace(d.rho_g))


def test_commuting_state_has_zero_coherent_derivative():
    grid = build_grid(GridSpec(n_points=32, q_min=-8, q_max=8))
    h = build_hamiltonian(VibronicModel(v_ge=0.0), grid)
    energies, vecs = np.linalg.eigh(h.h_g)
    proj = np.outer(vecs[:, 0], vecs[:, 0].conj())
    rho = BlockDensity(
        rho_e=np.zeros((32, 32), complex),
        rho_g=proj.astype(complex),
        rho_eg=np.zeros((32, 32), complex),
        rho_ge=np.zeros((32, 32), complex),
    )
    d = coherent_derivative(h, rho)
    assert max(np.max(np.abs(b)) for b in (d.rho_e, d.rho_g, d.rho_eg, d.rho_ge)) < 1e-12


def test_single_point_toy_coherence_growth():
    h = toy_blocks()
    rho = BlockDensity.pure(psi_e=None, psi_g=np.array([1.0]))
    d = coherent_derivative(h, rho)
    assert np.isclose(d.rho_eg[0, 0], -1j * 0.05 / HBAR_EV_FS)
    # populations unchanged at first order
    assert abs(d.rho_e[0, 0]) < 1e-15
    assert abs(d.rho_g[0, 0]) < 1e-15


def test_coherent_derivative_traceless():
    rng = np.random.default_rng(7)
    grid = build_grid(GridSpec(n_points=16, q_min=-8, q_max=8))
    h = build_hamiltonian(VibronicModel(), grid)
    for _ in range(5):
        d = coherent_derivative(h, random_state(16, rng))
        assert abs(derivative_trace(d)) < 1e-14


def test_coherent_derivative_dimension_mismatch():
    h = toy_blocks()
    with pytest.raises(ValueError):
        coherent_derivative(h, BlockDensity.zero(4))


def test_quench_zero_rate_is_zero():
    rng = np.random.default_rng(3)
    d = quench_dissipator(LindbladSpec(gamma_q=0.0), random_state(8, rng))
    assert all(np.all(b == 0) for b in (d.rho_e, d.rho_g, d.rho_eg, d.rho_ge))


def test_quench_population_flow_rates():
    rng = np.random.default_rng(5)
    rho = random_state(8, rng)
    scale = 0.5 / np.trace(rho.rho_e).real
    rho = BlockDensity(
        rho_e=rho.rho_e * scale,
        rho_g=rho.rho_g,
        rho_eg=rho.rho_eg,
        rho_ge=rho.rho_ge,
    )
    d = quench_dissipator(LindbladSpec(gamma_q=0.003), rho)
    assert np.isclose(np.trace(d.rho_e).real, -0.0015)
    assert np.isclose(np.trace(d.rho_g).real, +0.0015)
    # coherences decay at half the population rate
    assert np.allclose(d.rho_eg, -0.0015 * rho.rho_eg)


def test_quench_trace_preserving():
    rng = np.random.default_rng(11)
    for _ in range(5):
        d = quench_dissipator(LindbladSpec(gamma_q=0.02), random_state(8, rng))
        assert abs(derivative_trace(d)) < 1e-14


def test_quench_rejects_negative_rate():
    with pytest.raises(ValueError):
        LindbladSpec(gamma_q=-0.001)


def test_quench_purity_decreases_on_coherence_only_input():
    # populations empty in the upper block: only the coherences decay
    rng = np.random.default_rng(13)
    n = 8
    coh = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = BlockDensity(
        rho_e=np.zeros((n, n), complex),
        rho_g=np.eye(n, dtype=complex) / n,
        rho_eg=coh,
        rho_ge=coh.conj().T,
    )
    d = quench_dissipator(LindbladSpec(gamma_q=0.01), rho)
    dp = 2 * (
        np.einsum("ij,ji->", rho.rho_e, d.rho_e)
        + np.einsum("ij,ji->", rho.rho_g, d.rho_g)
        + np.einsum("ij,ji->", d.rho_eg, rho.rho_ge).real
        + np.einsum("ij,ji->", rho.rho_eg, d.rho_ge).real
    )
    assert dp.real <= 0.0


def test_control_zero_field_zero_derivative():
    rng = np.random.default_rng(17)
    d = control_derivative(0.0, np.eye(8), random_state(8, rng))
    assert all(np.max(np.abs(b)) == 0 for b in (d.rho_e, d.rho_g, d.rho_eg, d.rho_ge))


def test_control_single_point_rate():
    rho = BlockDensity.pure(psi_e=None, psi_g=np.array([1.0]))
    d = control_derivative(0.228, np.array([[1.0]]), rho)
    assert np.isclose(abs(d.rho_eg[0, 0]), 0.228 / HBAR_EV_FS)


def test_control_traceless():
    rng = np.random.default_rng(19)
    d = control_derivative(0.3, np.eye(8), random_state(8, rng))
    assert abs(derivative_trace(d)) < 1e-14


def test_total_derivative_flag_combinations():
    rng = np.random.default_rng(23)
    grid = build_grid(GridSpec(n_points=16, q_min=-8, q_max=8))
    h = build_hamiltonian(VibronicModel(), grid)
    spec = LindbladSpec(gamma_q=0.003)
    rho = random_state(16, rng)
    coh = coherent_derivative(h, rho)

    off = total_derivative(h, spec, 0.1, rho, dissipation=False, control=False)
    assert off.max_block_diff(coh) == 0.0

    no_rate = total_derivative(h, LindbladSpec(gamma_q=0.0), 0.0, rho, dissipation=True, control=False)
    assert no_rate.max_block_diff(coh) < 1e-15

    full = total_derivative(h, spec, 0.1, rho, dissipation=True, control=True)
    explicit = coh + quench_dissipator(spec, rho) + control_derivative(0.1, h.mu_matrix, rho)
    assert full.max_block_diff(explicit) < 1e-15


def test_total_derivative_linearity():
    rng = np.random.default_rng(29)
    grid = build_grid(GridSpec(n_points=8, q_min=-8, q_max=8))
    h = build_hamiltonian(VibronicModel(), grid)
    spec = LindbladSpec(gamma_q=0.005)
    r1, r2 = random_state(8, rng), random_state(8, rng)
    a, b = 0.3, -1.2
    combo = total_derivative(h, spec, 0.07, a * r1 + b * r2)
    parts = a * total_derivative(h, spec, 0.07, r1) + b * total_derivative(h, spec, 0.07, r2)
    assert combo.max_block_diff(parts) < 1e-13


def test_derivative_hermiticity_pairing():
    rng = np.random.default_rng(31)
    grid = build_grid(GridSpec(n_points=16, q_min=-8, q_max=8))
    h = build_hamiltonian(VibronicModel(), grid)
    spec = LindbladSpec(gamma_q=0.003)
    for eps in (0.0, 0.2):
        d = total_derivative(h, spec, eps, random_state(16, rng))
        assert np.max(np.abs(d.rho_ge - d.rho_eg.conj().T)) < 1e-12
        assert np.max(np.abs(d.rho_e - d.rho_e.conj().T)) < 1e-12


def test_generator_matches_reference():
    rng = np.random.default_rng(37)
    grid = build_grid(GridSpec(n_points=16, q_min=-8, q_max=8))
    h = build_hamiltonian(VibronicModel(), grid)
    gen = Generator(h, gamma=0.003)
    assert gen.fast_path
    spec = LindbladSpec(gamma_q=0.003)
    for eps in (0.0, -0.15, 0.31):
        rho = random_state(16, rng)
        assert gen(rho, eps).max_block_diff(total_derivative(h, spec, eps, rho)) < 1e-14


def test_generator_general_fallback():
    rng = np.random.default_rng(41)
    n = 8
    base = build_hamiltonian(VibronicModel(), build_grid(GridSpec(n_points=n, q_min=-8, q_max=8)))
    coupling = rng.normal(size=(n, n))
    coupling = 0.02 * (coupling + coupling.T)
    h = HamiltonianBlocks(h_e=base.h_e, h_g=base.h_g, v_eg=coupling, mu_matrix=base.mu_matrix)
    gen = Generator(h, gamma=0.004)
    assert not gen.fast_path
    rho = random_state(n, rng)
    spec = LindbladSpec(gamma_q=0.004)
    assert gen(rho, 0.1).max_block_diff(total_derivative(h, spec, 0.1, rho)) < 1e-14
