"""End-to-end experiments: pump stage, three-track co-propagation, sweeps.

One experiment runs in two phases on a single time ladder t_i = i dt:

1. Pump stage.  The ground vibronic state is driven by the Gaussian
   pump (dissipation off unless requested), producing one common
   post-pump state.
2. Tracking stage.  Three copies branch and advance in lockstep:
   TARGET evolves freely, SYSTEM adds the quench channel, CONTROLLED
   adds the quench channel plus the tracking field, which is synthesized
   from (rho_C, rho_tar) at each step start and held for that step.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field, replace
import numpy as np

from . import observables as obs
from .config import ConfigError, ExperimentConfig, SweepSpec
from .control import PumpPulse, gated_field, pump_field, tracking_field_blocks
from .dynamics import Generator, LindbladSpec, control_derivative
from .model import Grid, HamiltonianBlocks, build_grid, build_hamiltonian, ground_vibronic_state
from .propagator import PropagationError, step
from .state import BlockDensity

#: Width of the probe window (fs) used to auto-calibrate the tracking envelope.
K_CALIBRATION_WINDOW_FS = 5.0

#: Auto-calibration target: first tracking response scaled to this fraction
#: of the pump amplitude.
K_CALIBRATION_FRACTION = 0.1


def resolve_pump(pump: PumpPulse, model) -> PumpPulse:
    """Fill in auto fields: carrier = vertical gap at Q = 0, peak at 4 sigma."""
    t_max = pump.t_max if pump.t_max is not None else 4.0 * pump.sigma_L
    omega = pump.omega_L if pump.omega_L is not None else model.vertical_gap(0.0)
    return replace(pump, t_max=t_max, omega_L=omega)


def pump_stage_end(pump: PumpPulse) -> float:
    """End of the pump stage: peak time plus four envelope widths."""
    if pump.t_max is None:
        raise ValueError("pump pulse must be resolved first")
    return pump.t_max + 4.0 * pump.sigma_L


@dataclass
class System:
    """Built artifacts shared by every stage of one experiment."""

    grid: Grid
    blocks: HamiltonianBlocks
    initial: BlockDensity
    mu_diag: np.ndarray | None


def build_system(config: ExperimentConfig) -> System:
    grid = build_grid(config.grid)
    blocks = build_hamiltonian(config.model, grid)
    initial = ground_vibronic_state(blocks.h_g)
    d = np.diagonal(blocks.mu_matrix)
    mu_diag = d.real.copy() if not np.count_nonzero(blocks.mu_matrix - np.diag(d)) else None
    return System(grid=grid, blocks=blocks, initial=initial, mu_diag=mu_diag)


def _mu_for_tracking(system: System):
    return system.mu_diag if system.mu_diag is not None else system.blocks.mu_matrix


def calibrate_k(
    system: System,
    branch_state: BlockDensity,
    gamma: float,
    dt: float,
    epsilon0: float,
    window_fs: float = K_CALIBRATION_WINDOW_FS,
) -> float:
    """Auto-calibrate the tracking envelope K.

    Probes the uncontrolled divergence between the free and dissipative
    tracks over a short fixed window and scales K so that the first
    tracking field reaches K_CALIBRATION_FRACTION of the pump amplitude.
    The window is a fixed physical time, so the result does not depend
    on dt.
    """
    free = Generator(system.blocks, gamma=0.0)
    damped = Generator(system.blocks, gamma=gamma)
    mu = _mu_for_tracking(system)
    a = branch_state.copy()
    b = branch_state.copy()
    n_probe = max(1, round(window_fs / dt))
    peak = 0.0
    for _ in range(n_probe):
        a = step(a, lambda r, _t: free(r), dt)
        b = step(b, lambda r, _t: damped(r), dt)
        peak = max(peak, abs(tracking_field_blocks(b, a, mu, 1.0)))
    if peak < 1e-30:
        return 0.0
    return K_CALIBRATION_FRACTION * epsilon0 / peak


class _Recorder:
    """Accumulates the sampled observables row by row."""

    def __init__(self) -> None:
        self.rows: list[list[float]] = []

    def add(
        self,
        t: float,
        target: BlockDensity,
        system: BlockDensity,
        controlled: BlockDensity,
        eps: float,
        dj_control: float,
    ) -> None:
        p_tar = obs.purity(target)
        p_sys = obs.purity(system)
        p_con = obs.purity(controlled)
        j_sys = obs.overlap(system, target)
        j_con = obs.overlap(controlled, target)
        norm = np.sqrt(max(p_con * p_tar, 1e-300))
        self.rows.append(
            [
                t,
                obs.excited_population(target),
                obs.excited_population(system),
                obs.excited_population(controlled),
                p_tar,
                p_sys,
                p_con,
                j_sys,
                j_con,
                eps,
                j_con / norm,
                dj_control,
            ]
        )

    def record(self, metadata: dict, final_states: dict) -> obs.TrajectoryRecord:
        table = np.asarray(self.rows, dtype=float).T
        return obs.TrajectoryRecord(
            times=table[0],
            pop_e_target=table[1],
            pop_e_system=table[2],
            pop_e_controlled=table[3],
            purity_target=table[4],
            purity_system=table[5],
            purity_controlled=table[6],
            j_system=table[7],
            j_controlled=table[8],
            field=table[9],
            j_controlled_norm=table[10],
            dj_control=table[11],
            metadata=metadata,
            final_states=final_states,
        )


def _overlap_rate_from_control(
    eps: float, mu_matrix: np.ndarray, controlled: BlockDensity, target: BlockDensity
) -> float:
    """Control-generator contribution to dJ/dt, via the generator itself."""
    if eps == 0.0:
        return 0.0
    d = control_derivative(eps, mu_matrix, controlled)
    val = (
        np.einsum("ij,ji->", d.rho_e, target.rho_e)
        + np.einsum("ij,ji->", d.rho_g, target.rho_g)
        + np.einsum("ij,ji->", d.rho_eg, target.rho_ge)
        + np.einsum("ij,ji->", d.rho_ge, target.rho_eg)
    )
    return float(val.real)


def _real_diag(m: np.ndarray) -> np.ndarray | None:
    d = np.diagonal(m)
    if np.count_nonzero(m - np.diag(d)):
        return None
    return d.real


class _FusedTrackingLoop:
    """Lockstep stage on the buffered triple engine (diagonal couplings)."""

    def __init__(self, system: System, config: ExperimentConfig, branch: BlockDensity, k: float):
        from .engine import TripleTracker

        self._tracker = TripleTracker(
            system.blocks, config.lindblad.gamma_q, branch, config.propagator.dt
        )
        self._mu = _mu_for_tracking(system)
        self._mu_matrix = system.blocks.mu_matrix
        self._schedule = config.schedule
        self._k = k

    def synthesize(self, t: float) -> float:
        raw = tracking_field_blocks(
            self._tracker.view("controlled"), self._tracker.view("target"), self._mu, self._k
        )
        return gated_field(t, raw, self._schedule)

    def states(self):
        return (
            self._tracker.view("target"),
            self._tracker.view("system"),
            self._tracker.view("controlled"),
        )

    def overlap_rate(self, eps: float) -> float:
        return _overlap_rate_from_control(
            eps, self._mu_matrix, self._tracker.view("controlled"), self._tracker.view("target")
        )

    def advance(self, eps: float, t: float) -> None:
        self._tracker.step(eps, t)


class _GenericTrackingLoop:
    """Per-track stepping for non-diagonal couplings (reference path)."""

    def __init__(self, system, config, branch, k, gen_free, gen_damped):
        self._target = branch.copy()
        self._system = branch.copy()
        self._controlled = branch.copy()
        self._gen_free = gen_free
        self._gen_damped = gen_damped
        self._dt = config.propagator.dt
        self._mu = _mu_for_tracking(system)
        self._mu_matrix = system.blocks.mu_matrix
        self._schedule = config.schedule
        self._k = k

    def synthesize(self, t: float) -> float:
        raw = tracking_field_blocks(self._controlled, self._target, self._mu, self._k)
        return gated_field(t, raw, self._schedule)

    def states(self):
        return (self._target, self._system, self._controlled)

    def overlap_rate(self, eps: float) -> float:
        return _overlap_rate_from_control(eps, self._mu_matrix, self._controlled, self._target)

    def advance(self, eps: float, t: float) -> None:
        for name, attr, gen, field_value in (
            ("target", "_target", self._gen_free, 0.0),
            ("system", "_system", self._gen_damped, 0.0),
            ("controlled", "_controlled", self._gen_damped, eps),
        ):
            try:
                new = step(
                    getattr(self, attr),
                    lambda r, _ts, g=gen, e=field_value: g(r, e),
                    self._dt,
                    t=t,
                )
            except PropagationError as exc:
                raise PropagationError(str(exc), track=name, time=t) from exc
            setattr(self, attr, new)


def run_experiment(config: ExperimentConfig) -> obs.TrajectoryRecord:
    """Run the pump stage and the three-track tracking stage.

    Records every record_stride steps (always including the first and
    last sample).  Any step failure aborts with the offending track and
    time attached to the raised PropagationError.
    """
    dt = config.propagator.dt
    system = build_system(config)
    pump = resolve_pump(config.pump, config.model)
    t_pump_end = pump_stage_end(pump)
    n_pump = int(np.ceil(t_pump_end / dt - 1e-9))
    n_total = round(config.t_final / dt)
    if n_total <= n_pump:
        raise ConfigError(
            f"t_final={config.t_final} fs must exceed the pump stage ({n_pump * dt:.2f} fs)"
        )
    gamma = config.lindblad.gamma_q
    stride = config.record_stride
    mu = _mu_for_tracking(system)

    gen_pump = Generator(system.blocks, gamma=gamma if config.dissipation_during_pump else 0.0)
    gen_free = Generator(system.blocks, gamma=0.0)
    gen_damped = Generator(system.blocks, gamma=gamma)

    recorder = _Recorder()
    rho = system.initial.copy()

    def record_common(i: int, eps: float) -> None:
        recorder.add(i * dt, rho, rho, rho, eps, 0.0)

    # Pump stage: one common state; the drive is resolved at stage times.
    record_common(0, pump_field(0.0, pump))
    for i in range(n_pump):
        t = i * dt
        try:
            rho = step(rho, lambda r, ts: gen_pump(r, pump_field(ts, pump)), dt, t=t)
        except PropagationError as exc:
            raise PropagationError(str(exc), track="pump", time=t) from exc
        # the branch-time sample belongs to the tracking loop
        if (i + 1) % stride == 0 and (i + 1) < n_pump:
            record_common(i + 1, pump_field((i + 1) * dt, pump))

    # Branch and calibrate the envelope.
    if config.schedule.k_value is not None:
        k_value = config.schedule.k_value
    else:
        k_value = calibrate_k(system, rho, gamma, dt, pump.epsilon0)

    t_branch = n_pump * dt
    post_pump_pop = obs.excited_population(rho)

    # Tracking stage: three tracks in lockstep, field frozen per step.
    if system.mu_diag is not None and _real_diag(system.blocks.v_eg) is not None:
        runner = _FusedTrackingLoop(system, config, rho, k_value)
    else:
        runner = _GenericTrackingLoop(system, config, rho, k_value, gen_free, gen_damped)
    for i in range(n_pump, n_total):
        t = i * dt
        eps = runner.synthesize(t)
        if i % stride == 0:
            recorder.add(t, *runner.states(), eps, runner.overlap_rate(eps))
        runner.advance(eps, t)

    t_end = n_total * dt
    eps_end = runner.synthesize(t_end)
    recorder.add(t_end, *runner.states(), eps_end, runner.overlap_rate(eps_end))
    target, sys_track, controlled = (s.copy() for s in runner.states())

    metadata = {
        "k_value": k_value,
        "k_auto_calibrated": config.schedule.k_value is None,
        "omega_carrier_ev": pump.omega_L,
        "pump_t_max_fs": pump.t_max,
        "t_branch_fs": t_branch,
        "t_final_fs": t_end,
        "dt_fs": dt,
        "record_stride": stride,
        "gamma_per_fs": gamma,
        "post_pump_excited_population": post_pump_pop,
        "off_windows_fs": list(config.schedule.off_windows),
        "config": config,
    }
    return recorder.record(
        metadata,
        {"target": target, "system": sys_track, "controlled": controlled},
    )


def run_onoff(config: ExperimentConfig, off_window: tuple[float, float]) -> obs.TrajectoryRecord:
    """Run with the tracking field gated off inside off_window (fs)."""
    t0, t1 = off_window
    if t1 > t0:
        pump = resolve_pump(config.pump, config.model)
        if t0 < pump_stage_end(pump) or t1 > config.t_final:
            raise ConfigError(
                f"off window ({t0}, {t1}) must lie between the pump end and t_final"
            )
        windows = config.schedule.off_windows + ((t0, t1),)
        windows = tuple(sorted(windows))
    else:
        windows = config.schedule.off_windows
    gated = replace(config, schedule=replace(config.schedule, off_windows=windows))
    record = run_experiment(gated)
    record.metadata["onoff_window_fs"] = list(off_window)
    return record


@dataclass
class SweepResult:
    """Records keyed by (gamma, delta); failed cells isolated in errors."""

    records: dict[tuple[float, float], obs.TrajectoryRecord] = field(default_factory=dict)
    errors: dict[tuple[float, float], str] = field(default_factory=dict)

    def cell(self, gamma: float, delta: float) -> obs.TrajectoryRecord:
        return self.records[(gamma, delta)]


def _sweep_cell_config(base: ExperimentConfig, gamma: float, delta: float) -> ExperimentConfig:
    # Carrier retunes to each cell's own gap (omega_L forced back to auto).
    return replace(
        base,
        lindblad=LindbladSpec(gamma_q=gamma),
        model=replace(base.model, delta=delta),
        pump=replace(base.pump, omega_L=None),
    )


def _run_cell(args: tuple[ExperimentConfig, float, float]):
    base, gamma, delta = args
    try:
        return (gamma, delta), run_experiment(_sweep_cell_config(base, gamma, delta)), None
    except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
        return (gamma, delta), None, f"{type(exc).__name__}: {exc}"


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Run the |gamma| x |delta| grid of independent experiments.

    Cells are pure functions of their configs, so results do not depend
    on execution order or on the degree of parallelism.
    """
    cells = [
        (spec.base, gamma, delta)
        for gamma in spec.gamma_values
        for delta in spec.delta_values
    ]
    result = SweepResult()
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_cell, cells))
    else:
        outcomes = [_run_cell(cell) for cell in cells]
    for key, record, error in outcomes:
        if error is None:
            result.records[key] = record
        else:
            result.errors[key] = error
    return result
