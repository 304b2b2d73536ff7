"""decotrack: open-quantum-system simulator with tracking decoherence control.

A two-surface vibronic system on a 1-D Fourier grid is pumped into a
coherent superposition; three density operators then co-propagate: a
free reference, a dissipative uncontrolled copy, and a dissipative
controlled copy driven by a feedback field synthesized each step to keep
the controlled state on the reference trajectory.
"""

__version__ = "0.1.0"

from .config import (
    ConfigError,
    ExperimentConfig,
    SweepSpec,
    config_documentation,
    default_config,
    emit_config,
    parse_config,
)
from .control import (
    ControlSchedule,
    PumpPulse,
    gated_field,
    pump_field,
    tracking_field_blocks,
    tracking_field_general,
)
from .dynamics import (
    Generator,
    LindbladSpec,
    coherent_derivative,
    control_derivative,
    quench_dissipator,
    total_derivative,
)
from .harness import (
    SweepResult,
    build_system,
    calibrate_k,
    resolve_pump,
    run_experiment,
    run_onoff,
    run_sweep,
)
from .model import (
    Grid,
    GridSpec,
    HamiltonianBlocks,
    VibronicModel,
    build_grid,
    build_hamiltonian,
    build_kinetic,
    build_potentials,
    ground_eigenpair,
    ground_vibronic_state,
)
from .observables import (
    TrajectoryRecord,
    excited_population,
    field_spectrum,
    overlap,
    purity,
    total_energy,
)
from .propagator import (
    ConvergenceReport,
    PropagationError,
    PropagatorConfig,
    convergence_report,
    propagate,
    step,
)
from .report import emit_record, emit_sweep, render_figures
from .state import BlockDensity
from .units import HBAR_EV_FS

__all__ = [
    "BlockDensity",
    "ConfigError",
    "ControlSchedule",
    "ConvergenceReport",
    "ExperimentConfig",
    "Generator",
    "Grid",
    "GridSpec",
    "HBAR_EV_FS",
    "HamiltonianBlocks",
    "LindbladSpec",
    "PropagationError",
    "PropagatorConfig",
    "PumpPulse",
    "SweepResult",
    "SweepSpec",
    "TrajectoryRecord",
    "VibronicModel",
    "build_grid",
    "build_hamiltonian",
    "build_kinetic",
    "build_potentials",
    "build_system",
    "calibrate_k",
    "coherent_derivative",
    "config_documentation",
    "control_derivative",
    "convergence_report",
    "default_config",
    "emit_config",
    "emit_record",
    "emit_sweep",
    "excited_population",
    "field_spectrum",
    "gated_field",
    "ground_eigenpair",
    "ground_vibronic_state",
    "overlap",
    "parse_config",
    "propagate",
    "pump_field",
    "purity",
    "quench_dissipator",
    "render_figures",
    "resolve_pump",
    "run_experiment",
    "run_onoff",
    "run_sweep",
    "step",
    "total_derivative",
    "total_energy",
    "tracking_field_blocks",
    "tracking_field_general",
]
