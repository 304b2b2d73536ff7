"""Experiment configuration: dataclasses, text format, strict parsing.

The on-disk format is flat sectioned key = value text (INI).  All seven
sections must be present; keys are optional and default to the reference
scenario.  Unknown sections or keys are hard errors, as are unit
violations (negative rates, non-positive steps, ...).  ``auto`` marks
values resolved against the model at run time.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field

from .control import ControlSchedule, PumpPulse
from .dynamics import LindbladSpec
from .model import COUPLING_SHAPES, GridSpec, VibronicModel
from .propagator import SCHEMES, PropagatorConfig


class ConfigError(ValueError):
    """Invalid configuration text or values."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs, defaults giving the reference run."""

    model: VibronicModel = field(default_factory=VibronicModel)
    grid: GridSpec = field(default_factory=GridSpec)
    propagator: PropagatorConfig = field(default_factory=PropagatorConfig)
    pump: PumpPulse = field(default_factory=PumpPulse)
    schedule: ControlSchedule = field(default_factory=ControlSchedule)
    lindblad: LindbladSpec = field(default_factory=LindbladSpec)
    t_final: float = 600.0
    dissipation_during_pump: bool = False
    record_stride: int = 30

    def __post_init__(self) -> None:
        if self.t_final <= 0:
            raise ConfigError(f"t_final must be positive, got {self.t_final}")
        if self.record_stride < 1:
            raise ConfigError(f"record_stride must be >= 1, got {self.record_stride}")
        n = round(self.t_final / self.propagator.dt)
        if n < 1 or abs(n * self.propagator.dt - self.t_final) > 1e-9 * max(1.0, self.t_final):
            raise ConfigError(
                f"t_final={self.t_final} is not an integer number of dt={self.propagator.dt} steps"
            )


@dataclass(frozen=True)
class SweepSpec:
    """Grid of quench rates and half-gaps over a base configuration."""

    gamma_values: tuple[float, ...]
    delta_values: tuple[float, ...]
    base: ExperimentConfig

    def __post_init__(self) -> None:
        if not self.gamma_values or not self.delta_values:
            raise ConfigError("gamma_values and delta_values must be non-empty")


DEFAULT_GAMMA_VALUES = (0.0015, 0.003, 0.006)
DEFAULT_DELTA_VALUES = (0.5, 0.7, 0.9)


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


# -- text format ------------------------------------------------------

_DEFAULTS = ExperimentConfig()

#: section -> key -> (unit / allowed values, description)
SCHEMA: dict[str, dict[str, tuple[str, str]]] = {
    "grid": {
        "n_points": ("power of two >= 8", "number of coordinate samples"),
        "q_min": ("dimensionless", "left edge of the coordinate box"),
        "q_max": ("dimensionless", "right edge of the coordinate box"),
    },
    "model": {
        "omega_g": ("eV", "lower-surface vibrational quantum"),
        "omega_e": ("eV", "upper-surface vibrational quantum"),
        "delta": ("eV", "half the vertical gap between the surfaces"),
        "q_g": ("dimensionless", "lower-surface equilibrium position"),
        "q_e": ("dimensionless", "upper-surface equilibrium position"),
        "v_ge": ("eV", "interstate coupling strength"),
        "mu": ("dipole units", "transition dipole (constant)"),
        "omega_ref": ("eV or auto", "kinetic prefactor; auto = omega_g"),
        "coupling_shape": ("constant | linear", "interstate coupling profile"),
    },
    "lindblad": {
        "gamma": ("fs^-1", "quench rate of the excited surface"),
    },
    "propagator": {
        "dt": ("fs", "fixed time step"),
        "scheme": (" | ".join(SCHEMES), "stepping scheme"),
        "tolerance": ("dimensionless", "local accuracy target"),
    },
    "pump": {
        "amplitude": ("eV per unit dipole", "pump field amplitude eps0"),
        "fwhm": ("fs", "FWHM of the pump field envelope"),
        "t_peak": ("fs or auto", "pulse peak time; auto = 4 sigma"),
        "omega_carrier": ("eV or auto", "carrier energy; auto = vertical gap at Q=0"),
    },
    "schedule": {
        "k_value": ("eV / dipole^2 or auto", "tracking envelope magnitude"),
        "enabled": ("true | false", "whether the tracking field is applied"),
        "off_windows": ("fs pairs t0:t1, comma separated", "gating windows"),
    },
    "run": {
        "t_final": ("fs", "end of the run"),
        "record_stride": ("steps", "sampling stride for the record"),
        "dissipation_during_pump": ("true | false", "apply the quench during the pump stage"),
    },
}


def _fmt(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _fwhm_text(sigma: float) -> str:
    """FWHM text whose reparse (division by the width factor) reproduces
    sigma exactly; scans neighboring floats to undo the rounding."""
    from .control import _FWHM_FACTOR

    f = sigma * _FWHM_FACTOR
    candidate = f
    for _ in range(3):
        if candidate / _FWHM_FACTOR == sigma:
            return repr(float(candidate))
        candidate = math.nextafter(candidate, 0.0)
    candidate = math.nextafter(f, math.inf)
    for _ in range(3):
        if candidate / _FWHM_FACTOR == sigma:
            return repr(float(candidate))
        candidate = math.nextafter(candidate, math.inf)
    return repr(float(f))


def _config_values(config: ExperimentConfig) -> dict[str, dict[str, str]]:
    """Formatted key texts per section, in schema order."""
    c = config
    values = {
        "grid": {
            "n_points": c.grid.n_points,
            "q_min": c.grid.q_min,
            "q_max": c.grid.q_max,
        },
        "model": {
            "omega_g": c.model.omega_g,
            "omega_e": c.model.omega_e,
            "delta": c.model.delta,
            "q_g": c.model.q_g,
            "q_e": c.model.q_e,
            "v_ge": c.model.v_ge,
            "mu": c.model.mu,
            "omega_ref": c.model.omega_ref,
            "coupling_shape": c.model.coupling_shape,
        },
        "lindblad": {"gamma": c.lindblad.gamma_q},
        "propagator": {
            "dt": c.propagator.dt,
            "scheme": c.propagator.scheme,
            "tolerance": c.propagator.tolerance,
        },
        "pump": {
            "amplitude": c.pump.epsilon0,
            "fwhm": _fwhm_text(c.pump.sigma_L),
            "t_peak": c.pump.t_max,
            "omega_carrier": c.pump.omega_L,
        },
        "schedule": {
            "k_value": c.schedule.k_value,
            "enabled": c.schedule.enabled,
            "off_windows": ",".join(f"{a!r}:{b!r}" for a, b in c.schedule.off_windows),
        },
        "run": {
            "t_final": c.t_final,
            "record_stride": c.record_stride,
            "dissipation_during_pump": c.dissipation_during_pump,
        },
    }
    return {sec: {k: _fmt(v) for k, v in keys.items()} for sec, keys in values.items()}


def emit_config(config: ExperimentConfig) -> str:
    """Canonical text for a configuration; parse(emit(c)) == c."""
    out = io.StringIO()
    for section, keys in _config_values(config).items():
        out.write(f"[{section}]\n")
        for key, text in keys.items():
            out.write(f"{key} = {text}\n")
        out.write("\n")
    return out.getvalue()


class _Section:
    """One parsed section with typed, schema-checked access."""

    def __init__(self, name: str, raw: dict[str, str]):
        self.name = name
        self.raw = raw

    def _get(self, key: str) -> str | None:
        return self.raw.get(key)

    def number(self, key: str, default: float, allow_auto: bool = False) -> float | None:
        text = self._get(key)
        if text is None:
            return default
        if allow_auto and text.strip().lower() == "auto":
            return None
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"[{self.name}] {key}: not a number: {text!r}") from exc

    def integer(self, key: str, default: int) -> int:
        text = self._get(key)
        if text is None:
            return default
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"[{self.name}] {key}: not an integer: {text!r}") from exc

    def boolean(self, key: str, default: bool) -> bool:
        text = self._get(key)
        if text is None:
            return default
        lowered = text.strip().lower()
        if lowered in ("true", "yes", "on", "1"):
            return True
        if lowered in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"[{self.name}] {key}: not a boolean: {text!r}")

    def choice(self, key: str, default: str, allowed: tuple[str, ...]) -> str:
        text = self._get(key)
        if text is None:
            return default
        value = text.strip()
        if value not in allowed:
            raise ConfigError(f"[{self.name}] {key}: must be one of {allowed}, got {value!r}")
        return value

    def windows(self, key: str) -> tuple[tuple[float, float], ...]:
        text = self._get(key)
        if text is None or not text.strip():
            return ()
        out = []
        for chunk in text.split(","):
            parts = chunk.split(":")
            if len(parts) != 2:
                raise ConfigError(f"[{self.name}] {key}: expected t0:t1 pairs, got {chunk!r}")
            try:
                out.append((float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise ConfigError(f"[{self.name}] {key}: not numeric: {chunk!r}") from exc
        return tuple(out)


def parse_config(text: str) -> ExperimentConfig:
    """Parse configuration text; unknown sections or keys are hard errors."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    seen = set(parser.sections())
    expected = set(SCHEMA)
    unknown_sections = seen - expected
    if unknown_sections:
        raise ConfigError(f"unknown sections: {sorted(unknown_sections)}")
    missing = expected - seen
    if missing:
        raise ConfigError(f"missing required sections: {sorted(missing)}")
    sections: dict[str, _Section] = {}
    for name in SCHEMA:
        raw = dict(parser.items(name))
        unknown_keys = set(raw) - set(SCHEMA[name])
        if unknown_keys:
            raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown_keys)}")
        sections[name] = _Section(name, raw)

    d = _DEFAULTS
    try:
        grid = GridSpec(
            n_points=sections["grid"].integer("n_points", d.grid.n_points),
            q_min=sections["grid"].number("q_min", d.grid.q_min),
            q_max=sections["grid"].number("q_max", d.grid.q_max),
        )
        model = VibronicModel(
            omega_g=sections["model"].number("omega_g", d.model.omega_g),
            omega_e=sections["model"].number("omega_e", d.model.omega_e),
            delta=sections["model"].number("delta", d.model.delta),
            q_g=sections["model"].number("q_g", d.model.q_g),
            q_e=sections["model"].number("q_e", d.model.q_e),
            v_ge=sections["model"].number("v_ge", d.model.v_ge),
            mu=sections["model"].number("mu", d.model.mu),
            omega_ref=sections["model"].number("omega_ref", None, allow_auto=True),
            coupling_shape=sections["model"].choice(
                "coupling_shape", d.model.coupling_shape, COUPLING_SHAPES
            ),
        )
        gamma = sections["lindblad"].number("gamma", d.lindblad.gamma_q)
        if gamma is None or gamma < 0:
            raise ConfigError(f"[lindblad] gamma: must be a non-negative rate, got {gamma}")
        lindblad = LindbladSpec(gamma_q=gamma)
        prop = PropagatorConfig(
            dt=sections["propagator"].number("dt", d.propagator.dt),
            scheme=sections["propagator"].choice("scheme", d.propagator.scheme, SCHEMES),
            tolerance=sections["propagator"].number("tolerance", d.propagator.tolerance),
        )
        pump = PumpPulse.from_fwhm(
            fwhm=sections["pump"].number("fwhm", d.pump.fwhm),
            epsilon0=sections["pump"].number("amplitude", d.pump.epsilon0),
            t_max=sections["pump"].number("t_peak", None, allow_auto=True),
            omega_L=sections["pump"].number("omega_carrier", None, allow_auto=True),
        )
        schedule = ControlSchedule(
            k_value=sections["schedule"].number("k_value", None, allow_auto=True),
            enabled=sections["schedule"].boolean("enabled", d.schedule.enabled),
            off_windows=sections["schedule"].windows("off_windows"),
        )
        return ExperimentConfig(
            model=model,
            grid=grid,
            propagator=prop,
            pump=pump,
            schedule=schedule,
            lindblad=lindblad,
            t_final=sections["run"].number("t_final", d.t_final),
            record_stride=sections["run"].integer("record_stride", d.record_stride),
            dissipation_during_pump=sections["run"].boolean(
                "dissipation_during_pump", d.dissipation_during_pump
            ),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_documentation() -> str:
    """Key-by-key table of the format: units and defaults, for the docs."""
    defaults = _config_values(_DEFAULTS)
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (unit, desc) in keys.items():
            shown = defaults[section][key] or "(empty)"
            lines.append(f"  {key} (unit: {unit}; default: {shown}) - {desc}")
        lines.append("")
    return "\n".join(lines)
