"""Result persistence: delimited tables, a metadata block, and figures.

Emission is deterministic: the same record always produces byte-identical
files (no timestamps), and numbers carry 12 significant digits.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from . import __version__
from .config import emit_config
from .observables import TrajectoryRecord, field_spectrum
from .harness import SweepResult

_FMT = "%.12g"

_TRACK_STYLE = {
    "target": dict(color="tab:red", label="target"),
    "system": dict(color="tab:green", label="uncontrolled"),
    "controlled": dict(color="black", label="controlled"),
}


def _format_row(values) -> str:
    return ",".join(_FMT % v for v in values)


def record_spectrum(record: TrajectoryRecord) -> tuple[np.ndarray, np.ndarray]:
    """Spectrum of the synthesized field over the tracking stage."""
    sl = record.control_slice()
    times = record.times[sl]
    if times.size < 16:
        raise ValueError("record is too short for a spectrum")
    dt = float(times[1] - times[0])
    return field_spectrum(record.field[sl], dt)


def emit_record(record: TrajectoryRecord, destination) -> list[Path]:
    """Write trajectory.csv, spectrum.csv and meta into destination."""
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    paths = []

    trajectory = dest / "trajectory.csv"
    table = record.column_table()
    lines = [",".join(name for name, _ in table)]
    data = np.column_stack([col for _, col in table])
    lines.extend(_format_row(row) for row in data)
    trajectory.write_text("\n".join(lines) + "\n")
    paths.append(trajectory)

    spectrum = dest / "spectrum.csv"
    energies, magnitudes = record_spectrum(record)
    spec_lines = ["energy_eV,magnitude"]
    spec_lines.extend(
        _format_row((e, m)) for e, m in zip(energies, magnitudes)
    )
    spectrum.write_text("\n".join(spec_lines) + "\n")
    paths.append(spectrum)

    meta = dest / "meta"
    meta.write_text(_meta_text(record))
    paths.append(meta)
    return paths


def _meta_text(record: TrajectoryRecord) -> str:
    md = record.metadata
    lines = ["[meta]", f"version = {__version__}"]
    for key in (
        "k_value",
        "k_auto_calibrated",
        "omega_carrier_ev",
        "pump_t_max_fs",
        "t_branch_fs",
        "t_final_fs",
        "dt_fs",
        "record_stride",
        "gamma_per_fs",
        "post_pump_excited_population",
    ):
        if key in md:
            value = md[key]
            text = _FMT % value if isinstance(value, float) else str(value)
            lines.append(f"{key} = {text}")
    if md.get("off_windows_fs"):
        windows = ",".join(f"{a:g}:{b:g}" for a, b in md["off_windows_fs"])
        lines.append(f"off_windows_fs = {windows}")
    lines.append("")
    lines.append("# configuration echo")
    config = md.get("config")
    if config is not None:
        lines.append(emit_config(config).rstrip())
    lines.append("")
    return "\n".join(lines)


def _new_axes(title: str, xlabel: str, ylabel: str):
    fig = Figure(figsize=(7.0, 4.2), dpi=140)
    FigureCanvasAgg(fig)
    ax = fig.add_subplot()
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return fig, ax


def render_figures(record: TrajectoryRecord, destination) -> list[Path]:
    """Render the standard report figures next to the delimited output."""
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    t = record.times
    paths = []

    fig, ax = _new_axes("Excited-state population", "t (fs)", "Tr rho_e")
    for track in ("target", "system", "controlled"):
        ax.plot(t, getattr(record, f"pop_e_{track}"), lw=1.0, **_TRACK_STYLE[track])
    _mark_windows(ax, record)
    ax.legend(loc="best", fontsize=8)
    paths.append(_save(fig, dest / "populations.png"))

    fig = Figure(figsize=(7.0, 5.6), dpi=140)
    FigureCanvasAgg(fig)
    ax1, ax2 = fig.subplots(2, 1, sharex=True)
    for track in ("target", "system", "controlled"):
        ax1.plot(t, getattr(record, f"purity_{track}"), lw=1.0, **_TRACK_STYLE[track])
    ax2.plot(t, record.j_system, lw=1.0, ls="--", color="tab:green", label="J system")
    ax2.plot(t, record.j_controlled, lw=1.0, ls="--", color="black", label="J controlled")
    ax1.set_ylabel("purity Tr rho^2")
    ax2.set_ylabel("overlap with target")
    ax2.set_xlabel("t (fs)")
    for ax in (ax1, ax2):
        _mark_windows(ax, record)
        ax.legend(loc="best", fontsize=8)
    paths.append(_save(fig, dest / "purity_overlap.png"))

    fig, ax = _new_axes("Control field", "t (fs)", "field (eV per unit dipole)")
    sl = record.control_slice()
    ax.plot(t[sl], record.field[sl], lw=0.6, color="tab:blue")
    _mark_windows(ax, record)
    paths.append(_save(fig, dest / "field_time.png"))

    fig, ax = _new_axes("Control-field spectrum", "energy (eV)", "magnitude")
    energies, magnitudes = record_spectrum(record)
    ax.plot(energies, magnitudes, lw=0.8, color="tab:blue")
    gap = record.metadata.get("omega_carrier_ev")
    if gap:
        ax.axvline(gap, color="gray", lw=0.8, ls=":")
        ax.set_xlim(0.0, 3.0 * gap)
    paths.append(_save(fig, dest / "field_spectrum.png"))
    return paths


def _mark_windows(ax, record: TrajectoryRecord) -> None:
    for t0, t1 in record.metadata.get("off_windows_fs", ()):
        ax.axvspan(t0, t1, color="0.85", zorder=0)


def _save(fig: Figure, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path)
    return path


def emit_sweep(result: SweepResult, destination, figures: bool = True) -> list[Path]:
    """One subdirectory per cell (g<gamma>_d<delta>) plus a summary table."""
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    paths = []
    summary = ["gamma_per_fs,delta_eV,k_value,mean_J_controlled,mean_J_system,status"]
    keys = sorted(set(result.records) | set(result.errors))
    for gamma, delta in keys:
        cell_dir = dest / f"g{gamma:g}_d{delta:g}"
        record = result.records.get((gamma, delta))
        if record is None:
            message = result.errors[(gamma, delta)].replace(",", ";")
            summary.append(f"{gamma:g},{delta:g},nan,nan,nan,{message}")
            continue
        paths.extend(emit_record(record, cell_dir))
        if figures:
            paths.extend(render_figures(record, cell_dir))
        sl = record.control_slice()
        summary.append(
            _format_row(
                (
                    gamma,
                    delta,
                    record.metadata["k_value"],
                    float(np.mean(record.j_controlled[sl])),
                    float(np.mean(record.j_system[sl])),
                )
            )
            + ",ok"
        )
    summary_path = dest / "summary.csv"
    summary_path.write_text("\n".join(summary) + "\n")
    paths.append(summary_path)
    if figures and result.records:
        paths.append(_sweep_grid_figure(result, dest / "sweep_populations.png"))
    return paths


def _sweep_grid_figure(result: SweepResult, path: Path) -> Path:
    gammas = sorted({g for g, _ in result.records})
    deltas = sorted({d for _, d in result.records}, reverse=True)
    fig = Figure(figsize=(3.2 * len(gammas) + 1.0, 2.4 * len(deltas) + 0.8), dpi=140)
    FigureCanvasAgg(fig)
    axes = fig.subplots(len(deltas), len(gammas), sharex=True, squeeze=False)
    for i, delta in enumerate(deltas):
        for j, gamma in enumerate(gammas):
            ax = axes[i][j]
            record = result.records.get((gamma, delta))
            if record is None:
                ax.set_axis_off()
                continue
            for track in ("target", "system", "controlled"):
                ax.plot(
                    record.times,
                    getattr(record, f"pop_e_{track}"),
                    lw=0.8,
                    **_TRACK_STYLE[track],
                )
            ax.set_title(f"gamma={gamma:g}/fs, delta={delta:g} eV", fontsize=8)
            ax.tick_params(labelsize=7)
    axes[0][0].legend(loc="best", fontsize=7)
    return _save(fig, path)
