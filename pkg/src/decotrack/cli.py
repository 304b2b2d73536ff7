"""Command-line interface.

Subcommands: relax, run, onoff, sweep, spectrum.  Exit codes: 0 on
success, 2 on configuration errors, 3 on numerical failure (the failing
track and time go to stderr).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import (
    DEFAULT_DELTA_VALUES,
    DEFAULT_GAMMA_VALUES,
    ConfigError,
    SweepSpec,
    default_config,
    parse_config,
)
from .harness import build_system, run_experiment, run_onoff, run_sweep
from .model import ground_eigenpair
from .observables import field_spectrum
from .propagator import PropagationError
from .report import emit_record, emit_sweep, render_figures

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decotrack",
        description="Open-quantum-system simulator with tracking decoherence control",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    relax = sub.add_parser("relax", help="print ground-state energy and wavefunction moments")
    relax.add_argument("config", nargs="?", help="config file (defaults otherwise)")

    for name, extra in (("run", None), ("onoff", "window")):
        cmd = sub.add_parser(name, help=f"{name} experiment from a config file")
        cmd.add_argument("config", help="config file")
        cmd.add_argument("-o", "--outdir", default="results", help="output directory")
        cmd.add_argument("--no-figures", action="store_true", help="skip figure rendering")
        if extra == "window":
            cmd.add_argument(
                "--window", required=True, metavar="t0,t1", help="off window in fs, e.g. 300,400"
            )

    sweep = sub.add_parser("sweep", help="quench-rate x gap sweep")
    sweep.add_argument("config", help="base config file")
    sweep.add_argument("--gammas", default=None, help="comma list of quench rates (fs^-1)")
    sweep.add_argument("--deltas", default=None, help="comma list of half gaps (eV)")
    sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sweep.add_argument("-o", "--outdir", default="results", help="output directory")
    sweep.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    spectrum = sub.add_parser("spectrum", help="field spectrum of an emitted trajectory.csv")
    spectrum.add_argument("trajectory", help="path to trajectory.csv")
    spectrum.add_argument("-o", "--outdir", default=None, help="output directory (default: alongside input)")
    spectrum.add_argument("--start-time", type=float, default=0.0, help="first time (fs) to include")
    spectrum.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    return parser


def _load_config(path: str | None):
    if path is None:
        return default_config()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config(text)


def _parse_floats(text: str, what: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"invalid {what} list: {text!r}") from exc


def _cmd_relax(args) -> int:
    config = _load_config(args.config)
    system = build_system(config)
    energy, phi = ground_eigenpair(system.blocks.h_g)
    q = system.grid.q
    density = np.abs(phi) ** 2
    q_mean = float(np.sum(q * density))
    q_var = float(np.sum((q - q_mean) ** 2 * density))
    print(f"ground-state energy: {energy:.9f} eV")
    print(f"<Q>: {q_mean:.9f}")
    print(f"var(Q): {q_var:.9f}")
    print(f"grid: n={config.grid.n_points} on [{config.grid.q_min}, {config.grid.q_max})")
    return EXIT_OK


def _emit(record, outdir: str, figures: bool) -> None:
    paths = emit_record(record, outdir)
    if figures:
        paths += render_figures(record, outdir)
    for p in paths:
        print(p)


def _cmd_run(args) -> int:
    record = run_experiment(_load_config(args.config))
    _emit(record, args.outdir, not args.no_figures)
    return EXIT_OK


def _cmd_onoff(args) -> int:
    window = _parse_floats(args.window, "window")
    if len(window) != 2:
        raise ConfigError(f"--window needs exactly t0,t1; got {args.window!r}")
    record = run_onoff(_load_config(args.config), (window[0], window[1]))
    _emit(record, args.outdir, not args.no_figures)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    base = _load_config(args.config)
    gammas = _parse_floats(args.gammas, "gamma") if args.gammas else DEFAULT_GAMMA_VALUES
    deltas = _parse_floats(args.deltas, "delta") if args.deltas else DEFAULT_DELTA_VALUES
    result = run_sweep(SweepSpec(gamma_values=gammas, delta_values=deltas, base=base), jobs=args.jobs)
    for p in emit_sweep(result, args.outdir, figures=not args.no_figures):
        print(p)
    for key, message in sorted(result.errors.items()):
        print(f"cell g={key[0]:g} d={key[1]:g} failed: {message}", file=sys.stderr)
    return EXIT_NUMERICAL if result.errors and not result.records else EXIT_OK


def _cmd_spectrum(args) -> int:
    path = Path(args.trajectory)
    try:
        table = np.genfromtxt(path, delimiter=",", names=True)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if table.dtype.names is None or "t_fs" not in table.dtype.names or "field" not in table.dtype.names:
        raise ConfigError(f"{path} does not look like an emitted trajectory.csv")
    t = np.atleast_1d(table["t_fs"])
    field = np.atleast_1d(table["field"])
    keep = t >= args.start_time
    t, field = t[keep], field[keep]
    if t.size < 16:
        raise ConfigError("fewer than 16 samples after --start-time filtering")
    dt = float(np.diff(t).mean())
    if not np.allclose(np.diff(t), dt, rtol=1e-6, atol=1e-9):
        raise ConfigError("trajectory sampling is not uniform")
    energies, magnitudes = field_spectrum(field, dt)
    outdir = Path(args.outdir) if args.outdir else path.parent
    outdir.mkdir(parents=True, exist_ok=True)
    out = outdir / "spectrum.csv"
    lines = ["energy_eV,magnitude"]
    lines.extend("%.12g,%.12g" % (e, m) for e, m in zip(energies, magnitudes))
    out.write_text("\n".join(lines) + "\n")
    print(out)
    if not args.no_figures:
        from matplotlib.backends.backend_agg import FigureCanvasAgg
        from matplotlib.figure import Figure

        fig = Figure(figsize=(7.0, 4.2), dpi=140)
        FigureCanvasAgg(fig)
        ax = fig.add_subplot()
        ax.plot(energies, magnitudes, lw=0.8)
        ax.set_xlabel("energy (eV)")
        ax.set_ylabel("magnitude")
        fig.tight_layout()
        fig_path = outdir / "field_spectrum.png"
        fig.savefig(fig_path)
        print(fig_path)
    return EXIT_OK


_COMMANDS = {
    "relax": _cmd_relax,
    "run": _cmd_run,
    "onoff": _cmd_onoff,
    "sweep": _cmd_sweep,
    "spectrum": _cmd_spectrum,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PropagationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
