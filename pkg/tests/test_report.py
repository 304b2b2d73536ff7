import pytest

from decotrack import (
    SweepSpec,
    emit_record,
    emit_sweep,
    render_figures,
    run_sweep,
)
from decotrack.observables import EXTRA_COLUMNS, TRAJECTORY_COLUMNS
from decotrack.report import record_spectrum


def read_lines(path):
    return path.read_text().splitlines()


def test_trajectory_csv_contract(tmp_path, quick_record):
    paths = emit_record(quick_record, tmp_path)
    names = {p.name for p in paths}
    assert names == {"trajectory.csv", "spectrum.csv", "meta"}
    lines = read_lines(tmp_path / "trajectory.csv")
    header = lines[0].split(",")
    assert tuple(header[: len(TRAJECTORY_COLUMNS)]) == TRAJECTORY_COLUMNS
    assert tuple(header[len(TRAJECTORY_COLUMNS):]) == EXTRA_COLUMNS
    assert len(lines) - 1 == quick_record.times.size


def test_serialization_precision(tmp_path, quick_record):
    emit_record(quick_record, tmp_path)
    row = read_lines(tmp_path / "trajectory.csv")[5].split(",")
    # 12 significant digits survive the round trip
    assert float(row[1]) == pytest.approx(quick_record.pop_e_target[4], rel=1e-11)


def test_reemission_byte_identical(tmp_path, quick_record):
    emit_record(quick_record, tmp_path / "a")
    emit_record(quick_record, tmp_path / "b")
    for name in ("trajectory.csv", "spectrum.csv", "meta"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_meta_reports_k_and_config(tmp_path, quick_record):
    emit_record(quick_record, tmp_path)
    meta = (tmp_path / "meta").read_text()
    assert "k_value = " in meta
    assert "[model]" in meta and "[run]" in meta
    assert "version = " in meta


def test_spectrum_table(tmp_path, quick_record):
    emit_record(quick_record, tmp_path)
    lines = read_lines(tmp_path / "spectrum.csv")
    assert lines[0] == "energy_eV,magnitude"
    energies, mags = record_spectrum(quick_record)
    assert len(lines) - 1 == energies.size


def test_figures_rendered(tmp_path, quick_record):
    paths = render_figures(quick_record, tmp_path)
    names = {p.name for p in paths}
    assert names == {
        "populations.png",
        "purity_overlap.png",
        "field_time.png",
        "field_spectrum.png",
    }
    for p in paths:
        assert p.stat().st_size > 5_000


def test_sweep_emission_layout(tmp_path, quick_config):
    spec = SweepSpec(gamma_values=(0.003,), delta_values=(0.5, 0.7), base=quick_config)
    result = run_sweep(spec)
    emit_sweep(result, tmp_path, figures=False)
    assert (tmp_path / "g0.003_d0.5" / "trajectory.csv").exists()
    assert (tmp_path / "g0.003_d0.7" / "trajectory.csv").exists()
    summary = read_lines(tmp_path / "summary.csv")
    assert summary[0].startswith("gamma_per_fs,delta_eV")
    assert len(summary) == 3


def test_sweep_grid_figure(tmp_path, quick_config):
    spec = SweepSpec(gamma_values=(0.003,), delta_values=(0.7,), base=quick_config)
    result = run_sweep(spec)
    paths = emit_sweep(result, tmp_path, figures=True)
    assert any(p.name == "sweep_populations.png" for p in paths)
