import csv
import json
import re

import pytest

from openqi.cli import (
    CURVE_COLUMNS,
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_THRESHOLD,
    main,
    plot,
    run,
)
from openqi.svgplot import render
from openqi.sweep import SweepError

MINIMAL = """\
[experiment]
states = noon
n_grid = 2, 4
dissipator = alpha
timing = false

[policy gamma=0]
gamma0 = 0
"""

SMALL_FIG = """\
[experiment]
states = nzero twin_fock noon
n_grid = 2, 4, 6
dissipator = alpha
timing = false

[policy gamma=0]
gamma0 = 0

[policy gamma=0.5]
gamma0 = 0.5

[policy gamma=1/N]
gamma0 = 1
rule = gamma_power
power = 1
"""


@pytest.fixture
def cfg(tmp_path):
    def make(text, name="run.cfg"):
        p = tmp_path / name
        p.write_text(text)
        return p

    return make


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_minimal_run(cfg, tmp_path):
    out = tmp_path / "out"
    manifest = run(cfg(MINIMAL), out)
    curve_csvs = [f for f in manifest.files if f.endswith(".csv") and f != "all_curves.csv"]
    assert len(curve_csvs) == 1
    rows = read_rows(out / curve_csvs[0])
    assert tuple(rows[0]) == CURVE_COLUMNS
    assert [r[0] for r in rows[1:]] == ["2", "4"]
    assert float(rows[2][3]) == pytest.approx(0.25, abs=1e-6)
    raw = (out / curve_csvs[0]).read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    combined = read_rows(out / "all_curves.csv")
    assert tuple(combined[0][1:]) == CURVE_COLUMNS and len(combined) == 3

    data = json.loads((out / "manifest.json").read_text())
    assert set(data["files"]) == {p.name for p in out.iterdir()} - {"manifest.json"}
    assert data["rng_free"] is True and data["version"]
    [meta] = data["curves"]
    assert meta["policy"] == "gamma=0"


def test_nine_curves_and_plot(cfg, tmp_path):
    out = tmp_path / "fig"
    manifest = run(cfg(SMALL_FIG), out)
    assert len(manifest.curves) == 9
    svg = (out / "crlb.svg").read_text()
    assert svg.count('<polyline class="curve"') == 9
    assert svg.count('<line class="reference"') == 2
    for c in manifest.curves:
        assert c["name"] in svg


def test_runs_are_byte_deterministic(cfg, tmp_path):
    path = cfg(SMALL_FIG)
    run(path, tmp_path / "a")
    run(path, tmp_path / "b")
    for f in sorted((tmp_path / "a").iterdir()):
        if f.name == "manifest.json":
            continue
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_plot_round_trip_is_deterministic(cfg, tmp_path):
    out = tmp_path / "out"
    manifest = run(cfg(MINIMAL), out)
    csvs = [out / f for f in manifest.files if f.endswith(".csv") and f != "all_curves.csv"]
    a = plot(csvs, tmp_path / "a.svg").read_bytes()
    b = plot(csvs, tmp_path / "b.svg").read_bytes()
    assert a == b
    assert a.decode().count("<polyline") == 1


def test_render_single_curve():
    svg = render([("one", [(2, 0.5), (4, 0.25)])])
    assert svg.count("<polyline") == 1
    assert svg.count('<line class="reference"') == 2
    assert ">one<" in svg
    with pytest.raises(ValueError):
        render([])


def test_plot_rejects_bad_columns(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("N,crlb\n2,0.5\n")
    with pytest.raises(ValueError):
        plot([p], tmp_path / "x.svg")
    with pytest.raises(ValueError):
        plot([], tmp_path / "x.svg")


def test_exit_codes(cfg, tmp_path, capsys):
    out = str(tmp_path / "o")
    assert main(["run", "--config", str(cfg(MINIMAL)), "--out", out]) == EXIT_OK
    bad = cfg(MINIMAL.replace("2, 4", "4, 2"), "bad.cfg")
    assert main(["run", "--config", str(bad), "--out", out]) == EXIT_CONFIG
    assert "n_grid" in capsys.readouterr().err
    zero_t = cfg(MINIMAL.replace("timing = false", "hold_time = 0"), "zero.cfg")
    assert main(["run", "--config", str(zero_t), "--out", str(tmp_path / "z")]) == EXIT_NUMERICAL
    assert not (tmp_path / "z" / "manifest.json").exists()
    assert main(["plot", "--out", str(tmp_path / "p.svg"), str(tmp_path / "missing.csv")]) == EXIT_CONFIG


def test_partial_outputs_removed(cfg, tmp_path):
    # every point fails at t = 0: nothing may be left behind
    text = MINIMAL.replace("timing = false", "timing = false\nhold_time = 0")
    out = tmp_path / "out"
    with pytest.raises(SweepError):
        run(cfg(text), out)
    assert list(out.iterdir()) == []


def test_threads_flag_and_env(cfg, tmp_path, monkeypatch):
    monkeypatch.setenv("OPENQI_THREADS", "2")
    out = tmp_path / "t"
    assert main(["run", "--config", str(cfg(MINIMAL)), "--out", str(out), "--threads", "1"]) == EXIT_OK


def test_fit_window_flag(cfg, tmp_path, capsys):
    text = MINIMAL.replace("2, 4", "2, 4, 8")
    out = tmp_path / "w"
    assert main(["run", "--config", str(cfg(text)), "--out", str(out), "--fit-window", "2:8"]) == EXIT_OK
    line = capsys.readouterr().out
    assert re.search(r"slope -1\.000", line) and "heisenberg" in line


def test_extensivity_preset(tmp_path, capsys):
    out = tmp_path / "ext"
    assert main(["extensivity", "--preset", "extensivity", "--out", str(out)]) == EXIT_OK
    summary = read_rows(out / "extensivity_summary.csv")
    assert summary[0][:3] == ["family", "kind", "exponent"]
    got = {r[1]: float(r[2]) for r in summary[1:]}
    assert got["single_mode"] == pytest.approx(1.5, abs=0.01)
    assert got["two_mode_number_conserving"] == pytest.approx(2.0, abs=0.01)
    assert got["single_pair"] == pytest.approx(1.0, abs=1e-10)
    rows = read_rows(out / "extensivity_single_mode_linear.csv")
    assert rows[0] == ["N", "h_int_solver", "h_int_closed_form", "rel_error"]
    assert all(float(r[3]) <= 1e-8 for r in rows[1:])
    assert (out / "manifest.json").exists()


def test_extensivity_threshold_exit(tmp_path):
    p = tmp_path / "ext.cfg"
    p.write_text("[extensivity]\nn_grid = 8, 16, 32\n[family wrong]\nkind = single_mode\nexpected = 1.0\n")
    assert main(["extensivity", "--config", str(p), "--out", str(tmp_path / "e")]) == EXIT_THRESHOLD


def test_config_and_preset_are_exclusive(cfg, tmp_path):
    args = ["run", "--config", str(cfg(MINIMAL)), "--preset", "fig1", "--out", str(tmp_path)]
    assert main(args) == EXIT_CONFIG
