import json
import subprocess
import sys

import pytest

from besfem import report
from besfem.cli import main

PATHOLOGICAL = """
# 100 m of concrete: the 24 h transfer matrix overflows
[envelope.slab]
area = 1
layers = concrete:100
"""


@pytest.fixture
def weather_csv(tmp_path):
    path = tmp_path / "w.csv"
    assert main(["gen-weather", "--days", "2", "--out", str(path)]) == 0
    return path


def test_help_lists_subcommands():
    out = subprocess.run([sys.executable, "-m", "besfem.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for name in ("run-bes", "run-fem", "compare", "gen-weather", "validate"):
        assert name in out.stdout


def test_run_bes(tmp_path, weather_csv):
    out = tmp_path / "bes.csv"
    assert main(["run-bes", "--weather", str(weather_csv), "--out", str(out)]) == 0
    cols = report.read_series(out)
    assert list(cols) == list(report.BES_COLUMNS)
    assert len(cols["hour"]) == 48


def test_run_bes_is_deterministic(tmp_path, weather_csv):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["run-bes", "--weather", str(weather_csv), "--out", str(a)])
    main(["run-bes", "--weather", str(weather_csv), "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_missing_weather_file(tmp_path, capsys):
    assert main(["run-bes", "--weather", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")]) == 2
    assert "not found" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["run-bes", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path / "o")]) == 1


def test_bad_config(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[box]\nwall_thickness = 0.7\n")
    assert main(["run-bes", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "2t >= edge" in capsys.readouterr().err


def test_pathological_wall_exit_3(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(PATHOLOGICAL)
    code = main(["run-bes", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 3
    err = capsys.readouterr().err
    assert "degenerate wall spectrum" in err and "pole report" in err


def test_run_fem(tmp_path, weather_csv):
    out = tmp_path / "fem.csv"
    vtk = tmp_path / "vtk"
    code = main(["run-fem", "--weather", str(weather_csv), "--mesh", "10", "--probe", "0.6,0.6,0.6",
                 "--snapshot-hours", "24,48", "--vtk-dir", str(vtk), "--out", str(out)])
    assert code == 0
    cols = report.read_series(out)
    assert list(cols) == ["hour", "T_mean_core", "T_probe_1"]
    assert len(cols["hour"]) == 48
    assert sorted(p.name for p in vtk.iterdir()) == ["T_00024.vtk", "T_00048.vtk"]


def test_run_fem_bad_mesh(tmp_path, weather_csv, capsys):
    code = main(["run-fem", "--weather", str(weather_csv), "--mesh", "7", "--out", str(tmp_path / "o")])
    assert code == 4
    assert "try n =" in capsys.readouterr().err


def test_compare(tmp_path, weather_csv):
    bes, fem_ = tmp_path / "bes.csv", tmp_path / "fem.csv"
    main(["run-bes", "--weather", str(weather_csv), "--out", str(bes)])
    main(["run-fem", "--weather", str(weather_csv), "--mesh", "10", "--out", str(fem_)])
    out = tmp_path / "m.json"
    assert main(["compare", str(bes), str(fem_), "--warmup", "24", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema"] == 1 and doc["n"] == 24 and doc["warmup_discarded"] == 24


def test_compare_misaligned(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    report.write_series(a, {"hour": [1, 2, 3], "T_a": [0.0, 0.0, 0.0]})
    report.write_series(b, {"hour": [1, 2, 4], "T_a": [0.0, 0.0, 0.0]})
    assert main(["compare", str(a), str(b), "--warmup", "0"]) == 5
    assert "row 3" in capsys.readouterr().err


def test_gen_weather_defaults(tmp_path):
    out = tmp_path / "w.csv"
    assert main(["gen-weather", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "time,Te,Igh,Idh"
    assert lines[1].startswith("2023-01-01T00:00Z,")
    assert len(lines) == 1 + 720


def test_validate_reports_table(tmp_path, capsys):
    code = main(["validate", "--out-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert "PASS  U-value identity" in out
    assert code in (0, 6)
    sweep = (tmp_path / "north_admittance.csv").read_text().splitlines()
    assert sweep[0] == "period_h,ReY_xy,ImY_xy,ReY_x,ImY_x"
    coeffs = json.loads((tmp_path / "north_response_factors.json").read_text())
    assert max(coeffs["pole_moduli"]) < 1


def test_validate_detects_broken_identity(capsys):
    assert main(["validate", "--perturb-u-identity"]) == 6
    assert "FAIL  U-value identity" in capsys.readouterr().out
