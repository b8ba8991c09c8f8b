import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from trenchfield.cli import main
from trenchfield.report import analyze
from trenchfield.config import load_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_report(tmp_path, capsys):
    cfg = CONFIGS / "set_antisymmetric.ini"
    code, out, _ = _run(["analyze", "--config", cfg, "--out", tmp_path], capsys)
    assert code == 0 and "C2" in out
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["schema_version"] == 1
    # the CLI is a thin shell over the library; threaded LAPACK may move the last bit
    lib = json.loads(json.dumps(analyze(load_config(cfg)).to_dict()))
    _assert_same(doc, lib)


def _assert_same(a, b):
    if isinstance(a, dict):
        assert a.keys() == b.keys()
        for k in a:
            _assert_same(a[k], b[k])
    elif isinstance(a, list):
        assert len(a) == len(b)
        for x, y in zip(a, b):
            _assert_same(x, y)
    elif isinstance(a, float):
        assert a == pytest.approx(b, rel=1e-9, abs=1e-9)
    else:
        assert a == b


def test_analyze_csv(tmp_path, capsys):
    code, _, _ = _run(["analyze", "--config", CONFIGS / "set_symmetric.ini", "--out", tmp_path,
                       "--format", "csv"], capsys)
    lines = (tmp_path / "analyze.csv").read_text().splitlines()
    assert code == 0 and lines[0].startswith("# trenchfield sweep csv schema") and len(lines) == 3


def test_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[trap]\nfamily = set_symmetric\na = 161.2\nb = oops\n")
    out = tmp_path / "out"
    code, _, err = _run(["analyze", "--config", bad, "--out", out], capsys)
    assert code == 1
    doc = json.loads(err.strip().splitlines()[-1])
    assert doc["kind"] == "error" and doc["line"] == 4
    assert not out.exists()


def test_unknown_family(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[trap]\nfamily = hexagonal\n")
    code, _, err = _run(["analyze", "--config", bad], capsys)
    assert code == 1 and "UnknownFamily" in err


def test_regime_mismatch_is_numerical(tmp_path, capsys):
    cfg = tmp_path / "trap.ini"
    cfg.write_text("[trap]\nfamily = stacked_trench_antisymmetric\ni = 150\nj = 160\nxi = 270\n"
                   "regime = ground_plane\n")
    out = tmp_path / "out"
    code, _, err = _run(["analyze", "--config", cfg, "--out", out], capsys)
    assert code == 2 and json.loads(err.strip())["error"] == "RegimeMismatch"
    assert not out.exists()


def test_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["analyze"])
    assert info.value.code == 1


def test_sweep_outputs(tmp_path, capsys):
    cfg = CONFIGS / "simple_trench_antisymmetric.ini"
    code, out, _ = _run(["sweep", "--config", cfg, "--param", "f", "--values", "300:500:100",
                         "--out", tmp_path, "--jobs", "2"], capsys)
    assert code == 0
    text = (tmp_path / "sweep.csv").read_text()
    assert text == out
    assert [ln.split(",")[2] for ln in text.splitlines()[2:]] == ["300", "400", "500"]
    code, _, _ = _run(["sweep", "--config", cfg, "--param", "f", "--values", "400",
                       "--out", tmp_path, "--format", "report-doc"], capsys)
    doc = json.loads((tmp_path / "sweep.json").read_text())
    assert code == 0 and doc["schema_version"] == 1 and len(doc["rows"]) == 1


def test_sweep_bad_values(capsys):
    code, _, err = _run(["sweep", "--config", CONFIGS / "set_symmetric.ini", "--param", "b",
                         "--values", "1:x:2"], capsys)
    assert code == 1


def test_mesh_dump(tmp_path, capsys):
    code, out, _ = _run(["mesh-dump", "--config", CONFIGS / "set_symmetric.ini", "--out", tmp_path], capsys)
    lines = (tmp_path / "mesh.csv").read_text().splitlines()
    assert code == 0 and lines[0] == "# trenchfield panel mesh schema 1"
    assert lines[1] == "x0_um,y0_um,x1_um,y1_um,electrode_id,role"
    assert f"{len(lines) - 2} panels written" in out


def test_regress_exit_code(tmp_path):
    # wafer depths sit outside the band, so the full run reports a regression
    proc = subprocess.run([sys.executable, "-m", "trenchfield", "regress-table1", "--out", str(tmp_path)],
                          capture_output=True, text=True, timeout=600)
    assert proc.returncode == 3
    doc = json.loads((tmp_path / "table1.json").read_text())
    assert doc["schema_version"] == 1 and not doc["passed"]
    failing = {(c["family"], c["quantity"]) for c in doc["cells"] if not c["passed"]}
    assert failing <= {("wafer_symmetric", "depth"), ("wafer_antisymmetric", "depth")}


def test_validate_exit_code(tmp_path, capsys):
    code, out, _ = _run(["validate", "--out", tmp_path], capsys)
    assert code == 0 and "overall: PASS" in out
    assert json.loads((tmp_path / "validation.json").read_text())["passed"]
