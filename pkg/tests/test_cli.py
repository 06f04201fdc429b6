import json
from pathlib import Path

import numpy as np
import pytest

from mfspec.cli import main

MODELS = Path(__file__).resolve().parents[1] / "models"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_pressure(capsys):
    code, out, _ = run(capsys, "pressure", "--model", str(MODELS / "golden.json"), "--potential",
                       json.dumps({"kind": "locally_constant", "k": 1, "table": {"1": [0], "2": [0]}}))
    doc = json.loads(out)
    assert code == 0
    assert doc["exact"] == pytest.approx(np.log((1 + np.sqrt(5)) / 2), abs=1e-12)
    assert doc["contains_exact"]


def test_balls(capsys):
    code, out, _ = run(capsys, "balls", "--model", str(MODELS / "full2_nonuniform.json"), "--n", "12")
    doc = json.loads(out)
    assert doc["bowen_root"] == pytest.approx(np.log2(2 / (np.sqrt(5) - 1)))


def test_spectrum_csv_and_json(capsys, tmp_path):
    out = tmp_path / "grid.csv"
    code, _, _ = run(capsys, "spectrum", "--model", str(MODELS / "full2.json"), "--alpha-grid", "9",
                     "--n", "12", "--eps", "auto", "--k", "1", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("alpha,lambda_hat,e_hat")
    assert len(lines) == 10
    assert json.loads(out.with_suffix(".json").read_text())["meta"]["eps_rule"] == "auto"


def test_fixedset(capsys):
    code, out, _ = run(capsys, "fixedset", "--carpet", "s2", "--k", "4", "--depth", "6")
    doc = json.loads(out)
    assert doc["abs_error"] < 1e-9


def test_fdim_times3(capsys):
    code, out, _ = run(capsys, "fdim", "--carpet", "times_m(3)", "--depth", "3")
    assert json.loads(out)["value"] == pytest.approx(1.0, abs=1e-6)


def test_moran_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        run(capsys, "moran", "--seed", "42", "--blocks", "500,1000,2000", "--out", str(p))
    assert a.read_bytes() == b.read_bytes()


def test_error_record(capsys):
    code, _, err = run(capsys, "fdim", "--model", str(MODELS / "full2.json"), "--xi", "1.5", "--k", "1")
    assert code == 2
    assert json.loads(err)["error"] == "empty_intersection"
    code, _, err = run(capsys, "fixedset", "--carpet", "nope")
    assert code == 2 and json.loads(err)["error"] == "unknown_catalog_entry"


def test_check_command(capsys):
    code, out, _ = run(capsys, "check", "--instances", "5")
    assert code == 0 and json.loads(out)["violations"] == 0
