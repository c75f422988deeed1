from __future__ import annotations

import csv
import io
import json
import math
import subprocess
import sys

import pytest

from heiscr.cli import PROVENANCE, SCHEMA, ConfigError, RunConfig, build_parser, config_from_args, main, parse_config_text


def run(capsys, *argv, environ=None):
    code = main(list(argv), environ={} if environ is None else environ)
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv, environ=None):
    code, out, err = run(capsys, *argv, environ=environ)
    return code, json.loads(out)


# ---------------------------------------------------------------------------
# configuration


def test_config_text_parsing():
    cfg = parse_config_text("# comment\nn = 2\na = 0.5, 1  # trailing\nL-schedule = 1,10\nlattice_k = 3\n")
    assert cfg == {"n": 2, "a": (0.5, 1.0), "L_schedule": (1.0, 10.0), "lattice_k": 3}
    with pytest.raises(ConfigError):
        parse_config_text("bogus = 1")
    with pytest.raises(ConfigError):
        parse_config_text("n 2")


def test_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("seed = 3\nsamples = 5\n")
    p = build_parser()
    cfg = config_from_args(p.parse_args(["verify", "--config", str(path)]), {})
    assert (cfg.seed, cfg.samples) == (3, 5)
    cfg = config_from_args(p.parse_args(["verify", "--config", str(path)]), {"HEISCR_SEED": "7"})
    assert cfg.seed == 7
    cfg = config_from_args(p.parse_args(["verify", "--config", str(path), "--seed", "9"]), {"HEISCR_SEED": "7"})
    assert (cfg.seed, cfg.samples) == (9, 5)


def test_config_validation():
    with pytest.raises(ConfigError, match="precondition"):
        RunConfig(a=(-1.0,)).validate()
    with pytest.raises(ConfigError):
        RunConfig(n=0).validate()
    with pytest.raises(ConfigError):
        RunConfig(box=-1.0).validate()


def test_missing_config_file(capsys, tmp_path):
    code, _, err = run(capsys, "verify", "--config", str(tmp_path / "absent.cfg"))
    assert code == 2 and "config" in err


def test_usage_error_exit_code(capsys):
    assert run(capsys, "nonsense")[0] == 2
    assert run(capsys, "verify", "--model", "diagonal")[0] == 2


# ---------------------------------------------------------------------------
# verify


def test_verify_default(capsys):
    code, rep = run_json(capsys, "verify")
    assert code == 0
    assert rep["schema"] == SCHEMA == 1
    assert rep["summary"]["checks"] >= 60 and rep["summary"]["failed"] == 0
    assert rep["conventions"]
    for r in rep["records"]:
        assert r["provenance"] in PROVENANCE
        assert r["pass"] == (r["residual"] <= r["tol"])
        assert {"id", "inputs", "expected", "observed", "residual", "pass"} <= set(r)


def test_verify_negative_weights(capsys):
    code, out, err = run(capsys, "verify", "--a=-1")
    assert code == 2 and "precondition" in err and out == ""


def test_verify_impossible_tolerance(capsys):
    code, rep = run_json(capsys, "verify", "--tol", "1e-30")
    assert code == 1 and rep["summary"]["failed"] > 0


def test_verify_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "verify", "--seed", "5", "--out", str(a))[0] == 0
    assert run(capsys, "verify", "--out", str(b), environ={"HEISCR_SEED": "5"})[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_verify_csv(capsys):
    code, out, _ = run(capsys, "verify", "--samples", "2", "--format", "csv")
    assert code == 0 and "\r" not in out
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["id", "expected", "observed", "residual", "tol", "provenance", "pass"]
    assert all(r[5] in PROVENANCE for r in rows[1:])


# ---------------------------------------------------------------------------
# other commands


def test_curvature_anchor(capsys):
    for n in (1, 2):
        code, rep = run_json(capsys, "curvature", "--n", str(n), "--samples", "4")
        assert code == 0
        assert all(abs(r["s_engine"] + 2 * n) < 1e-8 for r in rep["meta"]["rows"])


def test_curvature_deformed_reports_references(capsys):
    code, rep = run_json(capsys, "curvature", "--a", "1", "--samples", "4")
    coeffs = rep["meta"]["coefficients"]
    assert coeffs["conformal_chart"] == [2.0, -4.0]
    assert coeffs["printed"] != coeffs["calibrated"]
    assert all(r["residual"] < 1e-6 for r in rep["meta"]["rows"])
    # the conformal-chart reference disagrees with the engine; the report says so
    assert code == 1 and rep["notes"]


def test_curvature_empty_sample_set(capsys):
    assert run(capsys, "curvature", "--samples", "0")[0] == 2


def test_ccdist(capsys, tmp_path):
    table = tmp_path / "table.csv"
    code, rep = run_json(capsys, "ccdist", "--csv-out", str(table), "--samples", "2")
    assert code == 0
    assert abs(rep["meta"]["d_cc"] - 2 * math.sqrt(math.pi)) < 0.05 * 2 * math.sqrt(math.pi)
    text = table.read_bytes().decode()
    assert "\r" not in text and text.splitlines()[0] == "L,d_L,gap"
    assert len(text.splitlines()) == 5


def test_ccdist_horizontal_target(capsys):
    code, rep = run_json(capsys, "ccdist", "--q", "1,0,0", "--samples", "1")
    assert code == 0
    assert all(abs(r["d_L"] - 1) < 0.05 for r in rep["meta"]["table"])


def test_ccdist_outside_box(capsys):
    assert run(capsys, "ccdist", "--q", "0,0,5")[0] == 2


def test_quotient(capsys):
    code, rep = run_json(capsys, "quotient", "--lattice-k", "2", "--samples", "3")
    assert code == 0
    assert rep["meta"]["homology"]["text"] == "Z^2 + Z_2"
    assert rep["meta"]["covolume"] == 4
    code, rep = run_json(capsys, "quotient", "--a", "1", "--samples", "3")
    assert code == 0 and rep["meta"]["invariance_residual"] > 1e-3


def test_flow(capsys):
    code, rep = run_json(capsys, "flow", "--a", "0.5", "--samples", "3")
    assert code == 0 and max(rep["meta"]["error_curve"][0]) < 1e-6
    code, rep = run_json(capsys, "flow", "--n", "2", "--a", "1,2", "--samples", "2")
    assert code == 0 and any(r["id"] == "flow.x12_period" for r in rep["records"])


def test_cone(capsys):
    code, rep = run_json(capsys, "cone", "--a0", "1", "--b=-0.1")
    assert code == 0 and rep["meta"]["verdict"] == "not positive"
    assert rep["meta"]["witness_radius"] == pytest.approx(math.sqrt(10))
    code, rep = run_json(capsys, "cone", "--a0", "2", "--b", "4")
    assert code == 0 and rep["meta"]["reduced"] == [2.0]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "heiscr", "cone", "--b", "1"], capture_output=True, text=True, check=False)
    assert out.returncode == 0 and json.loads(out.stdout)["suite"] == "cone"
