import json
import math
import subprocess
import sys

import pytest

from ymenergy import cli, io
from ymenergy import optimize as opt
from ymenergy.errors import ConfigError


def test_verify_campaign_csv(tmp_path):
    out = tmp_path / "v.csv"
    code = cli.main(["verify", "--genus", "1", "--group", "su2", "--R", "16", "--K", "16",
                     "--trials", "100", "--seed", "7", "--format", "csv", "--out", str(out), "--workers", "1"])
    assert code == 0
    rows = io.read_csv(out)
    assert len(rows) == 100
    assert list(rows[0])[: len(io.SUMMARY_COLUMNS)] == list(io.SUMMARY_COLUMNS)
    eps = opt.calibrate_eps_disc("su2", 1, 16, 16, 1.0)
    assert all(float(r["gap"]) >= -eps for r in rows)
    assert all(r["violation"] == "false" for r in rows)


def test_verify_exit_code_two_on_violation(tmp_path, monkeypatch):
    def fake(c, eps=None):
        return {"S": 0.0, "E": 1.0, "gap": -1.0, "R": 2, "K": 1, "eps_disc": 0.0, "violation": True}
    monkeypatch.setattr(cli.opt, "verify_inequality", fake)
    code = cli.main(["verify", "--R", "2", "--K", "1", "--trials", "2", "--workers", "1",
                     "--out", str(tmp_path / "v.json")])
    assert code == 2


def test_spectrum_json(tmp_path):
    out = tmp_path / "s.json"
    assert cli.main(["spectrum", "--group", "u1", "--genus", "1", "--n-max", "3", "--T", "1",
                     "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    rows = doc["rows"]
    assert [r["n"] for r in rows] == [0, 1, 2, 3]
    for r in rows[1:]:
        assert math.isclose(r["ratio"], r["n"] ** 2, rel_tol=1e-6)


def test_negative_R_names_the_field(capsys):
    assert cli.main(["verify", "--R", "-3"]) == 1
    assert "R" in capsys.readouterr().err


def test_unknown_config_field_rejected(tmp_path, capsys):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"genus": 1, "colour": "red"}))
    assert cli.main(["verify", "--config", str(f)]) == 1
    assert "colour" in capsys.readouterr().err


def test_bad_tolerance_rejected(tmp_path, capsys):
    f = tmp_path / "c.yaml"
    f.write_text("tolerances:\n  grad_tol: -1\n")
    assert cli.main(["minimize", "--config", str(f)]) == 1
    assert "tolerances.grad_tol" in capsys.readouterr().err


def test_spectrum_requires_u1(capsys):
    assert cli.main(["spectrum", "--group", "su2"]) == 1
    assert "group" in capsys.readouterr().err


def test_bad_log_level(monkeypatch, capsys):
    monkeypatch.setenv("YM_LOG", "loud")
    assert cli.main(["verify", "--trials", "1"]) == 1
    assert "YM_LOG" in capsys.readouterr().err


def test_flags_override_config_file(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("genus: 2\nK: 3\nR: 4\ntrials: 5\nseed: 3\n")
    cfg = cli.config_from_args(["verify", "--config", str(f), "--trials", "2"])
    assert (cfg.genus, cfg.K, cfg.R, cfg.trials, cfg.seed) == (2, 3, 4, 2, 3)
    assert cfg.group == "su2"          # default


def test_config_defaults():
    cfg = cli.ExperimentConfig.from_mapping({})
    assert cfg.samples == cfg.K and cfg.format == "json"
    with pytest.raises(ConfigError) as info:
        cli.ExperimentConfig.from_mapping({"command": "saturate", "N": 5, "K": 4})
    assert info.value.field == "N"


def test_missing_config_file(capsys):
    assert cli.main(["verify", "--config", "/nonexistent/c.json"]) == 1
    assert "config" in capsys.readouterr().err


def test_refine_table(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert cli.main(["refine", "--group", "u1", "--source", "winding", "--n-max", "1", "--K", "8",
                     "--format", "csv", "--out", str(out)]) == 0
    rows = io.read_csv(out)
    assert list(rows[0]) == list(io.REFINE_COLUMNS)
    assert [int(r["level"]) for r in rows] == [0, 1, 2, 3]
    assert [int(r["R"]) for r in rows] == [8, 16, 32, 64]
    for r in rows[1:]:
        assert 1.7 <= float(r["ratio"]) <= 4.3
    assert "observed order" in capsys.readouterr().err


def test_refine_constant_tuple_has_zero_gaps(tmp_path):
    out = tmp_path / "r.json"
    assert cli.main(["refine", "--source", "constant", "--K", "4", "--out", str(out)]) == 0
    rows = json.loads(out.read_text())["rows"]
    assert len(rows) == 4 and all(r["gap"] == 0.0 for r in rows)


def test_decompose_csv(tmp_path):
    out = tmp_path / "d.csv"
    assert cli.main(["decompose", "--group", "u1", "--R", "6", "--K", "6", "--format", "csv",
                     "--out", str(out)]) == 0
    rows = io.read_csv(out)
    assert list(rows[0]) == list(io.DECOMPOSITION_COLUMNS)
    gaps = {float(r["s"]): float(r["gap"]) for r in rows}
    assert abs(gaps[0.0]) < 1e-12
    assert abs(gaps[0.5] - gaps[-0.5]) < 1e-9


def test_saturate_writes_connection(tmp_path):
    out = tmp_path / "s.json"
    assert cli.main(["saturate", "--group", "su2", "--R", "4", "--K", "4", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    c = io.connection_from_dict(doc["summary"]["connection"])
    assert abs(doc["summary"]["gap"]) < 1e-12
    assert c.lattice.R == 4


def test_minimize_reports(tmp_path):
    out = tmp_path / "m.json"
    assert cli.main(["minimize", "--K", "8", "--R", "4", "--trials", "2", "--workers", "1",
                     "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["summary"]["reports"]) == 2
    assert all(r["converged"] for r in doc["rows"])


def test_csv_to_stdout(capsys):
    assert cli.main(["verify", "--R", "3", "--K", "2", "--trials", "2", "--format", "csv", "--workers", "1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("experiment_id,") and len(lines) == 3


def test_reports_identical_across_worker_counts(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["minimize", "--K", "6", "--R", "4", "--trials", "4", "--seed", "5", "--format", "csv"]
    assert cli.main(base + ["--workers", "1", "--out", str(a)]) == 0
    assert cli.main(base + ["--workers", "2", "--out", str(b)]) == 0
    assert a.read_text() == b.read_text()


def test_module_entry_point(tmp_path):
    out = tmp_path / "v.json"
    proc = subprocess.run([sys.executable, "-m", "ymenergy", "verify", "--R", "3", "--K", "2",
                           "--trials", "2", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(out.read_text())["summary"]["violations"] == 0
