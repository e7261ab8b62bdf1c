import json
import subprocess
import sys
from pathlib import Path

import pytest

from carnotheat.cli import main

GROUPS = Path(__file__).resolve().parents[1] / "groups"


def run(tmp_path, *args):
    out = tmp_path / "rep"
    code = main([*args, "--out", str(out)])
    return code, out


def test_kernel_eval_origin(tmp_path, capsys):
    code, out = run(tmp_path, "kernel-eval", "--group", "h1", "--point", "0,0,0", "--t", "1")
    assert code == 0
    assert capsys.readouterr().out.startswith("0.0625")
    doc = json.loads(out.with_suffix(".json").read_text())
    assert doc["schema_version"] == 1
    assert doc["rows"][0]["value"] == pytest.approx(0.0625, rel=1e-12)


def test_validate_group_file_and_name(tmp_path):
    assert run(tmp_path, "validate-group", str(GROUPS / "engel.json"))[0] == 0
    assert run(tmp_path, "validate-group", "free2_3")[0] == 0


def test_validate_group_rejects_broken_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"layers": [2, 1, 1], "brackets": [
        {"left": [1, 1], "right": [1, 2], "out": [{"basis": [3, 1], "coeff": "1"}]}]}))
    assert run(tmp_path, "validate-group", str(bad))[0] == 2


def test_failed_check_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "normalization", "--group", "h1", "--t", "1", "--tol", "1e-30")
    assert code == 1
    assert "check failed" in capsys.readouterr().err


def test_config_errors(tmp_path):
    assert run(tmp_path, "kernel-eval", "--group", "engel")[0] == 2
    assert run(tmp_path, "kernel-eval", "--group", "nope")[0] == 2
    assert run(tmp_path, "kernel-eval", "--group", "h1", "--point", "1,2")[0] == 2
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["kernel-eval", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 2


def test_config_file_supplies_defaults(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"group": "h1", "t": 2.0}))
    code, out = run(tmp_path, "kernel-eval", "--config", str(cfg), "--point", "0,0,0")
    assert code == 0
    row = json.loads(out.with_suffix(".json").read_text())["rows"][0]
    assert row["value"] == pytest.approx(1 / 64, rel=1e-12)


def test_csv_is_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    args = ["ledoux", "--group", "h1", "--paths", "20000", "--seed", "3", "--step-size", "0.1"]
    assert main([*args, "--out", str(a)]) in (0, 1)
    assert main([*args, "--threads", "2", "--out", str(b)]) in (0, 1)
    assert a.with_suffix(".csv").read_text() == b.with_suffix(".csv").read_text()


def test_decoupling_quadrature(tmp_path):
    assert run(tmp_path, "decoupling", "--group", "h1")[0] == 0


def test_bbm_limit_euclidean(tmp_path):
    code, out = run(tmp_path, "bbm-limit", "--group", "r1", "--function", "r1_bump", "--p", "2",
                    "--t-grid", "4e-4,2e-4,1e-4,5e-5")
    assert code == 0
    assert out.with_suffix(".csv").read_text().startswith("param,value,error,target,ratio")


def test_acceptance_subset(tmp_path, capsys):
    code, _ = run(tmp_path, "acceptance", "--criteria", "1,2")
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert any(line.startswith("[PASS]  1") for line in lines)


def test_console_script_entry(tmp_path):
    res = subprocess.run([sys.executable, "-m", "carnotheat", "kernel-eval", "--group", "r2",
                          "--point", "0,0", "--out", str(tmp_path / "k")],
                         capture_output=True, text=True)
    assert res.returncode == 0
    # (4 pi)^-1
    assert float(res.stdout.split()[0]) == pytest.approx(0.0795774715459, rel=1e-10)
