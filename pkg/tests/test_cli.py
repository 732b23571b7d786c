import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from xorselftest import __version__
from xorselftest import _linalg as la
from xorselftest.cli import AnalysisReport, main
from xorselftest.ghz import ideal_device


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_chsh(capsys):
    code, out, _ = run(capsys, "analyze", "--game", "chsh.json")
    assert code == 0
    rep = json.loads(out)
    assert rep["verdict"]["is_robust_self_test"] is True
    assert rep["tool_version"] == __version__
    assert rep["input_digest"].startswith("sha256:")
    assert rep["seed"] == 0 and rep["config"]["grid_points_per_dim"] == 12
    assert set(rep["timings"]) >= {"maxima_s", "classify_s"}


def test_analyze_constant_fails_A(capsys):
    code, out, _ = run(capsys, "analyze", "--game", "const1.json")
    rep = json.loads(out)
    assert code == 0
    assert rep["verdict"]["is_self_test"] is False
    assert rep["verdict"]["failed"] == "condition A"


def test_analyze_alpha_template(capsys):
    code, out, _ = run(capsys, "analyze", "--alpha", "2")
    rep = json.loads(out)
    assert code == 0 and rep["verdict"]["is_robust_self_test"]
    assert rep["verdict"]["q_f"] == pytest.approx(2 * np.sqrt(5), abs=1e-9)


def test_analyze_user_file_digest(tmp_path, capsys):
    path = tmp_path / "g.json"
    path.write_text('{"players": 2, "table": [1, 1, 1, -1]}')
    code, out, _ = run(capsys, "analyze", "--game", str(path))
    assert json.loads(out)["input_digest"] == "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()


def test_report_round_trip(capsys):
    code, out, _ = run(capsys, "analyze", "--game", "chsh", "--class", "s", "--samples", "10")
    assert code == 0
    rep = AnalysisReport.from_json(out)
    assert rep.robustness is not None
    assert rep.to_json() == out.rstrip("\n")
    assert json.loads(rep.to_json()) == json.loads(out)


def test_missing_and_malformed_input(tmp_path, capsys):
    code, _, err = run(capsys, "analyze", "--game", str(tmp_path / "nope.json"))
    assert code == 2 and "no such file" in err
    bad = tmp_path / "bad.json"
    bad.write_text('{"players": 2,\n "table": [1, 2,, 3]}')
    code, _, err = run(capsys, "analyze", "--game", str(bad))
    assert code == 2 and "line 2" in err
    bad.write_text('{"players": 2, "table": [1, 2, 3]}')
    code, _, err = run(capsys, "analyze", "--game", str(bad))
    assert code == 2 and "entries" in err
    code, _, _ = run(capsys, "analyze", "--game", "chsh", "--grid-points", "2")
    assert code == 2
    code, _, _ = run(capsys, "analyze")
    assert code == 2


def test_strict_mode_exit_3(tmp_path, capsys):
    path = tmp_path / "zero.json"
    path.write_text('{"players": 2, "table": [0, 0, 0, 0]}')
    code, out, _ = run(capsys, "analyze", "--game", str(path))
    assert code == 0 and json.loads(out)["warnings"]
    code, _, _ = run(capsys, "analyze", "--game", str(path), "--strict")
    assert code == 3


def test_out_prefix(tmp_path, capsys):
    prefix = tmp_path / "rep"
    code, out, _ = run(capsys, "analyze", "--game", "chsh", "--out", str(prefix))
    assert code == 0 and out == ""
    assert json.loads((tmp_path / "rep.json").read_text())["verdict"]["is_robust_self_test"]


def test_robustness_defaults_chsh(capsys):
    code, out, _ = run(capsys, "robustness", "--game", "chsh.json", "--class", "t")
    assert code == 0
    cert = json.loads(out)
    assert 0.4 <= cert["fitted_slope"] <= 0.6
    assert cert["seed"] == 0 and len(cert["samples"]) == 800


def test_robustness_csv_is_reproducible(tmp_path, capsys):
    for name in ("a", "b"):
        code, _, _ = run(capsys, "robustness", "--game", "chsh", "--class", "qubit", "--samples", "20",
                         "--seed", "9", "--out", str(tmp_path / name))
        assert code == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().startswith("eps,distance,bound_C_sqrt_eps\n")
    assert json.loads((tmp_path / "a.json").read_text())["strategy_class"] == "qubit"
    code, out, _ = run(capsys, "robustness", "--game", "chsh", "--class", "qubit", "--samples", "20",
                       "--seed", "9", "--format", "csv")
    assert out.encode() == (tmp_path / "a.csv").read_bytes()


def test_robustness_gate(capsys):
    code, out, _ = run(capsys, "robustness", "--game", "const1", "--class", "t")
    assert code == 4
    assert json.loads(out)["verdict"]["failed"] == "condition A"


def test_robustness_bad_eps(capsys):
    code, _, _ = run(capsys, "robustness", "--game", "chsh", "--class", "t", "--eps-min", "0.5", "--eps-max", "0.1")
    assert code == 2


def write_pair(path, x1, x2):
    path.write_text(json.dumps({"dim": x1.shape[0], "X1": la.complex_to_pairs(x1), "X2": la.complex_to_pairs(x2)}))


def test_jordan_command(tmp_path, capsys):
    path = tmp_path / "xy.json"
    write_pair(path, la.SIGMA_X, la.SIGMA_Y)
    code, out, _ = run(capsys, "jordan", str(path))
    rep = json.loads(out)
    assert code == 0 and rep["m"] == 1
    assert rep["thetas"][0] == pytest.approx(np.pi / 2, abs=1e-12)
    assert rep["reconstruction_residual"] <= 1e-12
    assert np.array(rep["embedding"]).shape == (2, 2, 2)


def test_jordan_one_dimensional(tmp_path, capsys):
    path = tmp_path / "d1.json"
    write_pair(path, np.array([[1.0]]), np.array([[-1.0]]))
    code, out, _ = run(capsys, "jordan", str(path))
    rep = json.loads(out)
    assert code == 0 and rep["m"] == 1 and rep["blocks"][0]["origin"] == "1d"
    assert np.array(rep["embedding"]).shape == (2, 1, 2)


def test_jordan_rejects_non_involution(tmp_path, capsys):
    path = tmp_path / "bad.json"
    write_pair(path, la.SIGMA_X, np.diag([2.0, 1.0]))
    code, _, err = run(capsys, "jordan", str(path))
    assert code == 2 and "X2" in err


def test_ghz_ideal_file(tmp_path, capsys):
    path = tmp_path / "ideal.json"
    path.write_text(json.dumps(ideal_device().to_dict()))
    code, out, _ = run(capsys, "ghz", str(path))
    rep = json.loads(out)
    assert code == 0 and rep["epsilon"] == 0 and rep["ok"]
    assert all(abs(c["lhs"]) < 1e-15 for c in rep["checks"])


def test_ghz_random_sweep(capsys):
    code, out, _ = run(capsys, "ghz", "--random", "1000", "--seed", "7")
    rep = json.loads(out)
    assert code == 0 and rep["violations"] == [] and rep["seed"] == 7


def test_ghz_invalid_devices(tmp_path, capsys):
    d = ideal_device().to_dict()
    d["lambda"] = [0.0, -1.0]
    path = tmp_path / "neg.json"
    path.write_text(json.dumps(d))
    code, _, err = run(capsys, "ghz", str(path))
    assert code == 2 and "imaginary" in err
    code, _, _ = run(capsys, "ghz")
    assert code == 2
    code, _, _ = run(capsys, "ghz", str(path), "--random", "3")
    assert code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "xorselftest", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
