import json
import subprocess
import sys

import numpy as np
import pytest

from ral import __version__
from ral.cli import (
    EXIT_FAIL,
    EXIT_NONCONV,
    EXIT_OK,
    EXIT_USAGE,
    UsageError,
    dumps,
    main,
    matrix_from_json,
    matrix_to_json,
    parse_config,
)

DIAG = {"n": 2, "m": 2, "basis": [[[1, 0], [0, 0]], [[0, 0], [0, 1]]], "x": [[1, 0], [0, 0]]}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def run_cli(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = main(argv + ["-o", str(out)])
    report = json.loads(out.read_text()) if out.exists() else None
    return code, report


def results_bytes(path):
    return dumps(json.loads(open(path).read())["results"])


def test_parse_config_resolves_defaults(tmp_path):
    pair = write(tmp_path, "pair.json", {"A": DIAG, "B": DIAG})
    cfg = parse_config(["verify-tensor", "--alpha", "2", "--seed", "7", "-i", pair, "-o", "cert.json"])
    assert cfg.command == "verify-tensor" and cfg.alpha == 2 and cfg.seed == 7
    assert cfg.input == pair and cfg.output == "cert.json"
    assert cfg.restarts == 16 and cfg.tol_eig == 1e-7 and cfg.tol_grad == 1e-9 and cfg.grid == 0.1


def test_parse_config_usage_errors(tmp_path):
    with pytest.raises(UsageError):
        parse_config(["minimize", "--alpha", "1"])
    with pytest.raises(UsageError):
        parse_config(["minimize", "-i", str(tmp_path / "missing.json")])
    with pytest.raises(SystemExit):
        parse_config(["frobnicate"])


def test_config_file_and_flag_precedence(tmp_path):
    cfg_path = write(tmp_path, "cfg.json", {"alpha": 3.0, "seed": 5, "tol-eig": 1e-6})
    cfg = parse_config(["check-phi-psi", "--config", cfg_path, "--seed", "9"])
    assert cfg.alpha == 3.0 and cfg.seed == 9 and cfg.tol_eig == 1e-6
    bad = write(tmp_path, "bad.json", {"nonsense": 1})
    with pytest.raises(UsageError):
        parse_config(["check-phi-psi", "--config", bad])


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv("RAL_THREADS", "3")
    assert parse_config(["check-phi-psi"]).threads == 3
    assert parse_config(["check-phi-psi", "--threads", "2"]).threads == 2
    monkeypatch.setenv("RAL_THREADS", "many")
    with pytest.raises(UsageError):
        parse_config(["check-phi-psi"])


def test_exit_code_usage(tmp_path, capsys):
    assert main(["minimize", "--alpha", "1"]) == EXIT_USAGE
    assert main(["minimize", "-i", str(tmp_path / "nope.json")]) == EXIT_USAGE
    assert main(["no-such-command"]) == EXIT_USAGE
    bad = write(tmp_path, "bad.json", {"n": 2, "m": 2, "basis": [[[1, 0], [0]]]})
    code, rep = run_cli(["minimize", "-i", bad], tmp_path)
    assert code == EXIT_USAGE and rep["results"]["error"] == "usage"


def test_matrix_json_round_trip(rng):
    a = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    assert np.array_equal(matrix_from_json(json.loads(json.dumps(matrix_to_json(a)))), a)
    assert np.array_equal(matrix_from_json([[1, 2], [3, 4]]), np.array([[1, 2], [3, 4]], dtype=complex))
    with pytest.raises(UsageError):
        matrix_from_json([[1, [1, 2, 3]]])


def test_dumps_seventeen_digits():
    s = dumps({"a": 0.1, "b": [1, 2.5], "c": True, "d": None})
    assert "0.10000000000000001" in s
    assert json.loads(s) == {"a": 0.1, "b": [1, 2.5], "c": True, "d": None}


def test_check_phi_psi_default_grid(tmp_path):
    csv_path = tmp_path / "rows.csv"
    code, rep = run_cli(["check-phi-psi", "--alpha", "2", "--csv", str(csv_path)], tmp_path)
    assert code == EXIT_OK
    assert rep["results"]["violation_count"] == 0
    assert rep["version"] == __version__
    assert rep["config"]["grid"] == 0.1 and rep["config"]["seed"] == 0
    assert csv_path.read_text().startswith("alpha,param1,param2,lhs,rhs,slack")


def test_verify_tensor_diagonal_example(tmp_path):
    pair = write(tmp_path, "pair.json", {"A": DIAG, "B": DIAG})
    code, rep = run_cli(["verify-tensor", "--alpha", "2", "-i", pair], tmp_path)
    assert code == EXIT_OK
    assert rep["results"]["verdict"] == "nondegenerate-local-min"


def test_verify_tensor_unsupported_pair(tmp_path):
    a = np.sqrt((1 + np.sqrt(0.96)) / 2)
    y = [[0, 0, 0], [0, 0, a], [0, 0.1 / a, 0]]
    x = np.diag(np.sqrt([0.6, 0.2, 0.2])).tolist()
    deg = {"n": 3, "m": 3, "basis": [x, y], "x": x}
    pair = write(tmp_path, "pair.json", {"A": deg, "B": deg})
    code, rep = run_cli(["verify-tensor", "-i", pair], tmp_path)
    assert code == EXIT_USAGE and rep["results"]["error"] == "UnsupportedCaseError"


def test_verify_tensor_deterministic(tmp_path):
    argv = ["verify-tensor", "--alpha", "2", "--seed", "7", "--restarts", "4"]
    assert main(argv + ["-o", str(tmp_path / "a.json")]) == EXIT_OK
    assert main(argv + ["-o", str(tmp_path / "b.json")]) == EXIT_OK
    assert results_bytes(tmp_path / "a.json") == results_bytes(tmp_path / "b.json")


def test_minimize_and_hessian(tmp_path):
    code, rep = run_cli(["minimize", "--seed", "3", "--restarts", "4"], tmp_path)
    assert code == EXIT_OK
    assert rep["results"]["residual"] <= 1e-9
    assert rep["results"]["classification"] == "nondegenerate-max"
    k = write(tmp_path, "k.json", DIAG)
    code, rep = run_cli(["hessian", "-i", k], tmp_path)
    assert code == EXIT_OK
    assert np.allclose(rep["results"]["eigenvalues"], [-4, -4])


def test_minimize_nonconvergence(tmp_path):
    code, rep = run_cli(["minimize", "--max-iters", "1", "--tol-grad", "1e-15", "--restarts", "1"], tmp_path)
    assert code == EXIT_NONCONV
    assert rep["results"]["error"] == "non-convergence"


def test_scan_proposition_exploratory(tmp_path):
    code, rep = run_cli(["scan-proposition", "--alpha", "0.5", "--samples", "512"], tmp_path)
    assert code == EXIT_OK
    assert rep["results"]["regime"] == "exploratory"
    assert rep["results"]["h_second_nonpositive_everywhere"]


def test_scan_proposition_main(tmp_path):
    code, rep = run_cli(["scan-proposition", "--alpha", "2", "--samples", "1024"], tmp_path)
    assert code == EXIT_OK and rep["results"]["non_strict"] == 0


def test_taylor_probe(tmp_path):
    code, rep = run_cli(["taylor-probe", "--alpha", "1.5"], tmp_path)
    assert code == EXIT_OK
    assert rep["results"]["trace_remainder_slope"] >= rep["results"]["threshold"]


def test_channel_min_entropy(tmp_path):
    deph = {"kraus": [[[1, 0], [0, 0]], [[0, 0], [0, 1]]]}
    code, rep = run_cli(["channel-min-entropy", "-i", write(tmp_path, "ch.json", deph), "--restarts", "4"], tmp_path)
    assert code == EXIT_OK and abs(rep["results"]["upper_bound"]) < 1e-8
    bad = {"kraus": [[[1, 0], [0, 1]], [[1, 0], [0, 1]]]}
    code, _ = run_cli(["channel-min-entropy", "-i", write(tmp_path, "bad.json", bad)], tmp_path)
    assert code == EXIT_USAGE


def test_scan_alpha(tmp_path):
    code, rep = run_cli(
        ["scan-alpha", "--alpha-range", "1.05", "3", "--alpha-step", "0.05", "--grid", "0.25", "--threads", "2"], tmp_path
    )
    assert code == EXIT_OK
    per = rep["results"]["per_alpha"]
    assert len(per) == 40
    assert all(r["min_slack"] >= -1e-12 for r in per)
    code, rep = run_cli(["scan-alpha", "--alpha-range", "0.3", "0.9", "--alpha-step", "0.1", "--inner", "convexity"], tmp_path)
    assert code == EXIT_OK
    assert all(r["h_second_nonpositive"] for r in rep["results"]["per_alpha"])
    assert main(["scan-alpha", "--alpha-range", "2", "1"]) == EXIT_USAGE


def test_verification_failure_exit_code(tmp_path):
    # I/sqrt(2) in the full 2x2 space is a saddle of Q_2, not a local maximum
    full = {"n": 2, "m": 2, "basis": [np.eye(4)[i].reshape(2, 2).tolist() for i in range(4)]}
    full["x"] = (np.eye(2) / np.sqrt(2)).tolist()
    code, rep = run_cli(["hessian", "-i", write(tmp_path, "k.json", full)], tmp_path)
    assert code == EXIT_FAIL
    assert rep["results"]["classification"] == "not-a-max"


def test_module_entry_point(tmp_path):
    out = tmp_path / "r.json"
    proc = subprocess.run(
        [sys.executable, "-m", "ral", "check-phi-psi", "--grid", "0.5", "-o", str(out)], capture_output=True
    )
    assert proc.returncode == 0
    assert json.loads(out.read_text())["command"] == "check-phi-psi"
