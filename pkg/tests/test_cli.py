import json
import subprocess
import sys

import numpy as np
import pytest

from singular_svar import moments as mom
from singular_svar import refixtures as rf
from singular_svar import yulewalker as yw
from singular_svar.cli import main, render_text
from singular_svar.model import SvarModel, model_to_dict


def write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def nk_file(tmp_path):
    m, _ = rf.nk_svar(rf.b_closed_form(0.75, 0.5))
    return write(tmp_path / "nk.json", model_to_dict(m, rf.NK_NOISE_SPEC, a0_identity=True))


@pytest.fixture
def diag_files(tmp_path):
    g0 = np.diag([1.0, 1.0, 0.0])
    cov = write(tmp_path / "cov.json", {"n": 3, "h": 1, "gammas": [g0.tolist(), (0.5 * g0).tolist()]})
    out = {}
    for name, sel in [("overid", [0, 1, 0]), ("kernel", [0, 0, 1])]:
        c = np.kron(np.eye(3), np.array([sel], dtype=float))
        out[name] = write(tmp_path / f"{name}.json", {"restrictions": {"system_matrix": {"C": c.tolist()}}})
    return cov, out


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_analyze_reference_model(capsys, nk_file):
    code, out, _ = run(capsys, "analyze", "--model", nk_file)
    assert code == 0
    assert "compatible: true" in out and "jacobian rank: 6/6" in out
    assert "necessary but not sufficient" in out


def test_analyze_json_round_trip(capsys, nk_file, tmp_path):
    report = tmp_path / "report.json"
    assert main(["analyze", "--model", nk_file, "--format", "json", "--out", str(report)]) == 0
    doc = json.loads(report.read_text())
    code, text, _ = run(capsys, "analyze", "--model", nk_file)
    assert render_text(doc) == text
    assert doc["noise"]["jacobian_rank"] == 6 and doc["verdict"] == "identified"


def test_analyze_q_equals_n_warns(capsys, tmp_path):
    m = SvarModel(np.eye(2), (0.5 * np.eye(2),), np.eye(2))
    spec = [{"fix": {"target": "B", "row": 1, "col": 2, "value": 0}}]
    path = write(tmp_path / "full.json", model_to_dict(m, spec))
    code, out, _ = run(capsys, "analyze", "--model", path)
    assert "q = n" in out and "degenerate" in out


def test_analyze_counterexample(capsys, diag_files):
    cov, restr = diag_files
    code, out, _ = run(capsys, "analyze", "--cov", cov, "--restrictions", restr["overid"], "--p", "1")
    assert code == 2 and "unique: false, over-identifying: true" in out
    code, out, _ = run(capsys, "analyze", "--cov", cov, "--restrictions", restr["kernel"], "--p", "1")
    assert code == 0 and "unique: true, over-identifying: false" in out


def test_analyze_system_restrictions_from_model(capsys, tmp_path):
    m = yw.degenerate_example(3, 1, seed=0)
    ts = mom.build_toeplitz(mom.autocovariances(m, 1), 1)
    c = np.kron(np.eye(3), ts.svd.v_null.T)
    doc = model_to_dict(m)
    doc["restrictions"]["system_matrix"] = {"C": c.tolist()}
    code, out, _ = run(capsys, "analyze", "--model", write(tmp_path / "m.json", doc))
    assert "[system restrictions]" in out and "unique: true" in out


def test_malformed_json_reports_position(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "n": 3,\n  "p": }\n')
    code, _, err = run(capsys, "analyze", "--model", str(bad))
    assert code == 1 and "line 3" in err and "column" in err


def test_input_errors_exit_one(capsys, tmp_path):
    assert run(capsys, "analyze", "--model", str(tmp_path / "missing.json"))[0] == 1
    assert run(capsys, "analyze")[0] == 1
    assert run(capsys, "simulate", "x.json", "-T", "5", "--seed", "-1")[0] == 1
    assert run(capsys, "detect", "x.json", "--tol", "1e-8", "--rtol", "1e-8")[0] == 1
    doc = {"n": 2, "p": 1, "q": 1, "A0": [[1, 0], [0, 1]], "A": [[[0.5, 0], [0, 0.5]]], "B": [[1], [1], [1]]}
    assert run(capsys, "analyze", "--model", write(tmp_path / "shape.json", doc))[0] == 1


def test_detect_on_reference_model(capsys, tmp_path):
    m, _ = rf.nk_svar(rf.b_closed_form(0.75, 0.5))
    cov = write(tmp_path / "cov.json", mom.autocovariances(m, 4).to_dict())
    code, out, _ = run(capsys, "detect", cov, "--rmax", "4", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["q_hat"] == 2 and doc["p_hat"] == 1


def test_detect_not_stabilized_exits_two(capsys, tmp_path):
    z = np.zeros((2, 2))
    g3 = np.array([[0.0, 0.0], [1.0, 0.0]])
    cov = write(tmp_path / "c.json", {"gammas": [np.eye(2).tolist(), z.tolist(), z.tolist(), g3.tolist()]})
    assert run(capsys, "detect", cov, "--rmax", "4")[0] == 2


@pytest.mark.parametrize("method", ["pivot", "minnorm"])
def test_solve_yw(capsys, tmp_path, method):
    m = yw.degenerate_example(3, 2, seed=1)
    cov = write(tmp_path / "cov.json", mom.autocovariances(m, 4).to_dict())
    code, out, _ = run(capsys, "solve-yw", cov, "--p", "2", "--method", method, "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["s"] >= 1 and doc["residual"] < 1e-9
    np.testing.assert_allclose(doc["sigma_u"], mom.build_toeplitz(mom.autocovariances(m, 2), 2).sigma_u, atol=1e-9)
    assert (doc["pivot"] is not None) == (method == "pivot")


def test_simulate_is_byte_identical(tmp_path, capsys):
    m = yw.degenerate_example(3, 2, seed=1)
    model = write(tmp_path / "m.json", model_to_dict(m))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", model, "-T", "200", "--seed", "42", "--out", str(a)]) == 0
    assert main(["simulate", model, "-T", "200", "--seed", "42", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "y1,y2,y3" and len(a.read_text().splitlines()) == 201


def test_genericity(capsys, tmp_path):
    m = yw.degenerate_example(3, 2, seed=3)
    cov = write(tmp_path / "cov.json", mom.autocovariances(m, 3).to_dict())
    code, out, _ = run(capsys, "genericity", cov, "--p", "2", "--trials", "15", "--seed", "5", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["fraction"] == 1.0 and doc["trials"] == 15 and doc["seed"] == 5


def test_reproduce_paper(capsys):
    code, out, _ = run(capsys, "reproduce-paper")
    lines = [ln for ln in out.splitlines() if ln.startswith(("PASS", "FAIL"))]
    assert code == 0 and lines and all(ln.startswith("PASS") for ln in lines)


def test_reproduce_paper_off_parameters_fails(capsys):
    assert run(capsys, "reproduce-paper", "--tau", "0")[0] == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "singular_svar", "reproduce-paper", "--format", "json"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and json.loads(res.stdout)["passed"] is True
