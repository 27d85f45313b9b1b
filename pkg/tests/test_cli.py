import json

import numpy as np
import pytest

from geninv_leaves import main as cli
from geninv_leaves.core.errors import DivergenceError
from geninv_leaves.core.frobenius import LeafSample
from geninv_leaves.core.linalg import SubspaceBasis
from geninv_leaves.utils.matrix_io import read_leaf_csv

from conftest import PROBLEMS

EXPECTED = sorted((PROBLEMS / "expected").glob("*.json"))


@pytest.fixture(autouse=True)
def quiet_env(monkeypatch, tmp_path):
    monkeypatch.delenv("GENINV_STEP", raising=False)
    monkeypatch.delenv("GENINV_RANK_TOL", raising=False)
    monkeypatch.chdir(tmp_path)


def run(command, problem, tmp_path, *flags):
    out = tmp_path / f"{problem.stem}.json"
    code = cli.main([command, "--input", str(problem), "--out", str(out), *flags])
    return code, out


def assert_matches(actual, expected, path="report"):
    if isinstance(expected, dict):
        for key, value in expected.items():
            assert key in actual, f"{path}.{key} missing"
            assert_matches(actual[key], value, f"{path}.{key}")
    elif isinstance(expected, list):
        assert isinstance(actual, list) and len(actual) == len(expected), path
        for i, (a, e) in enumerate(zip(actual, expected)):
            assert_matches(a, e, f"{path}.{i}")
    elif isinstance(expected, float):
        assert actual == pytest.approx(expected, abs=1e-9), path
    else:
        assert actual == expected, path


def lookup(report, dotted):
    value = report
    for part in dotted.split("."):
        value = value[int(part)] if isinstance(value, list) else value[part]
    return value


@pytest.mark.parametrize("expected", EXPECTED, ids=lambda p: p.stem)
def test_bundled_problem(expected, tmp_path):
    golden = json.loads(expected.read_text())
    command = expected.stem.split("_")[0]
    code, out = run(command, PROBLEMS / f"{expected.stem}.txt", tmp_path)
    assert code == 0
    report = json.loads(out.read_text())
    assert report["version"] == "v1"
    assert_matches(report, golden["exact"])
    for dotted, bound in golden.get("bounds", {}).items():
        value = lookup(report, dotted)
        assert value is not None and value <= bound, f"{dotted} = {value} exceeds {bound}"


@pytest.mark.parametrize("command, name", [
    ("geninv", "geninv_oblique"),
    ("perturb", "perturb_rank1"),
    ("critcheck", "critcheck_eckart"),
    ("leaf", "leaf_flat"),
    ("rankchart", "rankchart_diag"),
])
def test_reports_are_deterministic(command, name, tmp_path):
    problem = PROBLEMS / f"{name}.txt"
    first_dir, second_dir = tmp_path / "first", tmp_path / "second"
    first_dir.mkdir()
    second_dir.mkdir()
    _, first = run(command, problem, first_dir)
    _, second = run(command, problem, second_dir)
    assert first.read_bytes() == second.read_bytes()
    if command == "leaf":
        assert first.with_suffix(".csv").read_bytes() == second.with_suffix(".csv").read_bytes()


def test_leaf_csv_lands_next_to_report(tmp_path):
    code, out = run("leaf", PROBLEMS / "leaf_flat.txt", tmp_path)
    assert code == 0
    report = json.loads(out.read_text())
    table = read_leaf_csv(tmp_path / report["csv"])
    assert table.complete
    assert table.grid.shape == (5, 1)


def test_report_to_stdout(capsys):
    code = cli.main(["geninv", "--input", str(PROBLEMS / "geninv_diag.txt")])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["a_plus"] == [[1.0, 0.0], [0.0, 0.0]]


def test_flags_override_problem_params(tmp_path):
    code, out = run("geninv", PROBLEMS / "geninv_diag.txt", tmp_path, "--tol", "1e-8")
    assert code == 0
    assert json.loads(out.read_text())["tolerances"]["rank_tol"] == 1e-8


def test_identity_inverse(tmp_path):
    problem = tmp_path / "identity.txt"
    problem.write_text("version = v1\nkind = geninv\n\n[matrix A]\n3 3\n1 0 0\n0 1 0\n0 0 1\n")
    code, out = run("geninv", problem, tmp_path)
    assert code == 0
    report = json.loads(out.read_text())
    np.testing.assert_allclose(report["a_plus"], np.eye(3), atol=1e-15)
    assert report["rank"] == 3


def test_malformed_row_exits_with_line(tmp_path, capsys):
    problem = tmp_path / "bad.txt"
    problem.write_text("version = v1\nkind = geninv\n\n[matrix A]\n2 2\n1 0\n0 x\n")
    code, _ = run("geninv", problem, tmp_path)
    assert code == 2
    assert "line 7" in capsys.readouterr().err


def test_wrong_kind_is_rejected(tmp_path):
    code, _ = run("perturb", PROBLEMS / "geninv_diag.txt", tmp_path)
    assert code == 2


def test_perturbation_outside_ball(tmp_path, capsys):
    problem = tmp_path / "far.txt"
    problem.write_text("version = v1\nkind = perturb\n\n[matrix A]\n2 2\n1 0\n0 0\n\n[matrix T]\n2 2\n3 0\n0 0\n")
    code, out = run("perturb", problem, tmp_path)
    assert code == 2
    assert not out.exists()
    assert "error" in capsys.readouterr().err


def test_divergence_writes_partial_csv(tmp_path, monkeypatch):
    partial = LeafSample(
        axes=[np.array([-0.5, 0.0, 0.5])], grid=np.array([[0.0]]), psi_values=np.array([[1.0]]),
        points=np.array([[0.0, 1.0]]), integrability_residual=np.zeros(1),
        base_point=np.array([0.0, 1.0]), z0=np.zeros(1), psi0=np.ones(1),
        m0=SubspaceBasis(2, [[1.0], [0.0]]), e_star=SubspaceBasis(2, [[0.0], [1.0]]),
        method="rk4", step=0.01, complete=False, integrable=False,
    )

    def diverge(*args, **kwargs):
        raise DivergenceError("non-finite leaf value", partial=partial)

    monkeypatch.setattr(cli, "integrate_leaf", diverge)
    code, out = run("leaf", PROBLEMS / "leaf_flat.txt", tmp_path)
    assert code == 3
    assert not out.exists()
    table = read_leaf_csv(out.with_suffix(".csv"))
    assert not table.complete
    assert table.grid.shape == (1, 1)
