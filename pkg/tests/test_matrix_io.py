import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from geninv_leaves.core.errors import ProblemFileError
from geninv_leaves.core.frobenius import (
    alpha_field_kernel,
    integrate_leaf,
    kernel_family,
    leaf_problem,
)
from geninv_leaves.core.geninv import moore_penrose_geninv
from geninv_leaves.utils.matrix_io import (
    format_matrix,
    leaf_header,
    load_problem,
    parse_matrix,
    parse_problem,
    read_leaf_csv,
    write_leaf_csv,
)

from conftest import PROBLEMS

GENINV = """\
# pseudoinverse of diag(1, 0)
version = v1
kind = geninv

[params]
tol = 1e-12   # tighter than the default

[matrix A]
2 2
1 0
0 0
"""


def error_line(text: str) -> int:
    with pytest.raises(ProblemFileError) as info:
        parse_problem(text)
    return info.value.line


def test_parse_problem():
    problem = parse_problem(GENINV)
    assert problem.kind == "geninv"
    assert problem.param_float("tol") == 1e-12
    assert_array_equal(problem.matrix("A"), np.diag([1.0, 0.0]))
    assert problem.matrix_lines["A"] == 8


def test_matrix_order_follows_file():
    problem = load_problem(PROBLEMS / "rankchart_diag.txt")
    assert problem.matrix_names("X") == ["X_anchor", "X_rank1", "X_rank2"]
    assert problem.matrix_names("Z") == ["Z_leaf"]


@pytest.mark.parametrize("name", sorted(p.name for p in PROBLEMS.glob("*.txt")))
def test_bundled_problems_parse(name):
    assert load_problem(PROBLEMS / name).version == "v1"


def test_malformed_row_reports_line():
    assert error_line(GENINV.replace("0 0\n", "0 zero\n")) == 11


def test_short_row_reports_line():
    assert error_line(GENINV.replace("1 0\n", "1\n")) == 10


def test_non_finite_entry():
    assert error_line(GENINV.replace("0 0\n", "0 inf\n")) == 11


def test_incomplete_matrix():
    assert error_line(GENINV.replace("0 0\n", "")) == 10


def test_extra_row():
    assert error_line(GENINV + "3 3\n") == 12


def test_duplicate_matrix():
    text = GENINV + "\n[matrix A]\n1 1\n2\n"
    assert error_line(text) == 13


def test_unknown_section():
    assert error_line(GENINV + "[vectors]\n") == 12


def test_header_errors():
    assert error_line(GENINV.replace("version = v1", "version = v2")) == 2
    assert error_line(GENINV.replace("kind = geninv", "kind = solve")) == 3
    assert error_line(GENINV.replace("kind = geninv", "kind = geninv\nmode = fast")) == 4
    assert error_line(GENINV.replace("version = v1\n", "")) == 1


def test_missing_file(tmp_path):
    with pytest.raises(ProblemFileError):
        load_problem(tmp_path / "absent.txt")


def test_bad_parameter_value():
    problem = parse_problem(GENINV.replace("tol = 1e-12", "tol = small"))
    with pytest.raises(ProblemFileError) as info:
        problem.param_float("tol")
    assert info.value.line == 6


def test_error_message_has_line_prefix():
    with pytest.raises(ProblemFileError) as info:
        parse_problem(GENINV.replace("0 0\n", "0 zero\n"))
    assert str(info.value).startswith("line 11: ")


def test_matrix_text_keeps_full_precision():
    a = np.array([[0.1, 1.0 / 3.0], [np.pi, -2.5e-17]])
    assert_array_equal(parse_matrix(format_matrix(a)), a)


def test_leaf_header():
    assert leaf_header(1, 1, 2) == ["z1", "psi1", "x1", "x2", "integrability_residual", "level_residual"]


def test_leaf_csv(tmp_path, circle_family):
    x0 = circle_family.base_point
    gi = moore_penrose_geninv(circle_family.jacobian(x0))
    field = alpha_field_kernel(circle_family.jacobian, x0, gi)
    problem = leaf_problem(x0, kernel_family(circle_family.jacobian, 2), gi.range_plus)
    sample = integrate_leaf(problem, field, 0.5, step=0.05, nodes=5)

    path = tmp_path / "leaf.csv"
    write_leaf_csv(path, sample)
    assert path.read_text().splitlines()[0] == "# complete = true"
    table = read_leaf_csv(path)
    assert table.complete
    assert_array_equal(table.grid, sample.grid)
    assert_array_equal(table.psi_values, sample.psi_values)
    assert_array_equal(table.points, sample.points)
    assert np.all(np.isnan(table.level_residual))

    sample.complete = False
    sample.level_residual = np.zeros(5)
    write_leaf_csv(path, sample)
    table = read_leaf_csv(path)
    assert not table.complete
    assert_allclose(table.level_residual, 0.0)


def test_leaf_csv_requires_flag_line(tmp_path):
    path = tmp_path / "leaf.csv"
    path.write_text("z1,psi1\n0.0,1.0\n")
    with pytest.raises(ProblemFileError):
        read_leaf_csv(path)
