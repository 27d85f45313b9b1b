"""
Text formats: matrices, v1 problem files and leaf CSV.

Matrix text is a "rows cols" line followed by whitespace-separated rows.
Problem files look like

    # comment
    version = v1
    kind = geninv

    [params]
    tol = 1e-10

    [matrix A]
    2 2
    1 0
    0 0

Floats are always written with repr() so text round-trips exactly.
"""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from ..core.errors import ProblemFileError
from ..models.problem import ProblemFile

logger = logging.getLogger(__name__)


def _fmt(value: float) -> str:
    return repr(float(value))


def format_matrix(a) -> str:
    """'rows cols' header plus one line per row, full precision."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    lines.extend(" ".join(_fmt(v) for v in row) for row in a)
    return "\n".join(lines) + "\n"


def _parse_shape(text: str, line: Optional[int]) -> Tuple[int, int]:
    parts = text.split()
    if len(parts) != 2:
        raise ProblemFileError(f"expected 'rows cols', got {text.strip()!r}", line)
    try:
        rows, cols = int(parts[0]), int(parts[1])
    except ValueError:
        raise ProblemFileError(f"matrix shape must be two integers, got {text.strip()!r}", line)
    if rows < 1 or cols < 1:
        raise ProblemFileError(f"matrix shape must be positive, got {rows} x {cols}", line)
    return rows, cols


def _parse_row(text: str, cols: int, line: Optional[int]) -> List[float]:
    parts = text.split()
    if len(parts) != cols:
        raise ProblemFileError(f"expected {cols} entries, got {len(parts)}", line)
    try:
        row = [float(p) for p in parts]
    except ValueError:
        raise ProblemFileError(f"malformed matrix row {text.strip()!r}", line)
    if not all(np.isfinite(row)):
        raise ProblemFileError("matrix entries must be finite", line)
    return row


def parse_matrix(text: str) -> np.ndarray:
    """Inverse of format_matrix; errors carry 1-based line numbers."""
    lines = [(i, ln) for i, ln in enumerate(text.splitlines(), 1) if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ProblemFileError("empty matrix text")
    rows, cols = _parse_shape(lines[0][1], lines[0][0])
    body = lines[1:]
    if len(body) != rows:
        raise ProblemFileError(f"expected {rows} rows, got {len(body)}", body[-1][0] if body else lines[0][0])
    return np.array([_parse_row(ln, cols, i) for i, ln in body])


def read_matrix(path) -> np.ndarray:
    return parse_matrix(Path(path).read_text())


def write_matrix(path, a) -> None:
    Path(path).write_text(format_matrix(a))


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_problem(text: str) -> ProblemFile:
    """
    Parse a v1 problem file.

    Raises:
        ProblemFileError: with the offending 1-based line number
    """
    header: Dict[str, Tuple[str, int]] = {}
    params: Dict[str, str] = {}
    param_lines: Dict[str, int] = {}
    matrices: Dict[str, List[List[float]]] = {}
    matrix_lines: Dict[str, int] = {}

    section = "header"
    current: Optional[str] = None
    shape: Optional[Tuple[int, int]] = None
    rows: List[List[float]] = []

    def close_matrix(line: int) -> None:
        if current is not None and (shape is None or len(rows) != shape[0]):
            expected = "a shape line" if shape is None else f"{shape[0]} rows"
            raise ProblemFileError(f"matrix {current!r} is incomplete: expected {expected}", line)

    lines = text.splitlines()
    for number, raw in enumerate(lines, 1):
        line = _strip(raw)
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ProblemFileError(f"malformed section header {line!r}", number)
            close_matrix(number)
            current, shape, rows = None, None, []
            name = line[1:-1].strip()
            if name == "params":
                section = "params"
            elif name.startswith("matrix "):
                current = name[len("matrix "):].strip()
                if not current or " " in current:
                    raise ProblemFileError(f"bad matrix name in {line!r}", number)
                if current in matrices:
                    raise ProblemFileError(f"matrix {current!r} defined twice", number)
                section = "matrix"
                matrix_lines[current] = number
                matrices[current] = rows
            else:
                raise ProblemFileError(f"unknown section {name!r}", number)
            continue

        if section in ("header", "params"):
            if "=" not in line:
                raise ProblemFileError(f"expected 'key = value', got {line!r}", number)
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ProblemFileError("empty key", number)
            if section == "header":
                header[key] = (value, number)
            else:
                params[key] = value
                param_lines[key] = number
            continue

        if shape is None:
            shape = _parse_shape(line, number)
            continue
        if len(rows) >= shape[0]:
            raise ProblemFileError(f"matrix {current!r} has more than {shape[0]} rows", number)
        rows.append(_parse_row(line, shape[1], number))

    close_matrix(len(lines))

    if "version" not in header:
        raise ProblemFileError("missing 'version = v1'", 1)
    version, version_line = header["version"]
    if version != "v1":
        raise ProblemFileError(f"unsupported version {version!r}", version_line)
    if "kind" not in header:
        raise ProblemFileError("missing 'kind = ...'", 1)
    kind, kind_line = header["kind"]
    unknown = set(header) - {"version", "kind"}
    if unknown:
        key = sorted(unknown, key=lambda k: header[k][1])[0]
        raise ProblemFileError(f"unknown header key {key!r}", header[key][1])
    try:
        problem = ProblemFile(version=version, kind=kind, params=params, param_lines=param_lines,
                              matrices=matrices, matrix_lines=matrix_lines)
    except ValidationError:
        raise ProblemFileError(f"unknown problem kind {kind!r}", kind_line)
    logger.debug(f"parsed {kind} problem with matrices {sorted(matrices)}")
    return problem


def load_problem(path) -> ProblemFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ProblemFileError(f"cannot read {path}: {e}")
    return parse_problem(text)


@dataclass
class LeafTable:
    """Columns of a leaf CSV."""
    grid: np.ndarray
    psi_values: np.ndarray
    points: np.ndarray
    integrability_residual: np.ndarray
    level_residual: np.ndarray
    complete: bool


def leaf_header(k: int, l: int, n: int) -> List[str]:
    return ([f"z{i + 1}" for i in range(k)] + [f"psi{i + 1}" for i in range(l)]
            + [f"x{i + 1}" for i in range(n)] + ["integrability_residual", "level_residual"])


def write_leaf_csv(path, sample) -> None:
    """
    Write a LeafSample-like object (grid, psi_values, points,
    integrability_residual, level_residual, complete) as CSV.

    The first line is a comment flagging complete or partial output.
    """
    grid, psi, pts = sample.grid, sample.psi_values, sample.points
    rows = grid.shape[0]
    level = sample.level_residual if sample.level_residual is not None else np.full(rows, np.nan)
    with open(path, "w", newline="") as fh:
        fh.write(f"# complete = {'true' if sample.complete else 'false'}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(leaf_header(grid.shape[1], psi.shape[1], pts.shape[1]))
        for i in range(rows):
            values = list(grid[i]) + list(psi[i]) + list(pts[i]) + [sample.integrability_residual[i], level[i]]
            writer.writerow([_fmt(v) for v in values])


def read_leaf_csv(path) -> LeafTable:
    """Inverse of write_leaf_csv."""
    with open(path, newline="") as fh:
        flag = fh.readline().strip()
        if not flag.startswith("# complete = "):
            raise ProblemFileError("leaf CSV must start with '# complete = ...'", 1)
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader], dtype=float)
    k = sum(1 for h in header if h.startswith("z"))
    l = sum(1 for h in header if h.startswith("psi"))
    n = sum(1 for h in header if h.startswith("x"))
    if data.size == 0:
        data = np.zeros((0, k + l + n + 2))
    return LeafTable(
        grid=data[:, :k],
        psi_values=data[:, k:k + l],
        points=data[:, k + l:k + l + n],
        integrability_residual=data[:, k + l + n],
        level_residual=data[:, k + l + n + 1],
        complete=flag.endswith("true"),
    )
