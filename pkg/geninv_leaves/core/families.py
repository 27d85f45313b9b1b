"""
Builtin level-set families f(x) = x^T Q x + b.x + c with analytic Jacobians.

circle and sphere are the unit quadrics at their north poles and also know
their exact leaf, used for error reporting.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from .errors import InvalidInputError
from .linalg import as_operator, as_vector

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LevelSetFamily:
    name: str
    q: np.ndarray
    b: np.ndarray
    c: float
    base_point: np.ndarray
    # maps the M0-component of a leaf point to its exact E*-component
    exact_height: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @property
    def ambient_dim(self) -> int:
        return self.b.size

    def f(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([x @ self.q @ x + self.b @ x + self.c])

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return ((self.q + self.q.T) @ x + self.b).reshape(1, -1)


def quadratic(q, b, c: float, x0) -> LevelSetFamily:
    """f(x) = x^T Q x + b.x + c based at x0."""
    q = as_operator(q, "Q")
    b = as_vector(b, "b")
    x0 = as_vector(x0, "x0")
    n = b.size
    if q.shape != (n, n) or x0.size != n:
        raise InvalidInputError(f"Q {q.shape}, b ({n},) and x0 ({x0.size},) do not agree")
    return LevelSetFamily("quadratic", q, b, float(c), x0)


def _unit_height(n: int) -> Callable[[np.ndarray], np.ndarray]:
    def height(p: np.ndarray) -> np.ndarray:
        out = np.zeros(n)
        out[-1] = np.sqrt(max(0.0, 1.0 - float(p @ p)))
        return out
    return height


def _unit_quadric(name: str, n: int) -> LevelSetFamily:
    x0 = np.zeros(n)
    x0[-1] = 1.0
    return LevelSetFamily(name, np.eye(n), np.zeros(n), -1.0, x0, _unit_height(n))


def circle() -> LevelSetFamily:
    """x^2 + y^2 - 1 at (0, 1)."""
    return _unit_quadric("circle", 2)


def sphere() -> LevelSetFamily:
    """x^2 + y^2 + z^2 - 1 at (0, 0, 1)."""
    return _unit_quadric("sphere", 3)


def builtin_family(name: str, params: Optional[Dict[str, object]] = None) -> LevelSetFamily:
    """
    Look up a family by name; quadratic reads Q, b, c and x0 from params.
    """
    params = params or {}
    if name == "circle":
        return circle()
    if name == "sphere":
        return sphere()
    if name == "quadratic":
        missing = [key for key in ("Q", "b", "c", "x0") if key not in params]
        if missing:
            raise InvalidInputError(f"quadratic family needs {', '.join(missing)}")
        return quadratic(params["Q"], params["b"], float(params["c"]), params["x0"])
    raise InvalidInputError(f"unknown family {name!r}; expected circle, sphere or quadratic")
