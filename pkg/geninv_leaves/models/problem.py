"""
Parsed problem files.
"""
from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from ..core.errors import ProblemFileError

ProblemKind = Literal["geninv", "perturb", "leaf", "rankchart", "critcheck"]

_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


class ProblemFile(BaseModel):
    """A v1 problem file: kind, [params] key/values and named matrices."""
    version: Literal["v1"] = "v1"
    kind: ProblemKind
    params: Dict[str, str] = Field(default_factory=dict)
    param_lines: Dict[str, int] = Field(default_factory=dict)
    matrices: Dict[str, List[List[float]]] = Field(default_factory=dict)
    matrix_lines: Dict[str, int] = Field(default_factory=dict)

    def has_matrix(self, name: str) -> bool:
        return name in self.matrices

    def matrix(self, name: str) -> np.ndarray:
        if name not in self.matrices:
            raise ProblemFileError(f"matrix {name!r} is required for kind {self.kind}")
        return np.array(self.matrices[name], dtype=float)

    def optional_matrix(self, name: str) -> Optional[np.ndarray]:
        return self.matrix(name) if name in self.matrices else None

    def matrix_names(self, prefix: str) -> List[str]:
        """Matrix names starting with prefix, in file order."""
        return sorted((n for n in self.matrices if n.startswith(prefix)), key=self.matrix_lines.get)

    def vector(self, name: str) -> np.ndarray:
        """A 1 x n or n x 1 matrix read as a vector."""
        m = self.matrix(name)
        if 1 not in m.shape:
            raise ProblemFileError(f"matrix {name!r} must be a single row or column", self.matrix_lines.get(name))
        return m.reshape(-1)

    def _raw(self, key: str) -> Optional[str]:
        return self.params.get(key)

    def param_str(self, key: str, default: Optional[str] = None) -> Optional[str]:
        value = self._raw(key)
        return default if value is None else value

    def param_float(self, key: str, default: Optional[float] = None) -> Optional[float]:
        value = self._raw(key)
        if value is None:
            return default
        try:
            return float(value)
        except ValueError:
            raise ProblemFileError(f"parameter {key!r} is not a number: {value!r}", self.param_lines.get(key))

    def param_int(self, key: str, default: Optional[int] = None) -> Optional[int]:
        value = self._raw(key)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError:
            raise ProblemFileError(f"parameter {key!r} is not an integer: {value!r}", self.param_lines.get(key))

    def param_bool(self, key: str, default: bool = False) -> bool:
        value = self._raw(key)
        if value is None:
            return default
        if value.lower() in _TRUE:
            return True
        if value.lower() in _FALSE:
            return False
        raise ProblemFileError(f"parameter {key!r} is not a boolean: {value!r}", self.param_lines.get(key))
