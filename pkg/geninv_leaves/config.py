"""
Run-time settings for the command-line front end.

Values come from the environment (optionally a .env file); problem-file
parameters and command-line flags override them in that order.
"""
import os
from typing import Any, Dict

from dotenv import load_dotenv
from pydantic import BaseModel, Field

from .core.errors import InvalidInputError


class Settings(BaseModel):
    rank_tol: float = Field(1e-10, gt=0)
    step: float = Field(1e-3, gt=0)
    extent: float = Field(0.9, ge=0)
    nodes: int = Field(21, ge=1)
    fine_radius: float = Field(1e-2, gt=0)
    fine_samples: int = Field(64, ge=1)
    seed: int = 0
    log_level: str = "WARNING"

    def merged(self, overrides: Dict[str, Any]) -> "Settings":
        """Copy with the non-None overrides applied and validated."""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None and k in data})
        try:
            return Settings(**data)
        except ValueError as e:
            raise InvalidInputError(f"invalid settings: {e}") from e


_ENV_KEYS = {
    "rank_tol": "GENINV_RANK_TOL",
    "step": "GENINV_STEP",
    "extent": "GENINV_EXTENT",
    "nodes": "GENINV_NODES",
    "fine_radius": "GENINV_FINE_RADIUS",
    "fine_samples": "GENINV_FINE_SAMPLES",
    "seed": "GENINV_SEED",
    "log_level": "GENINV_LOG_LEVEL",
}


def load_settings() -> Settings:
    """Load .env, then read GENINV_* variables over the defaults."""
    load_dotenv()
    overrides = {field: os.getenv(env) for field, env in _ENV_KEYS.items()}
    return Settings().merged(overrides)
