"""Numeric tolerance configuration with environment overrides."""

import os
from dataclasses import dataclass, replace

from .errors import ConfigValidationError

ENV_PREFIX = "CFMA_"


@dataclass(frozen=True)
class Tolerances:
    """Tolerances shared by the kernel, capacity, and achievability checks."""

    matrix: float = 1e-9
    rank: float = 1e-8
    achievability: float = 1e-7
    wf_bits: float = 1e-10
    wf_max_iter: int = 10_000
    structure: float = 1e-6
    fixed_point: float = 1e-9
    fixed_point_max_iter: int = 100

    @classmethod
    def from_env(cls) -> "Tolerances":
        """Build tolerances from CFMA_* environment variables, falling back to defaults."""
        overrides: dict[str, float | int] = {}
        float_fields = {
            "MATRIX_TOL": "matrix",
            "RANK_TOL": "rank",
            "ACHIEVABILITY_TOL": "achievability",
            "WF_TOL": "wf_bits",
            "STRUCTURE_TOL": "structure",
        }
        for env_suffix, field_name in float_fields.items():
            raw = os.environ.get(ENV_PREFIX + env_suffix)
            if raw is None:
                continue
            try:
                value = float(raw)
            except ValueError as e:
                raise ConfigValidationError(
                    f"{ENV_PREFIX}{env_suffix} must be a number, got {raw!r}"
                ) from e
            if value <= 0:
                raise ConfigValidationError(f"{ENV_PREFIX}{env_suffix} must be positive")
            overrides[field_name] = value

        raw_iter = os.environ.get(ENV_PREFIX + "WF_MAX_ITER")
        if raw_iter is not None:
            try:
                max_iter = int(raw_iter)
            except ValueError as e:
                raise ConfigValidationError(
                    f"{ENV_PREFIX}WF_MAX_ITER must be an integer, got {raw_iter!r}"
                ) from e
            if max_iter < 1:
                raise ConfigValidationError(f"{ENV_PREFIX}WF_MAX_ITER must be at least 1")
            overrides["wf_max_iter"] = max_iter

        return replace(cls(), **overrides)

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "matrix": self.matrix,
            "rank": self.rank,
            "achievability": self.achievability,
            "wf_bits": self.wf_bits,
            "wf_max_iter": self.wf_max_iter,
            "structure": self.structure,
            "fixed_point": self.fixed_point,
            "fixed_point_max_iter": self.fixed_point_max_iter,
        }


DEFAULT_TOLERANCES = Tolerances()
