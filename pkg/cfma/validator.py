"""Validation of sweep configuration documents (TOML or JSON)."""

import json
import logging
import tomllib
from pathlib import Path

import numpy as np

from .errors import ConfigValidationError
from .models import SCENARIOS, SCHEMES, PcsSearch, SweepConfig, Uniform

logger = logging.getLogger(__name__)


def _require_number(data: dict, key: str, prefix: str) -> float:
    if key not in data:
        raise ConfigValidationError(f"{prefix} missing required field: {key}")
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigValidationError(f"{prefix}.{key} must be a number")
    return float(value)


def _require_int(data: dict, key: str, minimum: int | None = None) -> int:
    if key not in data:
        raise ConfigValidationError(f"Missing '{key}' field")
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigValidationError(f"'{key}' must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigValidationError(f"'{key}' must be at least {minimum}, got {value}")
    return value


def _validate_dist(data: object) -> Uniform:
    """Validate and parse the coefficient distribution."""
    if not isinstance(data, dict):
        raise ConfigValidationError("'dist' must be a table with 'lo' and 'hi'")
    kind = data.get("kind", "uniform")
    if kind != "uniform":
        raise ConfigValidationError(f"dist.kind must be 'uniform', got {kind!r}")
    lo = _require_number(data, "lo", "dist")
    hi = _require_number(data, "hi", "dist")
    if not lo < hi:
        raise ConfigValidationError(f"dist needs lo < hi, got lo={lo}, hi={hi}")
    return Uniform(lo=lo, hi=hi)


def _validate_power_grid(data: object) -> tuple[float, ...]:
    """Accept an explicit list or a {start, stop, step} range (stop inclusive)."""
    if isinstance(data, dict):
        start = _require_number(data, "start", "power_grid_db")
        stop = _require_number(data, "stop", "power_grid_db")
        step = _require_number(data, "step", "power_grid_db")
        if step <= 0 or stop < start:
            raise ConfigValidationError("power_grid_db range needs step > 0 and stop >= start")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        grid = tuple(float(round(start + i * step, 10)) for i in range(count))
    elif isinstance(data, list):
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in data):
            raise ConfigValidationError("power_grid_db entries must be numbers")
        grid = tuple(float(x) for x in data)
    else:
        raise ConfigValidationError("'power_grid_db' must be a list or a {start, stop, step} table")

    if not grid:
        raise ConfigValidationError("'power_grid_db' must not be empty")
    if any(b <= a for a, b in zip(grid, grid[1:], strict=False)):
        raise ConfigValidationError("'power_grid_db' must be strictly increasing")
    return grid


def _validate_pcs_search(data: object) -> PcsSearch:
    """Validate and parse the parallel-scheme search bounds."""
    if data is None:
        return PcsSearch()
    if not isinstance(data, dict):
        raise ConfigValidationError("'pcs_search' must be a table")
    search = PcsSearch.from_dict(data)
    if search.entry_bound < 1:
        raise ConfigValidationError("pcs_search.entry_bound must be at least 1")
    if not search.beta_grid or any(b <= 0 for b in search.beta_grid):
        raise ConfigValidationError("pcs_search.beta_grid must hold positive values")
    if search.family not in ("triangular", "exhaustive"):
        raise ConfigValidationError(
            f"pcs_search.family must be 'triangular' or 'exhaustive', got {search.family!r}"
        )
    return search


def validate_sweep_config(data: dict) -> SweepConfig:
    """Validate and parse a sweep configuration dictionary.

    Args:
        data: Raw dictionary from TOML or JSON parsing.

    Returns:
        Validated SweepConfig object.

    Raises:
        ConfigValidationError: If validation fails.
    """
    if not isinstance(data, dict):
        raise ConfigValidationError("configuration must be a table/object")
    if "scenario" not in data:
        raise ConfigValidationError("Missing 'scenario' field")
    scenario = data["scenario"]
    if scenario not in SCENARIOS:
        raise ConfigValidationError(f"'scenario' must be one of {', '.join(SCENARIOS)}")

    r = _require_int(data, "r", minimum=1)
    t = _require_int(data, "t", minimum=1)
    if scenario == "simo" and t != 1:
        raise ConfigValidationError("scenario 'simo' requires t = 1")
    if scenario == "diagonal-mimo" and r != t:
        raise ConfigValidationError("scenario 'diagonal-mimo' requires r = t")

    if "dist" not in data:
        raise ConfigValidationError("Missing 'dist' field")
    if "power_grid_db" not in data:
        raise ConfigValidationError("Missing 'power_grid_db' field")

    schemes = data.get("schemes", ["scs"])
    if isinstance(schemes, str):
        schemes = [schemes]
    if not schemes or any(s not in SCHEMES for s in schemes):
        raise ConfigValidationError(f"'schemes' must be a non-empty subset of {', '.join(SCHEMES)}")

    return SweepConfig(
        scenario=scenario,
        r=r,
        t=t,
        dist=_validate_dist(data["dist"]),
        power_grid_db=_validate_power_grid(data["power_grid_db"]),
        realizations=_require_int(data, "realizations", minimum=1),
        seed=_require_int(data, "seed", minimum=0),
        schemes=tuple(dict.fromkeys(schemes)),
        pcs_search=_validate_pcs_search(data.get("pcs_search")),
    )


def load_config(path: Path) -> SweepConfig:
    """Read and validate a TOML (.toml) or JSON configuration file.

    Raises:
        ConfigValidationError: If the file cannot be parsed or fails validation.
        OSError: If the file cannot be read.
    """
    text = path.read_text(encoding="utf-8")
    try:
        data = tomllib.loads(text) if path.suffix.lower() == ".toml" else json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigValidationError(f"{path}: could not parse configuration: {e}") from e
    logger.debug(f"Loaded configuration from {path}")
    return validate_sweep_config(data)
