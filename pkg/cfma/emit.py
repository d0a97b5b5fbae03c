"""CSV and JSON artifacts for sweep, table and comparison results."""

import json
import logging
from collections.abc import Iterable, Sequence
from datetime import UTC, datetime
from pathlib import Path
from typing import Literal

import polars as pl

from .channel import RNG_IDENTIFIER
from .errors import EmitError
from .models import PairedPoint, RaPoint, Table1Row

logger = logging.getLogger(__name__)

OutputFormat = Literal["csv", "json"]

RA_COLUMNS: tuple[str, ...] = ("p_db", "scheme", "realizations", "achievable", "errors", "r_a")
PAIRED_COLUMNS: tuple[str, ...] = ("p_db", "r_a_scs", "r_a_perm", "delta")
REALIZATION_REUSE = "fixed-across-power-grid"


def format_float(value: float) -> str:
    """Six significant digits."""
    return f"{value:.6g}"


def ra_rows(points: Iterable[RaPoint]) -> list[dict]:
    """One row per (power, scheme)."""
    return [p.to_dict() for p in points]


def table1_rows(rows: Iterable[Table1Row]) -> list[dict]:
    """Table rows in the sweep schema (one realization each), keeping witness and error."""
    out = []
    for row in rows:
        out.append(
            {
                "p_db": row.p_db,
                "scheme": row.scheme,
                "realizations": 1,
                "achievable": int(row.achievable),
                "errors": int(row.error is not None),
                "r_a": float(row.achievable),
                "witness": row.witness,
                "error": row.error,
            }
        )
    return out


def paired_rows(points: Iterable[PairedPoint]) -> list[dict]:
    """Plain versus permuted R_A with their difference."""
    return [p.to_dict() for p in points]


def render_csv(rows: Sequence[dict], config: dict, columns: Sequence[str] = RA_COLUMNS) -> str:
    """CSV text: header row first, then the data, then `# config:` and `# rng:` comment lines."""
    data: dict[str, list] = {}
    for col in columns:
        values = [row[col] for row in rows]
        if values and isinstance(values[0], float):
            data[col] = [format_float(v) for v in values]
        else:
            data[col] = values
    frame = pl.DataFrame(data)
    trailer = (
        f"# config: {json.dumps(config, sort_keys=True, separators=(',', ':'))}\n"
        f"# rng: {RNG_IDENTIFIER}\n"
    )
    return frame.write_csv(line_terminator="\n") + trailer


def render_json(rows: Sequence[dict], config: dict) -> str:
    """JSON document {config, rng, realization_reuse, generated_utc, rows}."""
    document = {
        "config": config,
        "rng": RNG_IDENTIFIER,
        "realization_reuse": REALIZATION_REUSE,
        "generated_utc": datetime.now(UTC).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "rows": list(rows),
    }
    return json.dumps(document, indent=2, ensure_ascii=False) + "\n"


def render(
    rows: Sequence[dict],
    fmt: OutputFormat,
    config: dict,
    columns: Sequence[str] = RA_COLUMNS,
) -> str:
    """Render rows in the requested format."""
    if fmt == "csv":
        return render_csv(rows, config, columns)
    if fmt == "json":
        return render_json(rows, config)
    raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")


def emit(
    rows: Sequence[dict],
    fmt: OutputFormat,
    path: Path,
    config: dict,
    columns: Sequence[str] = RA_COLUMNS,
) -> None:
    """Write rows to a file with LF line endings.

    Raises:
        EmitError: If the file cannot be written.
    """
    text = render(rows, fmt, config, columns)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise EmitError(f"could not write {path}: {e}") from e
    logger.info(f"Wrote {len(rows)} rows to {path}")


def read_csv(path: Path) -> pl.DataFrame:
    """Read an emitted CSV back, skipping the provenance comments."""
    try:
        return pl.read_csv(path, comment_prefix="#")
    except OSError as e:
        raise EmitError(f"could not read {path}: {e}") from e
