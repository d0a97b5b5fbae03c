"""CLI entry point for cfma."""

import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import TYPE_CHECKING, NoReturn

import click
from dotenv import load_dotenv

if TYPE_CHECKING:
    from cfma.models import SweepConfig


# Load .env file - search current directory and parent directories
def _load_env_file() -> None:
    """Load .env file from current directory or project root."""
    current = Path.cwd()

    # Check current directory first
    env_path = current / ".env"
    if env_path.exists():
        load_dotenv(env_path, override=False)
        return

    # Walk up to find .env near pyproject.toml
    for parent in current.parents:
        if (parent / "pyproject.toml").exists():
            env_path = parent / ".env"
            if env_path.exists():
                load_dotenv(env_path, override=False)
            return


_load_env_file()

EXIT_SUCCESS = 0
EXIT_CONFIG_ERROR = 2
EXIT_IO_ERROR = 3

SCHEME_CHOICES = {"scs": ("scs",), "pcs": ("pcs",), "both": ("scs", "pcs")}


def setup_logging(verbose: bool) -> None:
    """Configure logging based on verbosity."""
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def _parse_matrix(ctx: click.Context, param: click.Parameter, value: str | None) -> list | None:
    """Parse "a,b;c,d" into a list of rows."""
    if value is None:
        return None
    try:
        rows = [[float(x) for x in row.split(",")] for row in value.split(";")]
    except ValueError as e:
        raise click.BadParameter(f"expected rows like '1,2;3,4': {e}") from e
    if len({len(r) for r in rows}) != 1:
        raise click.BadParameter("every row needs the same number of entries")
    return rows


def _fail(message: str, code: int) -> NoReturn:
    click.echo(message, err=True)
    sys.exit(code)


def _write(rows: list[dict], fmt: str, out: str | None, config: dict, columns: tuple) -> None:
    """Write to --out, or to stdout when no path was given."""
    from cfma.emit import emit, render

    if out is None:
        click.echo(render(rows, fmt, config, columns), nl=False)
    else:
        emit(rows, fmt, Path(out), config, columns)
        click.echo(f"Wrote {len(rows)} rows to {out}")


def _load_sweep_config(
    config: str, seed: int | None, scheme: str | None, entry_bound: int | None
) -> "SweepConfig":
    from cfma.validator import load_config

    cfg = load_config(Path(config))
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if scheme is not None:
        cfg = replace(cfg, schemes=SCHEME_CHOICES[scheme])
    if entry_bound is not None:
        cfg = replace(cfg, pcs_search=replace(cfg.pcs_search, entry_bound=entry_bound))
    return cfg


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable verbose output.")
def cli(verbose: bool) -> None:
    """Compute-forward multiple access: sum-capacity checks for two-user MIMO MACs."""
    setup_logging(verbose)


@cli.command()
@click.option(
    "--config",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="Sweep configuration (TOML or JSON).",
)
@click.option("--seed", type=int, default=None, help="Override the configured seed.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file.")
@click.option(
    "--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", help="Output format."
)
@click.option(
    "--scheme",
    type=click.Choice(sorted(SCHEME_CHOICES)),
    default=None,
    help="Override the configured schemes.",
)
@click.option("--entry-bound", type=click.IntRange(min=1), default=None, help="PCS entry bound.")
@click.option("--workers", type=click.IntRange(min=1), default=1, help="Worker processes.")
def sweep(
    config: str,
    seed: int | None,
    out: str | None,
    fmt: str,
    scheme: str | None,
    entry_bound: int | None,
    workers: int,
) -> None:
    """Run a seeded R_A sweep over a power grid."""
    from cfma.config import Tolerances
    from cfma.emit import RA_COLUMNS, ra_rows
    from cfma.errors import ConfigValidationError, EmitError
    from cfma.experiments import run_ra_sweep

    try:
        tol = Tolerances.from_env()
        cfg = _load_sweep_config(config, seed, scheme, entry_bound)
    except ConfigValidationError as e:
        _fail(f"Configuration error: {e}", EXIT_CONFIG_ERROR)
    except OSError as e:
        _fail(f"Could not read {config}: {e}", EXIT_IO_ERROR)

    curve = run_ra_sweep(cfg, workers=workers, tol=tol)
    try:
        _write(ra_rows(curve.points), fmt, out, cfg.to_dict(), RA_COLUMNS)
    except EmitError as e:
        _fail(f"Output error: {e}", EXIT_IO_ERROR)


@cli.command()
@click.option("--h1", callback=_parse_matrix, default=None, help='H1 rows, e.g. "1.3,1.2;1.3,1.8".')
@click.option("--h2", callback=_parse_matrix, default=None, help="H2 rows, same layout as --h1.")
@click.option(
    "--power-db",
    "power_db",
    type=float,
    multiple=True,
    help="Power point in dB (repeatable; default 0..24 step 2).",
)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file.")
@click.option(
    "--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", help="Output format."
)
@click.option(
    "--scheme", type=click.Choice(sorted(SCHEME_CHOICES)), default="both", help="Schemes to test."
)
@click.option("--entry-bound", type=click.IntRange(min=1), default=None, help="PCS entry bound.")
def table1(
    h1: list | None,
    h2: list | None,
    power_db: tuple[float, ...],
    out: str | None,
    fmt: str,
    scheme: str,
    entry_bound: int | None,
) -> None:
    """Achievability verdicts for one fixed channel across a power grid."""
    import numpy as np

    from cfma.config import Tolerances
    from cfma.emit import RA_COLUMNS, table1_rows
    from cfma.errors import ConfigValidationError, EmitError
    from cfma.experiments import TABLE1_CHANNEL, TABLE1_POWER_GRID_DB, run_table1
    from cfma.models import ChannelPair, PcsSearch

    if (h1 is None) != (h2 is None):
        _fail("Configuration error: give both --h1 and --h2 or neither", EXIT_CONFIG_ERROR)
    try:
        tol = Tolerances.from_env()
        ch = TABLE1_CHANNEL if h1 is None else ChannelPair(h1=np.array(h1), h2=np.array(h2))
    except (ConfigValidationError, ValueError) as e:
        _fail(f"Configuration error: {e}", EXIT_CONFIG_ERROR)

    search = PcsSearch() if entry_bound is None else PcsSearch(entry_bound=entry_bound)
    grid = tuple(sorted(power_db)) if power_db else TABLE1_POWER_GRID_DB
    rows = run_table1(ch, grid, search, SCHEME_CHOICES[scheme], tol)
    config = {
        "channel": ch.to_dict(),
        "power_grid_db": list(grid),
        "schemes": list(SCHEME_CHOICES[scheme]),
        "pcs_search": search.to_dict(),
    }
    try:
        _write(table1_rows(rows), fmt, out, config, RA_COLUMNS)
    except EmitError as e:
        _fail(f"Output error: {e}", EXIT_IO_ERROR)


@cli.command("perm-compare")
@click.option(
    "--config",
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="Sweep configuration (TOML or JSON).",
)
@click.option("--seed", type=int, default=None, help="Override the configured seed.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file.")
@click.option(
    "--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", help="Output format."
)
@click.option("--workers", type=click.IntRange(min=1), default=1, help="Worker processes.")
def perm_compare(config: str, seed: int | None, out: str | None, fmt: str, workers: int) -> None:
    """Compare plain and column-permuted Cholesky precoders on the same realizations."""
    from cfma.config import Tolerances
    from cfma.emit import PAIRED_COLUMNS, paired_rows
    from cfma.errors import ConfigValidationError, EmitError
    from cfma.experiments import run_permutation_compare

    try:
        tol = Tolerances.from_env()
        cfg = _load_sweep_config(config, seed, None, None)
    except ConfigValidationError as e:
        _fail(f"Configuration error: {e}", EXIT_CONFIG_ERROR)
    except OSError as e:
        _fail(f"Could not read {config}: {e}", EXIT_IO_ERROR)

    points = run_permutation_compare(cfg, workers=workers, tol=tol)
    try:
        _write(paired_rows(points), fmt, out, cfg.to_dict(), PAIRED_COLUMNS)
    except EmitError as e:
        _fail(f"Output error: {e}", EXIT_IO_ERROR)


@cli.command()
@click.option("--h1", callback=_parse_matrix, required=True, help='H1 rows, e.g. "1,0;0,1".')
@click.option("--h2", callback=_parse_matrix, required=True, help="H2 rows, same layout.")
@click.option("--power-db", "power_db", type=float, required=True, help="Power in dB.")
@click.option("--entry-bound", type=click.IntRange(min=1), default=None, help="PCS entry bound.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output JSON file.")
def check(
    h1: list, h2: list, power_db: float, entry_bound: int | None, out: str | None
) -> None:
    """Report every applicable check for a single channel and power."""
    import numpy as np

    from cfma.channel import db_to_linear
    from cfma.config import Tolerances
    from cfma.errors import CfmaError, ConfigValidationError
    from cfma.experiments import run_check
    from cfma.models import ChannelPair, PcsSearch

    try:
        tol = Tolerances.from_env()
        ch = ChannelPair(h1=np.array(h1), h2=np.array(h2))
    except (ConfigValidationError, ValueError) as e:
        _fail(f"Configuration error: {e}", EXIT_CONFIG_ERROR)

    search = PcsSearch() if entry_bound is None else PcsSearch(entry_bound=entry_bound)
    try:
        report = run_check(ch, db_to_linear(power_db), search, tol)
    except (CfmaError, np.linalg.LinAlgError) as e:
        _fail(f"Numerical failure: {e}", EXIT_IO_ERROR)
    report["power_db"] = power_db
    text = json.dumps(report, indent=2) + "\n"
    if out is None:
        click.echo(text, nl=False)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as e:
        _fail(f"Could not write {out}: {e}", EXIT_IO_ERROR)
    click.echo(f"Wrote report to {out}")


if __name__ == "__main__":
    cli()
