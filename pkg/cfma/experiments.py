"""Seeded Monte Carlo sweeps, the fixed-channel comparison table, and single-instance checks."""

import logging
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from .channel import db_to_linear, diagonal_random_channel, random_channel, sum_capacity
from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import CfmaError, DegeneratePowerSplitError, InapplicableError
from .models import (
    ChannelPair,
    PairedPoint,
    PcsSearch,
    RaCurve,
    RaPoint,
    Scheme,
    SweepConfig,
    Table1Row,
)
from .pcs import pcs_check
from .scs import (
    diagonal_check,
    scs_check,
    simo_check,
    simo_power_threshold,
    structure_detect,
    svd_check,
)

logger = logging.getLogger(__name__)

TABLE1_CHANNEL = ChannelPair(
    h1=np.array([[1.3, 1.2], [1.3, 1.8]]),
    h2=np.array([[1.4, 1.2], [1.2, 1.9]]),
)
TABLE1_POWER_GRID_DB: tuple[float, ...] = tuple(float(p) for p in range(0, 25, 2))

# (p_db, scheme) -> [achievable, errors]
Tally = dict[tuple[float, Scheme], list[int]]


def channel_for(cfg: SweepConfig, index: int) -> ChannelPair:
    """Channel realization `index` of a sweep; the same draw is used at every power point."""
    if cfg.scenario == "diagonal-mimo":
        return diagonal_random_channel(cfg.r, cfg.dist, cfg.seed, index)
    t = 1 if cfg.scenario == "simo" else cfg.t
    return random_channel(cfg.r, t, cfg.dist, cfg.seed, index)


def evaluate_realization(
    ch: ChannelPair,
    power: float,
    schemes: Sequence[Scheme],
    pcs_search: PcsSearch,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> dict[Scheme, bool | Exception]:
    """Verdict per scheme for one channel and power; failures are returned, not raised.

    The sum capacity is computed once and shared by every scheme.
    """
    verdicts: dict[Scheme, bool | Exception] = {}
    try:
        capacity = sum_capacity(ch, power, tol)
    except (CfmaError, np.linalg.LinAlgError) as e:
        return {scheme: e for scheme in schemes}
    for scheme in schemes:
        try:
            if scheme == "scs":
                verdicts[scheme] = scs_check(ch, power, "cholesky", tol, capacity).achievable
            elif scheme == "scs-perm":
                # The permutation search starts from the identity pair.
                if verdicts.get("scs") is True:
                    verdicts[scheme] = True
                else:
                    report = scs_check(ch, power, "permutations", tol, capacity)
                    verdicts[scheme] = report.achievable
            else:
                report = pcs_check(ch, power, pcs_search, tol, capacity)
                verdicts[scheme] = report.achievable
        except (CfmaError, np.linalg.LinAlgError) as e:
            verdicts[scheme] = e
    return verdicts


def run_shard(
    cfg: SweepConfig, start: int, stop: int, tol: Tolerances = DEFAULT_TOLERANCES
) -> Tally:
    """Tally realizations [start, stop) of a sweep.

    Args:
        cfg: Sweep configuration.
        start: First realization index.
        stop: One past the last realization index.
        tol: Tolerances.

    Returns:
        Mapping (p_db, scheme) to [achievable count, error count].
    """
    tally: Tally = {(p, s): [0, 0] for p in cfg.power_grid_db for s in cfg.schemes}
    for index in range(start, stop):
        ch = channel_for(cfg, index)
        for p_db in cfg.power_grid_db:
            power = db_to_linear(p_db)
            verdicts = evaluate_realization(ch, power, cfg.schemes, cfg.pcs_search, tol)
            for scheme, verdict in verdicts.items():
                if isinstance(verdict, Exception):
                    logger.warning(
                        f"Realization {index} at {p_db:g} dB, {scheme}: "
                        f"{type(verdict).__name__}: {verdict}"
                    )
                    tally[(p_db, scheme)][1] += 1
                elif verdict:
                    tally[(p_db, scheme)][0] += 1
    return tally


def merge_tallies(tallies: Iterable[Tally]) -> Tally:
    """Sum shard tallies key by key."""
    merged: Tally = {}
    for tally in tallies:
        for key, (achievable, errors) in tally.items():
            counts = merged.setdefault(key, [0, 0])
            counts[0] += achievable
            counts[1] += errors
    return merged


def _shard_bounds(realizations: int, workers: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, realizations, workers + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:], strict=True) if b > a]


def run_ra_sweep(
    cfg: SweepConfig, workers: int = 1, tol: Tolerances = DEFAULT_TOLERANCES
) -> RaCurve:
    """Fraction of channel realizations reaching the sum capacity, per power and scheme.

    Realizations are split into contiguous shards; shard tallies add up to the
    single-process result exactly.

    Args:
        cfg: Sweep configuration.
        workers: Number of worker processes (1 runs in-process).
        tol: Tolerances.

    Returns:
        RaCurve with one point per (power, scheme), power-grid order first.
    """
    if workers < 1:
        raise ValueError(f"workers must be at least 1, got {workers}")
    shards = _shard_bounds(cfg.realizations, min(workers, cfg.realizations))
    logger.info(
        f"Sweep {cfg.scenario} {cfg.r}x{cfg.t} {cfg.dist.label}: {cfg.realizations} realizations, "
        f"{len(cfg.power_grid_db)} power points, schemes {', '.join(cfg.schemes)}"
    )

    if len(shards) == 1:
        tally = run_shard(cfg, *shards[0], tol)
    else:
        with ProcessPoolExecutor(max_workers=len(shards)) as pool:
            futures = [pool.submit(run_shard, cfg, start, stop, tol) for start, stop in shards]
            tally = merge_tallies(f.result() for f in futures)

    points = tuple(
        RaPoint(
            p_db=p_db,
            scheme=scheme,
            realizations=cfg.realizations,
            achievable=tally[(p_db, scheme)][0],
            errors=tally[(p_db, scheme)][1],
        )
        for p_db in cfg.power_grid_db
        for scheme in cfg.schemes
    )
    logger.info(f"Sweep finished: {len(points)} points")
    return RaCurve(points=points)


def run_permutation_compare(
    cfg: SweepConfig, workers: int = 1, tol: Tolerances = DEFAULT_TOLERANCES
) -> tuple[PairedPoint, ...]:
    """R_A with plain versus column-permuted Cholesky precoders on the same realizations."""
    paired_cfg = replace(cfg, schemes=("scs", "scs-perm"))
    curve = run_ra_sweep(paired_cfg, workers, tol)
    plain = curve.r_a("scs")
    permuted = curve.r_a("scs-perm")
    return tuple(
        PairedPoint(p_db=p, r_a_scs=plain[p], r_a_perm=permuted[p]) for p in cfg.power_grid_db
    )


def run_table1(
    ch: ChannelPair = TABLE1_CHANNEL,
    power_grid_db: Sequence[float] = TABLE1_POWER_GRID_DB,
    pcs_search: PcsSearch | None = None,
    schemes: Sequence[Scheme] = ("scs", "pcs"),
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> list[Table1Row]:
    """Achievability verdicts for a fixed channel over a power grid.

    A checker failure at one power point is recorded on that row and the table
    carries on.
    """
    search = pcs_search or PcsSearch()
    rows: list[Table1Row] = []
    for p_db in power_grid_db:
        power = db_to_linear(p_db)
        try:
            capacity = sum_capacity(ch, power, tol)
        except (CfmaError, np.linalg.LinAlgError) as e:
            logger.warning(f"Sum capacity at {p_db:g} dB failed: {e}")
            rows.extend(
                Table1Row(p_db=p_db, scheme=s, achievable=False, error=str(e)) for s in schemes
            )
            continue
        for scheme in schemes:
            try:
                if scheme == "pcs":
                    report = pcs_check(ch, power, search, tol, capacity)
                    witness = report.witness.to_dict() if report.witness else None
                    achievable = report.achievable
                else:
                    strategy = "permutations" if scheme == "scs-perm" else "cholesky"
                    scs = scs_check(ch, power, strategy, tol, capacity)
                    witness = (
                        {"gamma": scs.gamma_witness, "gamma_interval": list(scs.gamma_interval)}
                        if scs.achievable and scs.gamma_interval
                        else None
                    )
                    achievable = scs.achievable
                rows.append(
                    Table1Row(p_db=p_db, scheme=scheme, achievable=achievable, witness=witness)
                )
            except (CfmaError, np.linalg.LinAlgError) as e:
                logger.warning(f"{scheme} at {p_db:g} dB failed: {e}")
                rows.append(Table1Row(p_db=p_db, scheme=scheme, achievable=False, error=str(e)))
        verdicts = ", ".join(
            f"{r.scheme}={'yes' if r.achievable else 'no'}" for r in rows[-len(schemes) :]
        )
        logger.info(f"{p_db:g} dB: {verdicts}")
    return rows


def _is_diagonal(m: np.ndarray, tol: float) -> bool:
    return bool(np.all(np.abs(m - np.diag(np.diag(m))) <= tol * max(1.0, float(np.max(np.abs(m))))))


def run_check(
    ch: ChannelPair,
    power: float,
    pcs_search: PcsSearch | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> dict:
    """Full report for one channel and power, including the special cases that apply.

    Returns:
        JSON-serializable dictionary. Checks that raise are reported under an
        "error" key instead of aborting the report.

    Raises:
        NoConvergenceError: If the sum capacity itself cannot be computed.
    """
    capacity = sum_capacity(ch, power, tol)
    report: dict = {
        "power": power,
        "channel": ch.to_dict(),
        "capacity": capacity.to_dict(),
    }

    for key, strategy in (("scs", "cholesky"), ("scs-perm", "permutations")):
        try:
            report[key] = scs_check(ch, power, strategy, tol, capacity).to_dict()
        except (CfmaError, np.linalg.LinAlgError) as e:
            report[key] = {"error": str(e)}
    try:
        report["pcs"] = pcs_check(ch, power, pcs_search, tol, capacity).to_dict()
    except (CfmaError, np.linalg.LinAlgError) as e:
        report["pcs"] = {"error": str(e)}

    if ch.t == 1:
        h1, h2 = ch.h1[:, 0], ch.h2[:, 0]
        report["simo"] = simo_check(h1, h2, power).to_dict()
        try:
            threshold = simo_power_threshold(h1, h2)
            report["simo_threshold"] = {
                "collinear": threshold.collinear,
                "condition_met": threshold.condition_met,
                "p_star": threshold.p_star,
            }
        except InapplicableError as e:
            report["simo_threshold"] = {"error": str(e)}

    cov = capacity.covariances
    if (
        ch.r == ch.t == 2
        and all(_is_diagonal(m, tol.matrix) for m in (*ch.channels, cov.k1, cov.k2))
    ):
        try:
            verdict = diagonal_check(ch, cov, tol)
            report["diagonal"] = {
                "condition1": verdict.condition1,
                "condition2": verdict.condition2,
                "gamma": verdict.gamma,
                "p_threshold": verdict.p_threshold,
            }
        except DegeneratePowerSplitError as e:
            report["diagonal"] = {"error": str(e)}

    if ch.r == ch.t:
        try:
            structure = structure_detect(ch, cov, tol)
        except (CfmaError, np.linalg.LinAlgError) as e:
            report["shared_svd"] = {"error": str(e)}
        else:
            report["shared_svd"] = structure.shared_svd
            values = structure.singular_values
            if values is not None:
                report["svd"] = svd_check(*values).to_dict()
    return report
