"""Two-user Gaussian MIMO MAC: sum capacity by iterative water-filling and seeded channels."""

import logging

import numpy as np
import numpy.typing as npt
from scipy import linalg as sla

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import NoConvergenceError
from .matkernel import Matrix, Vector, det, slogdet2, sym_eigen, symmetrize
from .models import CapacityResult, ChannelPair, CovariancePair, Uniform

logger = logging.getLogger(__name__)

RNG_IDENTIFIER = "numpy.random.Philox4x64-10 key=(seed mod 2^64) + 2^64*realization_index"

_MASK64 = (1 << 64) - 1
_MAX_EXTRAPOLATION = 2.0**20
_BISECTION_STEPS = 40


def db_to_linear(p_db: float) -> float:
    """Convert a power in dB to linear scale."""
    return float(10.0 ** (p_db / 10.0))


def make_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, realization index)."""
    key = (int(seed) & _MASK64) | ((int(index) & _MASK64) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def _receive(ch: ChannelPair, k1: Matrix, k2: Matrix) -> Matrix:
    total = np.eye(ch.r)
    for h, k in zip(ch.channels, (k1, k2), strict=True):
        total = total + h @ k @ h.T
    return symmetrize(total)


def receive_covariance(ch: ChannelPair, cov: CovariancePair) -> Matrix:
    """I_r + H1·K1·H1ᵀ + H2·K2·H2ᵀ."""
    return _receive(ch, cov.k1, cov.k2)


def c_d(ch: ChannelPair, cov: CovariancePair) -> float:
    """Determinant |I + H1K1H1ᵀ + H2K2H2ᵀ|."""
    return det(receive_covariance(ch, cov))


def water_fill(gains: npt.ArrayLike, power: float) -> Vector:
    """Single-user water-filling over parallel channels with the given gains.

    Channels are dropped weakest-first until the water level clears every
    remaining inverse gain, so inactive channels get exactly zero.

    Args:
        gains: Non-negative channel gains.
        power: Total power budget.

    Returns:
        Power per channel, same order as gains, summing to power when any gain is positive.
    """
    g = np.asarray(gains, dtype=float)
    alloc = np.zeros_like(g)
    if power <= 0 or g.size == 0:
        return alloc
    peak = float(np.max(g))
    if peak <= 0:
        return alloc

    active = np.nonzero(g > np.finfo(float).eps * peak)[0]
    order = active[np.argsort(g[active])[::-1]]
    inverse = 1.0 / g[order]

    used = order.size
    level = (power + inverse[:used].sum()) / used
    while used > 1 and level <= inverse[used - 1]:
        used -= 1
        level = (power + inverse[:used].sum()) / used

    alloc[order[:used]] = np.maximum(level - inverse[:used], 0.0)
    return alloc


def _single_user_step(h_own: Matrix, h_other: Matrix, k_other: Matrix, power: float) -> Matrix:
    """Best response of one user treating the other as coloured noise."""
    noise = symmetrize(np.eye(h_own.shape[0]) + h_other @ k_other @ h_other.T)
    whitened = h_own.T @ sla.solve(noise, h_own, assume_a="pos")
    gains, vectors = sym_eigen(whitened)
    alloc = water_fill(np.clip(gains, 0.0, None), power)
    return symmetrize(vectors @ np.diag(alloc) @ vectors.T)


def _objective_bits(ch: ChannelPair, k1: Matrix, k2: Matrix) -> float:
    return 0.5 * slogdet2(_receive(ch, k1, k2))


def duality_gap(ch: ChannelPair, k1: Matrix, k2: Matrix, power: float) -> float:
    """Upper bound (bits) on how far (K1, K2) is below the sum capacity.

    With G_l = H_lᵀ·S⁻¹·H_l / (2 ln 2) the gradient of the objective at
    S = I + ΣH_l·K_l·H_lᵀ, the bound is Σ_l P·λmax(G_l) − tr(G_l·K_l).
    It is zero exactly at the optimum.
    """
    noise = _receive(ch, k1, k2)
    gap = 0.0
    for h, k in zip(ch.channels, (k1, k2), strict=True):
        grad = h.T @ sla.solve(noise, h, assume_a="pos") / (2.0 * np.log(2.0))
        top = float(sym_eigen(grad)[0][0])
        gap += power * top - float(np.trace(grad @ k))
    return gap


def _is_psd(m: Matrix) -> bool:
    return bool(np.linalg.eigvalsh(symmetrize(m))[0] >= 0.0)


def _extrapolate(
    ch: ChannelPair, start: tuple[Matrix, Matrix], end: tuple[Matrix, Matrix]
) -> tuple[Matrix, Matrix]:
    """Push a sweep further along its own direction while the objective keeps rising.

    Step lengths double from the sweep's own step; once a step would leave the
    PSD cone, the boundary point is found by bisection and tried too. Both
    endpoints must spend the full budget so that every tried point does too.
    """
    deltas = (end[0] - start[0], end[1] - start[1])

    def point(step: float) -> tuple[Matrix, Matrix]:
        return (start[0] + step * deltas[0], start[1] + step * deltas[1])

    def feasible(step: float) -> bool:
        return all(_is_psd(k) for k in point(step))

    best_step = 1.0
    best_value = _objective_bits(ch, *end)
    step = 2.0
    while step <= _MAX_EXTRAPOLATION:
        if not feasible(step):
            lo, hi = step / 2.0, step
            for _ in range(_BISECTION_STEPS):
                mid = 0.5 * (lo + hi)
                if feasible(mid):
                    lo = mid
                else:
                    hi = mid
            value = _objective_bits(ch, *point(lo))
            if value > best_value:
                best_step = lo
            break
        value = _objective_bits(ch, *point(step))
        if value <= best_value:
            break
        best_step, best_value = step, value
        step *= 2.0

    if best_step == 1.0:
        return end
    k1, k2 = point(best_step)
    return symmetrize(k1), symmetrize(k2)


def sum_capacity(
    ch: ChannelPair, power: float, tol: Tolerances = DEFAULT_TOLERANCES
) -> CapacityResult:
    """Sum capacity and optimal input covariances by iterative water-filling.

    Each sweep is followed by an extrapolation along the sweep direction, and
    the loop stops once the duality gap is within tol.wf_bits.

    Args:
        ch: Channel pair.
        power: Per-user power budget (linear).
        tol: Convergence tolerance and iteration cap.

    Returns:
        CapacityResult with c_sum = 0.5·log₂(C_d).

    Raises:
        ValueError: If power is not positive.
        NoConvergenceError: If the duality gap is still open at the iteration cap.
    """
    if power <= 0:
        raise ValueError(f"power must be positive, got {power}")

    k1 = np.zeros((ch.t, ch.t))
    k2 = np.zeros((ch.t, ch.t))
    gap = float("inf")
    for iteration in range(1, tol.wf_max_iter + 1):
        start = (k1, k2)
        k1 = _single_user_step(ch.h1, ch.h2, k2, power)
        k2 = _single_user_step(ch.h2, ch.h1, k1, power)
        if iteration > 1:
            k1, k2 = _extrapolate(ch, start, (k1, k2))
        gap = duality_gap(ch, k1, k2, power)
        if gap <= tol.wf_bits:
            objective = _objective_bits(ch, k1, k2)
            logger.debug(f"Water-filling converged after {iteration} sweeps: {objective:.10f} bits")
            break
    else:
        raise NoConvergenceError(
            f"iterative water-filling did not converge within {tol.wf_max_iter} sweeps "
            f"(duality gap {gap:.3e} bits)"
        )

    cov = CovariancePair(k1=k1, k2=k2, power=power)
    cd = c_d(ch, cov)
    return CapacityResult(c_sum=0.5 * float(np.log2(cd)), c_d=cd, covariances=cov)


def random_channel(r: int, t: int, dist: Uniform, seed: int, index: int = 0) -> ChannelPair:
    """Channel pair with i.i.d. entries, deterministic in (seed, index).

    Raises:
        ValueError: If the distribution bounds are not ordered.
    """
    if not dist.lo < dist.hi:
        raise ValueError(f"distribution needs lo < hi, got {dist.label}")
    rng = make_rng(seed, index)
    h1 = rng.uniform(dist.lo, dist.hi, size=(r, t))
    h2 = rng.uniform(dist.lo, dist.hi, size=(r, t))
    return ChannelPair(h1=h1, h2=h2)


def diagonal_random_channel(dim: int, dist: Uniform, seed: int, index: int = 0) -> ChannelPair:
    """Diagonal channel pair with i.i.d. diagonal entries, deterministic in (seed, index)."""
    if not dist.lo < dist.hi:
        raise ValueError(f"distribution needs lo < hi, got {dist.label}")
    rng = make_rng(seed, index)
    d1 = rng.uniform(dist.lo, dist.hi, size=dim)
    d2 = rng.uniform(dist.lo, dist.hi, size=dim)
    return ChannelPair(h1=np.diag(d1), h2=np.diag(d2))
