"""Parallel coding scheme: one codebook per active transmit antenna.

The two users' active antennas form an equivalent SIMO MAC y = H̃c + z with
H̃ = [H̃1 H̃2]. The receiver decodes n = t1 + t2 integer combinations, the rows
of A, one after another; each decoded combination is used to cancel part of
the noise of the next one.

With L upper triangular and LᵀL = (I + H̃ᵀH̃)⁻¹, the noise variance of row j
is the squared residual of L·E·a_j after projecting out L·E·a_1..a_{j-1}, so
for unimodular A the product of all of them equals Πβ_i² / |I + H̃ᵀH̃|.
"""

import itertools
import logging
from collections.abc import Iterator, Sequence

import numpy as np
import numpy.typing as npt
from scipy import linalg as sla

from .channel import sum_capacity
from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import RankMismatchError, SearchSpaceTooLargeError, SingularProjectionError
from .matkernel import Matrix, Vector, cholesky, slogdet2, symmetrize
from .models import (
    AchievabilityReport,
    CapacityResult,
    ChannelPair,
    CovariancePair,
    PcsRates,
    PcsSearch,
    PcsSystem,
    PcsWitness,
)

logger = logging.getLogger(__name__)

MAX_ENUM_DIM = 6
MAX_ENUM_BOUND = 5
MAX_ENUM_CANDIDATES = 20_000_000
_ENUM_CHUNK = 65_536
_TRAILING_TOL = 1e-7
_ORDER_TOL = 1e-9
_PRODUCT_SLACK = 1e-6
_BETA_FLOOR = 1e-6


def build_equivalent_simo(
    ch: ChannelPair, cov: CovariancePair, tol: Tolerances = DEFAULT_TOLERANCES
) -> PcsSystem:
    """Stack the active columns of H1·B1 and H2·B2 into H̃.

    Raises:
        NotPSDError: If a covariance is not PSD.
        RankMismatchError: If a precoder's trailing columns do not vanish.
    """
    blocks: list[Matrix] = []
    ranks: list[int] = []
    for user, (h, k) in enumerate(zip(ch.channels, cov.covariances, strict=True), start=1):
        eigenvalues = np.linalg.eigvalsh(symmetrize(k))
        rank = int(np.sum(eigenvalues > tol.rank))
        effective = h @ cholesky(k, tol.rank, tol.matrix)
        trailing = float(np.linalg.norm(effective[:, rank:]))
        if trailing > _TRAILING_TOL:
            raise RankMismatchError(
                f"user {user}: rank {rank} but trailing columns of H·B have norm {trailing:.3e}"
            )
        blocks.append(effective[:, :rank])
        ranks.append(rank)

    h_tilde = np.hstack(blocks)
    n = h_tilde.shape[1]
    gram = symmetrize(np.eye(n) + h_tilde.T @ h_tilde)
    l_factor = np.asarray(sla.cholesky(np.linalg.inv(gram), lower=False), dtype=float)
    return PcsSystem(h_tilde=h_tilde, t1=ranks[0], t2=ranks[1], l_factor=l_factor)


def _as_int_matrix(a: npt.ArrayLike, n: int) -> np.ndarray:
    arr = np.asarray(a, dtype=int)
    if arr.ndim == 1:
        arr = arr.reshape(0, n) if arr.size == 0 else arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != n:
        raise ValueError(f"coefficient rows must have {n} entries, got shape {arr.shape}")
    return arr


def _scaled(sys: PcsSystem, beta: npt.ArrayLike) -> Matrix:
    """L·E with E = diag(β)."""
    b = np.asarray(beta, dtype=float)
    if b.shape != (sys.n,):
        raise ValueError(f"beta must have {sys.n} entries, got {b.shape}")
    if np.any(b <= 0):
        raise ValueError("beta entries must be positive")
    return sys.l_factor * b[None, :]


def _prior_gram(x: Matrix) -> Matrix:
    gram = x.T @ x
    if gram.size == 0:
        return gram
    smallest = float(np.linalg.eigvalsh(gram)[0])
    if smallest <= 1e-12 * max(1.0, float(np.trace(gram))):
        raise SingularProjectionError("previously decoded combinations are linearly dependent")
    return gram


def effective_noise(
    sys: PcsSystem, a_prev: npt.ArrayLike, a_j: npt.ArrayLike, beta: npt.ArrayLike
) -> float:
    """Minimum effective noise variance of combination a_j after a_prev are decoded.

    Args:
        sys: Equivalent SIMO system.
        a_prev: Rows already decoded, shape (j-1, n); may be empty.
        a_j: Coefficients of the current combination.
        beta: Codebook scalings.

    Returns:
        σ̂_j² = ‖M_{j-1}·L·E·a_j‖².

    Raises:
        SingularProjectionError: If the decoded rows are linearly dependent.
    """
    le = _scaled(sys, beta)
    prev = _as_int_matrix(a_prev, sys.n)
    v = le @ np.asarray(a_j, dtype=float)
    x = le @ prev.T
    gram = _prior_gram(x)
    if gram.size:
        v = v - x @ np.linalg.solve(gram, x.T @ v)
    return float(v @ v)


def equalizer(
    sys: PcsSystem, a_prev: npt.ArrayLike, a_j: npt.ArrayLike, beta: npt.ArrayLike
) -> tuple[Vector, Vector]:
    """Equalizer b̂ and cancellation weights q̂ minimizing the variance of combination a_j."""
    le = _scaled(sys, beta)
    e = np.diag(np.asarray(beta, dtype=float))
    prev = _as_int_matrix(a_prev, sys.n)
    v = le @ np.asarray(a_j, dtype=float)
    x = le @ prev.T
    gram = _prior_gram(x)
    q = np.linalg.solve(gram, x.T @ v) if gram.size else np.zeros(0)
    target = e @ np.asarray(a_j, dtype=float) - e @ prev.T @ q
    h = sys.h_tilde
    noise = symmetrize(np.eye(h.shape[0]) + h @ h.T)
    b = np.asarray(sla.solve(noise, h @ target, assume_a="pos"))
    return b, q


def sigma_squared(
    sys: PcsSystem,
    a_prev: npt.ArrayLike,
    a_j: npt.ArrayLike,
    beta: npt.ArrayLike,
    b: npt.ArrayLike,
    q: npt.ArrayLike,
) -> float:
    """‖b‖² + ‖E·a_j − H̃ᵀb − E·A_prevᵀq‖² for an arbitrary equalizer."""
    e = np.diag(np.asarray(beta, dtype=float))
    prev = _as_int_matrix(a_prev, sys.n)
    bv = np.asarray(b, dtype=float)
    qv = np.asarray(q, dtype=float)
    resid = e @ np.asarray(a_j, dtype=float) - sys.h_tilde.T @ bv
    if prev.shape[0]:
        resid = resid - e @ prev.T @ qv
    return float(bv @ bv + resid @ resid)


def decode_noise(sys: PcsSystem, a_matrix: npt.ArrayLike, beta: npt.ArrayLike) -> Vector:
    """σ̂_j² for every row of A, in decode order (Gram–Schmidt on L·E·Aᵀ columns)."""
    a = _as_int_matrix(a_matrix, sys.n)
    x = _scaled(sys, beta) @ a.T
    if x.shape[1] == 0:
        return np.zeros(0)
    _, r = np.linalg.qr(x)
    diag = np.abs(np.diag(r))
    if np.any(diag <= 1e-12 * max(1.0, float(np.max(np.linalg.norm(x, axis=0))))):
        raise SingularProjectionError("combination rows are linearly dependent")
    return np.asarray(diag**2)


def pcs_rates(sys: PcsSystem, a_matrix: npt.ArrayLike, beta: npt.ArrayLike) -> PcsRates:
    """Per-codebook rates: r_i = min over rows j using codebook i of ½·log₂⁺(β_i²/σ̂_j²).

    Raises:
        ValueError: If some codebook appears in no row.
    """
    a = _as_int_matrix(a_matrix, sys.n)
    b = np.asarray(beta, dtype=float)
    sigma = decode_noise(sys, a, b)
    rates = np.zeros(sys.n)
    for i in range(sys.n):
        rows = np.nonzero(a[:, i])[0]
        if rows.size == 0:
            raise ValueError(f"codebook {i} appears in no combination")
        per_row = 0.5 * np.log2(b[i] ** 2 / sigma[rows])
        rates[i] = max(float(np.min(per_row)), 0.0)
    return PcsRates(rates=rates, sigma_hat=sigma)


def assignment(a_matrix: npt.ArrayLike) -> tuple[int, ...] | None:
    """Row at which each codebook last appears, or None when that is not a bijection."""
    a = np.asarray(a_matrix, dtype=int)
    last: list[int] = []
    for i in range(a.shape[1]):
        rows = np.nonzero(a[:, i])[0]
        if rows.size == 0:
            return None
        last.append(int(rows[-1]))
    if len(set(last)) != len(last):
        return None
    return tuple(last)


def unimodular_enum(dim: int, entry_bound: int) -> Iterator[np.ndarray]:
    """Every dim×dim integer matrix with entries in [−bound, bound] and determinant ±1.

    Matrices come out in lexicographic order of their row-major entries.

    Raises:
        ValueError: If dim or entry_bound is below 1.
        SearchSpaceTooLargeError: If the scan exceeds the size guards.
    """
    if dim < 1 or entry_bound < 1:
        raise ValueError("dim and entry_bound must be at least 1")
    if dim > MAX_ENUM_DIM or entry_bound > MAX_ENUM_BOUND:
        raise SearchSpaceTooLargeError(
            f"dim={dim}, entry_bound={entry_bound} exceeds ({MAX_ENUM_DIM}, {MAX_ENUM_BOUND})"
        )
    base = 2 * entry_bound + 1
    cells = dim * dim
    total = base**cells
    if total > MAX_ENUM_CANDIDATES:
        raise SearchSpaceTooLargeError(
            f"{total} candidate matrices for dim={dim}, entry_bound={entry_bound}"
        )

    weights = base ** np.arange(cells - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, _ENUM_CHUNK):
        index = np.arange(start, min(start + _ENUM_CHUNK, total), dtype=np.int64)
        digits = (index[:, None] // weights[None, :]) % base - entry_bound
        mats = digits.reshape(-1, dim, dim)
        dets = np.rint(np.linalg.det(mats.astype(float)))
        for m in mats[np.abs(dets) == 1]:
            yield m.astype(int)


def _row_candidates(order: Sequence[int], level: int, entry_bound: int) -> np.ndarray:
    """Rows allowed at one decode step of the triangular family, in lexicographic order."""
    n = len(order)
    rest = list(order[level + 1 :])
    values = np.arange(-entry_bound, entry_bound + 1)
    if level == 0:
        values = values[values != 0]
    combos = list(itertools.product(values.tolist(), repeat=len(rest)))
    free = np.array(combos, dtype=int).reshape(len(combos), len(rest))
    rows = np.zeros((len(combos), n), dtype=int)
    rows[:, order[level]] = 1
    if rest:
        rows[:, rest] = free
    return rows


def triangular_family(order: Sequence[int], entry_bound: int) -> Iterator[np.ndarray]:
    """Integer matrices that are unit upper triangular once columns are taken in `order`.

    Row j has a 1 in column order[j], zeros in columns order[:j], and entries in
    [−bound, bound] elsewhere; every entry of the first row is non-zero. Row j
    is therefore the last appearance of codebook order[j], and |det A| = 1.
    """
    levels = [_row_candidates(order, j, entry_bound) for j in range(len(order))]
    for rows in itertools.product(*levels):
        yield np.array(rows, dtype=int)


def _beta_candidates(n: int, grid: Sequence[float]) -> list[Vector]:
    """β vectors with β_1 = 1 and the rest drawn from the grid (conditions are scale-free)."""
    return [np.array((1.0, *rest)) for rest in itertools.product(grid, repeat=n - 1)]


def _accepts(a: np.ndarray, beta: Vector, sigma: Vector) -> bool:
    pi = assignment(a)
    if pi is None or np.any(a[0] == 0):
        return False
    if np.any(np.diff(sigma) < -_ORDER_TOL * np.max(sigma)):
        return False
    return bool(np.all(beta**2 >= sigma[list(pi)] * (1 - _ORDER_TOL)))


def _verified(
    sys: PcsSystem, a: np.ndarray, beta: Vector, tol: Tolerances
) -> PcsWitness | None:
    """Re-derive σ̂ and the rates from scratch; accept only if the sum rate telescopes."""
    try:
        sigma = decode_noise(sys, a, beta)
    except SingularProjectionError:
        return None
    if not _accepts(a, beta, sigma):
        return None
    rates = pcs_rates(sys, a, beta)
    target = 0.5 * slogdet2(np.eye(sys.n) + sys.h_tilde.T @ sys.h_tilde)
    if abs(rates.sum_rate - target) > tol.achievability * max(1.0, target):
        logger.debug(f"Rejected witness: sum rate {rates.sum_rate:.9f} vs {target:.9f}")
        return None
    pi = assignment(a)
    assert pi is not None
    return PcsWitness(a_matrix=a, pi=pi, beta=beta, sigma_hat=sigma)


def refine_beta(
    sys: PcsSystem,
    a_matrix: npt.ArrayLike,
    beta: npt.ArrayLike,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> Vector:
    """Iterate β_i² ← κ·σ̂²_{Π(i)}(β) toward the equal-rate point.

    κ = |I + H̃ᵀH̃|^{1/n}; at the fixed point every codebook gets ½·log₂κ bits.
    The result is normalised to β_1 = 1. The iteration is abandoned, keeping
    the last iterate whose noise variances were computable, once a ratio
    β_j/β_max drops below a floor or the combination rows become dependent.
    If the iteration cap is reached the last iterate is returned.

    Raises:
        ValueError: If A does not assign a distinct last row to every codebook.
    """
    a = _as_int_matrix(a_matrix, sys.n)
    pi = assignment(a)
    if pi is None:
        raise ValueError("every codebook must have a distinct last row")
    log_kappa = slogdet2(np.eye(sys.n) + sys.h_tilde.T @ sys.h_tilde) / sys.n
    kappa = float(2.0**log_kappa)
    current = np.asarray(beta, dtype=float)
    current = current / current[0]
    previous = current
    for iteration in range(1, tol.fixed_point_max_iter + 1):
        try:
            sigma = decode_noise(sys, a, current)
        except SingularProjectionError:
            logger.debug(f"β refinement hit dependent rows at iteration {iteration}")
            return previous
        previous = current
        nxt = np.sqrt(kappa * sigma[list(pi)])
        nxt = nxt / nxt[0]
        if not np.all(np.isfinite(nxt)) or float(np.min(nxt)) < _BETA_FLOOR * float(np.max(nxt)):
            logger.debug(f"β refinement left the admissible range at iteration {iteration}")
            return current
        change = float(np.max(np.abs(nxt - current)))
        current = nxt
        if change <= tol.fixed_point * max(1.0, float(np.max(np.abs(current)))):
            logger.debug(f"β refinement converged after {iteration} iterations")
            return current
    logger.debug(f"β refinement stopped at the cap of {tol.fixed_point_max_iter} iterations")
    return current


class _TriangularSearch:
    """Depth-first search of the triangular family for one (order, β) pair."""

    def __init__(
        self, sys: PcsSystem, order: Sequence[int], beta: Vector, levels: list[np.ndarray]
    ) -> None:
        self.n = sys.n
        self.order = list(order)
        self.le = _scaled(sys, beta)
        self.beta_sq = beta**2
        self.levels = levels
        # Product of all σ̂² for any unimodular A.
        self.total = float(np.prod(self.beta_sq) * np.prod(np.diag(sys.l_factor)) ** 2)
        suffix = np.ones(self.n + 1)
        for j in range(self.n - 1, -1, -1):
            suffix[j] = suffix[j + 1] * self.beta_sq[self.order[j]]
        self.suffix = suffix
        self.nodes = 0

    def run(self) -> tuple[np.ndarray, Vector] | None:
        return self._descend(0, np.zeros((self.n, 0)), [], [], 1.0)

    def _descend(
        self,
        level: int,
        basis: Matrix,
        rows: list[np.ndarray],
        sigmas: list[float],
        prefix: float,
    ) -> tuple[np.ndarray, Vector] | None:
        cand = self.levels[level]
        v = self.le @ cand.T
        resid = v - basis @ (basis.T @ v)
        sig = np.sum(resid**2, axis=0)
        self.nodes += sig.size

        slack = 1 + _ORDER_TOL
        mask = sig <= self.beta_sq[self.order[level]] * slack
        if sigmas:
            mask &= sig >= sigmas[-1] * (1 - _ORDER_TOL)
        loose = 1 + _PRODUCT_SLACK
        mask &= sig ** (self.n - level) <= self.total / prefix * loose
        mask &= prefix * sig >= self.total / self.suffix[level + 1] / loose

        for idx in np.nonzero(mask)[0]:
            row = cand[idx]
            s = float(sig[idx])
            if level == self.n - 1:
                return np.array([*rows, row], dtype=int), np.array([*sigmas, s])
            unit = resid[:, idx] / np.sqrt(s)
            found = self._descend(
                level + 1,
                np.column_stack([basis, unit]),
                [*rows, row],
                [*sigmas, s],
                prefix * s,
            )
            if found is not None:
                return found
        return None


def _search_triangular(
    sys: PcsSystem, search: PcsSearch, tol: Tolerances
) -> PcsWitness | None:
    betas = _beta_candidates(sys.n, search.beta_grid)
    nodes = 0
    for order in itertools.permutations(range(sys.n)):
        levels = [_row_candidates(order, j, search.entry_bound) for j in range(sys.n)]
        for beta in betas:
            dfs = _TriangularSearch(sys, order, beta, levels)
            found = dfs.run()
            nodes += dfs.nodes
            if found is None:
                continue
            witness = _verified(sys, found[0], beta, tol)
            if witness is not None:
                logger.debug(f"Triangular search found a witness after {nodes} nodes")
                return witness
    logger.debug(f"Triangular search exhausted after {nodes} nodes")
    return None


def _search_exhaustive(
    sys: PcsSystem, search: PcsSearch, tol: Tolerances
) -> PcsWitness | None:
    betas = _beta_candidates(sys.n, search.beta_grid)
    for a in unimodular_enum(sys.n, search.entry_bound):
        if np.any(a[0] == 0) or assignment(a) is None:
            continue
        for beta in betas:
            sigma = decode_noise(sys, a, beta)
            if _accepts(a, beta, sigma):
                witness = _verified(sys, a, beta, tol)
                if witness is not None:
                    return witness
    return None


def pcs_check(
    ch: ChannelPair,
    power: float,
    search: PcsSearch | None = None,
    tol: Tolerances = DEFAULT_TOLERANCES,
    capacity: CapacityResult | None = None,
) -> AchievabilityReport:
    """Search for an integer matrix, decode order and scaling reaching the sum capacity.

    The first decoded combination must use every codebook, so plain successive
    cancellation (which always reaches the sum capacity) does not count.
    Decode order is the row order of A. A witness is accepted when σ̂ is
    non-decreasing along the decode order, each codebook's last row is
    distinct, and β_i² ≥ σ̂² at that row. Accepted witnesses are re-verified
    and then moved to the equal-rate scaling when that scaling still passes.

    Args:
        ch: Channel pair.
        power: Per-user power budget (linear).
        search: Search bounds; defaults to PcsSearch().
        tol: Tolerances.
        capacity: Sum capacity of ch at this power, computed when not given.

    Returns:
        AchievabilityReport with the first witness in search order, if any.

    Raises:
        SearchSpaceTooLargeError: If the exhaustive family exceeds its guards.
    """
    search = search or PcsSearch()
    if capacity is None:
        capacity = sum_capacity(ch, power, tol)
    sys = build_equivalent_simo(ch, capacity.covariances, tol)

    if search.family == "exhaustive":
        witness = _search_exhaustive(sys, search, tol)
    else:
        witness = _search_triangular(sys, search, tol)

    if witness is None:
        return AchievabilityReport(
            scheme="pcs", achievable=False, c_sum=capacity.c_sum, t1=sys.t1, t2=sys.t2
        )

    refined = refine_beta(sys, witness.a_matrix, witness.beta, tol)
    canonical = _verified(sys, witness.a_matrix, refined, tol)
    if canonical is not None:
        witness = canonical
    rates = pcs_rates(sys, witness.a_matrix, witness.beta)
    logger.debug(f"PCS witness at P={power:.4g}: A={witness.a_matrix.tolist()}")
    return AchievabilityReport(
        scheme="pcs",
        achievable=True,
        c_sum=capacity.c_sum,
        sum_rate=rates.sum_rate,
        witness=witness,
        t1=sys.t1,
        t2=sys.t2,
    )
