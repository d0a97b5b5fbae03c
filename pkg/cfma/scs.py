"""Serial coding scheme: rates, the sum-capacity polynomial condition, and special cases.

Each user carries one long lattice codebook spread over its transmit antennas.
The receiver decodes the combination with coefficients a first and then the
combination with coefficients b. Rates follow from the determinant of
M = (ã1²+ã2²)I + (ã1·H2B2 − ã2·H1B1)ᵀ(ã1·H2B2 − ã2·H1B1).

Sum capacity is reachable with a = (1,1), b = (1,0) or (0,1) whenever
g(γ) = f(γ) − γ^t·√C_d ≤ 0 for some γ = β1/β2 > 0, where
f(γ) = |(γ²+1)I + (γ·H2B2 − H1B1)ᵀ(γ·H2B2 − H1B1)|.
"""

import itertools
import logging

import numpy as np
import numpy.typing as npt
from numpy.polynomial import Polynomial
from scipy import linalg as sla
from scipy.optimize import brentq

from .channel import receive_covariance, sum_capacity
from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import DegeneratePowerSplitError, InapplicableError, InfeasibleRatesError
from .matkernel import (
    Matrix,
    Vector,
    cholesky,
    det,
    interpolate,
    real_roots,
    slogdet2,
    svd,
    sym_eigen,
    symmetrize,
)
from .models import (
    CapacityResult,
    ChannelPair,
    CovariancePair,
    DiagonalVerdict,
    PowerThreshold,
    PrecoderStrategy,
    ScsParams,
    ScsRatePair,
    ScsReport,
    SimoResult,
    StructureReport,
    SvdVerdict,
)

logger = logging.getLogger(__name__)

GAMMA_GRID = np.geomspace(1e-3, 1e3, 2000)


# --- Rates ---


def _effective(ch: ChannelPair, b1: Matrix, b2: Matrix) -> tuple[Matrix, Matrix]:
    return ch.h1 @ b1, ch.h2 @ b2


def _validate_params(params: ScsParams, cov: CovariancePair | None, tol: Tolerances) -> None:
    if params.a[0] * params.b[1] - params.a[1] * params.b[0] == 0:
        raise ValueError(f"a={params.a} and b={params.b} must be linearly independent")
    if min(params.beta) <= 0:
        raise ValueError(f"beta must be positive, got {params.beta}")
    if cov is None:
        return
    for name, b, k in (("B1", params.b1, cov.k1), ("B2", params.b2, cov.k2)):
        residual = float(np.max(np.abs(b @ b.T - k)))
        if residual > 1e-8 * max(1.0, float(np.max(np.abs(k)))):
            raise ValueError(f"{name}·{name}ᵀ differs from the covariance by {residual:.3e}")


def m_matrix(ch: ChannelPair, params: ScsParams) -> Matrix:
    """M = (ã1²+ã2²)I_t + DᵀD with D = ã1·H2B2 − ã2·H1B1."""
    a1, a2 = params.a_tilde
    e1, e2 = _effective(ch, params.b1, params.b2)
    diff = a1 * e2 - a2 * e1
    return symmetrize((a1**2 + a2**2) * np.eye(e1.shape[1]) + diff.T @ diff)


def scs_rate_pair(
    ch: ChannelPair,
    cov: CovariancePair,
    params: ScsParams,
    strict: bool = True,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> ScsRatePair:
    """Achievable rate pair of the serial scheme for fixed (a, b, β, B1, B2).

    Rates are in bits per channel use and are formed in the log domain.

    Args:
        ch: Channel pair.
        cov: Covariances the precoders factor.
        params: Coefficients, scaling and precoders.
        strict: Raise when a rate entering the final pair is negative.
        tol: Tolerances.

    Returns:
        ScsRatePair with raw first/second-combination rates and the final pair.

    Raises:
        ValueError: If the parameters are inconsistent.
        InfeasibleRatesError: If strict and a required rate is negative.
    """
    _validate_params(params, cov, tol)
    t = ch.t
    log_cd = slogdet2(receive_covariance(ch, cov))
    log_m = slogdet2(m_matrix(ch, params))
    log_cross = float(np.log2(abs(params.cross)))

    r_a: list[float] = []
    r_b: list[float] = []
    rates: list[float] = []
    required: list[float] = []
    for beta_l, a_l, b_l in zip(params.beta, params.a, params.b, strict=True):
        log_beta = 2 * t * float(np.log2(beta_l))
        first = 0.5 * (log_beta + log_cd - log_m)
        second = 0.5 * (log_beta + log_m - 2 * t * log_cross)
        r_a.append(first)
        r_b.append(second)
        if b_l == 0:
            rates.append(first)
            required.append(first)
        elif a_l == 0:
            rates.append(second)
            required.append(second)
        else:
            rates.append(min(first, second))
            required.extend((first, second))

    feasible = all(r >= -tol.achievability for r in required)
    if strict and not feasible:
        raise InfeasibleRatesError(f"negative required rate in {required}")
    return ScsRatePair(
        r_a=(r_a[0], r_a[1]),
        r_b_given_a=(r_b[0], r_b[1]),
        rates=(rates[0], rates[1]),
        m_det=float(2.0**log_m),
        feasible=feasible,
    )


# --- Optimal equalizers ---


def sigma1(ch: ChannelPair, params: ScsParams, w: Matrix) -> Matrix:
    """Noise covariance of the first combination under equalizer W."""
    total = w @ w.T
    for a_l, h, b in zip(params.a_tilde, ch.channels, (params.b1, params.b2), strict=True):
        resid = a_l * np.eye(ch.t) - w @ h @ b
        total = total + resid @ resid.T
    return symmetrize(total)


def optimal_w(ch: ChannelPair, params: ScsParams) -> Matrix:
    """W* = (Σ ã_l·B_lᵀH_lᵀ)(I + Σ H_lK_lH_lᵀ)⁻¹."""
    e1, e2 = _effective(ch, params.b1, params.b2)
    a1, a2 = params.a_tilde
    cross = a1 * e1.T + a2 * e2.T
    noise = symmetrize(np.eye(ch.r) + e1 @ e1.T + e2 @ e2.T)
    return np.asarray(sla.solve(noise, cross.T, assume_a="pos").T)


def sigma2(ch: ChannelPair, params: ScsParams, f: Matrix, ell: Matrix) -> Matrix:
    """Noise covariance of the second combination under (F, L)."""
    total = f @ f.T
    pairs = zip(params.a_tilde, params.b_tilde, ch.channels, (params.b1, params.b2), strict=True)
    for a_l, b_l, h, b in pairs:
        resid = b_l * np.eye(ch.t) - f @ h @ b - a_l * ell
        total = total + resid @ resid.T
    return symmetrize(total)


def optimal_l(ch: ChannelPair, params: ScsParams, f: Matrix) -> Matrix:
    """Minimizer over L of Σ2(F, L) for fixed F."""
    weight = sum(a**2 for a in params.a_tilde)
    acc = np.zeros((ch.t, ch.t))
    pairs = zip(params.a_tilde, params.b_tilde, ch.channels, (params.b1, params.b2), strict=True)
    for a_l, b_l, h, b in pairs:
        acc = acc + a_l * (b_l * np.eye(ch.t) - f @ h @ b)
    return acc / weight


def optimal_f(ch: ChannelPair, params: ScsParams) -> Matrix:
    """F* = (δ/s)·Dᵀ·(I + D·Dᵀ/s)⁻¹ with s = Σã², δ = ã1b̃2 − ã2b̃1."""
    a1, a2 = params.a_tilde
    e1, e2 = _effective(ch, params.b1, params.b2)
    weight = a1**2 + a2**2
    diff = a1 * e2 - a2 * e1
    mk = symmetrize(np.eye(ch.r) + diff @ diff.T / weight)
    return np.asarray((params.cross / weight) * sla.solve(mk, diff, assume_a="pos").T)


# --- Capacity condition ---


def f_value(ch: ChannelPair, b1: Matrix, b2: Matrix, gamma: float) -> float:
    """f(γ) = |(γ²+1)I + (γ·H2B2 − H1B1)ᵀ(γ·H2B2 − H1B1)|."""
    e1, e2 = _effective(ch, b1, b2)
    diff = gamma * e2 - e1
    return det((gamma**2 + 1.0) * np.eye(e1.shape[1]) + diff.T @ diff)


def g_value(ch: ChannelPair, b1: Matrix, b2: Matrix, c_d: float, gamma: float) -> float:
    """g(γ) = f(γ) − γ^t·√C_d by direct evaluation."""
    return f_value(ch, b1, b2, gamma) - gamma ** b1.shape[1] * float(np.sqrt(c_d))


def g_polynomial(ch: ChannelPair, b1: Matrix, b2: Matrix, c_d: float) -> Polynomial:
    """g(γ) as a degree-2t polynomial, f interpolated at Chebyshev nodes."""
    t = b1.shape[1]
    if b1.shape != (t, t) or b2.shape != (t, t):
        raise ValueError("precoders must be square t×t matrices")

    def f_at(gammas: Vector) -> Vector:
        return np.array([f_value(ch, b1, b2, float(g)) for g in np.atleast_1d(gammas)])

    f_poly = interpolate(f_at, 2 * t)
    return f_poly - float(np.sqrt(c_d)) * Polynomial.basis(t)


def _minimize_g(
    g_poly: Polynomial,
) -> tuple[float, float, tuple[float, float] | None, list[float]]:
    """Minimum of g over γ > 0, its minimizer, and the root interval around it."""
    roots = [x for x in real_roots(g_poly) if x > 0]
    critical = [x for x in real_roots(g_poly.deriv()) if x > 0]
    midpoints = [0.5 * (lo + hi) for lo, hi in itertools.pairwise(roots)]
    candidates = np.concatenate([np.array(roots + midpoints + critical), GAMMA_GRID])
    values = g_poly(candidates)
    best = int(np.argmin(values))
    witness = float(candidates[best])
    g_min = float(values[best])

    lower = [r for r in roots if r <= witness]
    upper = [r for r in roots if r >= witness]
    interval = (max(lower), min(upper)) if lower and upper else None
    return g_min, witness, interval, roots


def _precoder_candidates(
    b1: Matrix, b2: Matrix, strategy: PrecoderStrategy
) -> list[tuple[Matrix, Matrix, tuple[tuple[int, ...], tuple[int, ...]] | None]]:
    if strategy == "cholesky":
        return [(b1, b2, None)]
    perms = list(itertools.permutations(range(b1.shape[1])))
    return [(b1[:, list(p1)], b2[:, list(p2)], (p1, p2)) for p1 in perms for p2 in perms]


def scs_check(
    ch: ChannelPair,
    power: float,
    strategy: PrecoderStrategy = "cholesky",
    tol: Tolerances = DEFAULT_TOLERANCES,
    capacity: CapacityResult | None = None,
) -> ScsReport:
    """Decide whether the serial scheme reaches the sum capacity at this power.

    The decode orders b = (1,0) and b = (0,1), and the two orderings of β, all
    reduce to the same condition on γ over (0, ∞), so one scan covers them.

    Args:
        ch: Channel pair.
        power: Per-user power budget (linear).
        strategy: "cholesky" for plain Cholesky precoders, "permutations" to also
            try every column permutation of each precoder.
        tol: Tolerances.
        capacity: Sum capacity of ch at this power, computed when not given.

    Returns:
        ScsReport carrying the verdict, the best g polynomial and a witness γ.
    """
    if capacity is None:
        capacity = sum_capacity(ch, power, tol)
    b1 = cholesky(capacity.covariances.k1, tol.rank, tol.matrix)
    b2 = cholesky(capacity.covariances.k2, tol.rank, tol.matrix)

    best: ScsReport | None = None
    best_ratio = np.inf
    for p1, p2, perm in _precoder_candidates(b1, b2, strategy):
        g_poly = g_polynomial(ch, p1, p2, capacity.c_d)
        g_min, witness, interval, _ = _minimize_g(g_poly)
        lead = abs(float(g_poly.coef[-1]))
        ratio = g_min / lead
        achievable = g_min <= tol.achievability * lead
        if achievable or ratio < best_ratio:
            best_ratio = ratio
            best = ScsReport(
                achievable=achievable,
                g_poly=g_poly,
                g_min=g_min,
                precoder_choice=strategy,
                gamma_witness=witness if achievable else None,
                gamma_interval=(interval or (witness, witness)) if achievable else None,
                permutation=perm,
            )
        if achievable:
            break

    assert best is not None
    logger.debug(
        f"SCS check at P={power:.4g}: achievable={best.achievable}, g_min={best.g_min:.4g}"
    )
    return best


# --- Special cases ---


def _as_vector(h: npt.ArrayLike) -> Vector:
    return np.asarray(h, dtype=float).ravel()


def simo_check(h1: npt.ArrayLike, h2: npt.ArrayLike, power: float) -> SimoResult:
    """Closed-form discriminant test when each user has one transmit antenna.

    With K_l = P, g(γ) = (1+P‖h2‖²)γ² − (√C_d + 2P·h1ᵀh2)γ + (1+P‖h1‖²).
    """
    v1, v2 = _as_vector(h1), _as_vector(h2)
    if v1.shape != v2.shape:
        raise ValueError("h1 and h2 must have the same length")
    cd = det(np.eye(v1.size) + power * (np.outer(v1, v1) + np.outer(v2, v2)))
    linear = float(np.sqrt(cd)) + 2 * power * float(v1 @ v2)
    constant = 1 + power * float(v1 @ v1)
    quadratic = 1 + power * float(v2 @ v2)
    delta = linear**2 - 4 * constant * quadratic
    interval = None
    if delta >= 0:
        root = float(np.sqrt(delta))
        interval = ((linear - root) / (2 * quadratic), (linear + root) / (2 * quadratic))
    return SimoResult(delta=delta, c_d=cd, gamma_interval=interval)


def collinear_condition(h1: npt.ArrayLike, h2: npt.ArrayLike, power: float) -> bool:
    """P·h1ᵀh2 / √(1 + P(‖h1‖²+‖h2‖²)) ≥ 3/4 for collinear h1, h2."""
    v1, v2 = _as_vector(h1), _as_vector(h2)
    total = float(v1 @ v1 + v2 @ v2)
    return bool(power * float(v1 @ v2) / np.sqrt(1 + power * total) >= 0.75)


def _simo_delta(a: float, b: float, c: float, l1: float, l2: float, power: float) -> float:
    cd = (1 + l1 * power) * (1 + l2 * power)
    return (np.sqrt(cd) + 2 * power * c) ** 2 - 4 * (1 + a * power) * (1 + b * power)


def simo_power_threshold(h1: npt.ArrayLike, h2: npt.ArrayLike) -> PowerThreshold:
    """Power above which the single-antenna condition is guaranteed.

    Collinear channels get the closed-form threshold of the collinear test.
    Otherwise the threshold is the largest root of Δ(P); Δ carries √C_d, so its
    roots are taken from the quartic obtained by isolating and squaring the
    radical, keeping only roots of Δ itself.

    Raises:
        InapplicableError: If a channel is zero, or the asymptotic leading
            coefficient (√(λ1λ2) + 2h1ᵀh2)² − 4‖h1‖²‖h2‖² is not positive.
    """
    v1, v2 = _as_vector(h1), _as_vector(h2)
    a, b, c = float(v1 @ v1), float(v2 @ v2), float(v1 @ v2)
    if a == 0 or b == 0:
        raise InapplicableError("both channels must be non-zero")

    if c * c >= (1 - 1e-9) * a * b:
        if c <= 0:
            return PowerThreshold(collinear=True, condition_met=False, p_star=None)
        s = a + b
        p_star = (9 * s + np.sqrt(81 * s * s + 576 * c * c)) / (32 * c * c)
        return PowerThreshold(collinear=True, condition_met=True, p_star=float(p_star))

    eigenvalues, _ = sym_eigen(np.outer(v1, v1) + np.outer(v2, v2))
    l1, l2 = float(eigenvalues[0]), float(max(eigenvalues[1], 0.0))
    if not (np.sqrt(l1 * l2) + 2 * c) ** 2 > 4 * a * b:
        raise InapplicableError(
            "(sqrt(l1*l2) + 2*h1'h2)^2 <= 4*|h1|^2*|h2|^2: no finite power threshold"
        )

    q = Polynomial([1, a]) * Polynomial([1, b])
    cd = Polynomial([1, l1]) * Polynomial([1, l2])
    rhs = 4 * q - Polynomial([0, 0, 4 * c * c]) - cd
    quartic = rhs**2 - Polynomial([0, 0, 16 * c * c]) * cd

    roots: list[float] = []
    for p in real_roots(quartic):
        if p <= 0:
            continue
        magnitude = 4 * float(q(p)) + float(cd(p)) + 4 * c * c * p * p
        if abs(_simo_delta(a, b, c, l1, l2, p)) <= 1e-6 * magnitude:
            roots.append(p)
    if not roots:
        hi = 1.0
        while _simo_delta(a, b, c, l1, l2, hi) <= 0:
            hi *= 2.0
        roots.append(float(brentq(lambda p: _simo_delta(a, b, c, l1, l2, p), 0.0, hi)))
    return PowerThreshold(collinear=False, condition_met=True, p_star=max(roots))


def _diagonal_entries(m: Matrix, name: str) -> tuple[float, float]:
    if m.shape != (2, 2):
        raise ValueError(f"{name} must be 2×2, got {m.shape}")
    if abs(m[0, 1]) > 1e-9 * max(1.0, float(np.max(np.abs(m)))) or abs(m[1, 0]) > 1e-9 * max(
        1.0, float(np.max(np.abs(m)))
    ):
        raise ValueError(f"{name} must be diagonal")
    return float(m[0, 0]), float(m[1, 1])


def _q_tilde_threshold(
    gamma: float, e: float, s1: float, s2: float, t_exp: int = 2
) -> float | None:
    """Largest positive root of q̃(P) = f(γ)² − γ^{2t}C_d with the c_lj fixed."""
    g2 = gamma**2 + 1.0
    f_poly = g2 * Polynomial([g2, e])
    cd_poly = Polynomial([1, s1]) * Polynomial([1, s2])
    q_poly = f_poly**2 - gamma ** (2 * t_exp) * cd_poly
    positive = [p for p in real_roots(q_poly) if p > 0]
    return max(positive) if positive else None


def diagonal_check(
    ch: ChannelPair, cov: CovariancePair, tol: Tolerances = DEFAULT_TOLERANCES
) -> DiagonalVerdict:
    """Sufficient conditions for 2×2 diagonal channels with diagonal covariances.

    Raises:
        ValueError: If the channels or covariances are not 2×2 diagonal.
        DegeneratePowerSplitError: If the optimal split decouples into two
            point-to-point links.
    """
    h11, h12 = _diagonal_entries(ch.h1, "H1")
    h21, h22 = _diagonal_entries(ch.h2, "H2")
    k11, k12 = _diagonal_entries(cov.k1, "K1")
    k21, k22 = _diagonal_entries(cov.k2, "K2")
    p = cov.power

    zero = tol.rank
    if (k11 <= zero and k22 <= zero) or (k12 <= zero and k21 <= zero):
        raise DegeneratePowerSplitError(
            "power split leaves two independent point-to-point channels"
        )

    c11 = h11 * np.sqrt(max(k11, 0.0) / p)
    c12 = h12 * np.sqrt(max(k12, 0.0) / p)
    c21 = h21 * np.sqrt(max(k21, 0.0) / p)
    c22 = h22 * np.sqrt(max(k22, 0.0) / p)
    s1 = c11**2 + c21**2
    s2 = c12**2 + c22**2

    condition1 = False
    gamma1 = None
    threshold = None
    if k11 > zero and k21 > zero and c11 != 0 and c21 != 0:
        gamma1 = float(c11 / c21)
        lhs = (c22 / c21 - c12 / c11) ** 2
        condition1 = bool(gamma1 > 0 and lhs < np.sqrt(s2 / s1))
        if condition1:
            threshold = _q_tilde_threshold(gamma1, (gamma1 * c22 - c12) ** 2, s1, s2)

    condition2 = False
    gamma2 = None
    if k12 > zero and k22 > zero and c12 != 0 and c22 != 0:
        gamma2 = float(c12 / c22)
        lhs = (c21 / c22 - c11 / c12) ** 2
        condition2 = bool(gamma2 > 0 and lhs < np.sqrt(s1 / s2))
        if condition2 and threshold is None:
            threshold = _q_tilde_threshold(gamma2, (gamma2 * c21 - c11) ** 2, s1, s2)

    return DiagonalVerdict(
        condition1=condition1,
        condition2=condition2,
        gamma1=gamma1,
        gamma2=gamma2,
        p_threshold=threshold,
    )


def svd_check(lambda1: npt.ArrayLike, lambda2: npt.ArrayLike) -> SvdVerdict:
    """Shared-SVD condition on the singular values of H1·B1 and H2·B2.

    Achievable when some factor (1+λ2²)γ² − (2λ1λ2 + √(1+λ1²+λ2²))γ + 1+λ1²
    of g has a real root, i.e. 4λ1λ2 ≥ 3√(1+λ1²+λ2²) for some index.
    """
    l1 = _as_vector(lambda1)
    l2 = _as_vector(lambda2)
    if l1.shape != l2.shape:
        raise ValueError("lambda vectors must have equal length")
    if np.any(l1 < 0) or np.any(l2 < 0):
        raise ValueError("singular values must be non-negative")

    radical = np.sqrt(1 + l1**2 + l2**2)
    discriminants = 4 * l1 * l2 - 3 * radical
    for i, disc in enumerate(discriminants):
        if disc < -1e-9 * radical[i]:
            continue
        factor = Polynomial(
            [1 + l1[i] ** 2, -(2 * l1[i] * l2[i] + radical[i]), 1 + l2[i] ** 2]
        )
        positive = [x for x in real_roots(factor) if x > 0]
        gamma = min(positive) if positive else float(-factor.coef[1] / (2 * factor.coef[2]))
        return SvdVerdict(
            achievable=True,
            discriminants=tuple(float(d) for d in discriminants),
            index=i,
            gamma=gamma,
        )
    return SvdVerdict(achievable=False, discriminants=tuple(float(d) for d in discriminants))


def _canonical_signs(s: Matrix, v: Matrix, d: Matrix, tol: float) -> tuple[Matrix, Matrix]:
    """Flip singular-vector signs so each left vector's largest entry is positive."""
    s = s.copy()
    d = d.copy()
    sigma = np.zeros(max(s.shape[1], d.shape[1]))
    diag = np.diag(v)
    sigma[: diag.size] = diag
    for i in range(s.shape[1]):
        j = int(np.argmax(np.abs(s[:, i])))
        if s[j, i] < 0:
            s[:, i] = -s[:, i]
            if i < d.shape[1] and sigma[i] > tol:
                d[:, i] = -d[:, i]
    for i in range(d.shape[1]):
        if sigma[i] > tol:
            continue
        j = int(np.argmax(np.abs(d[:, i])))
        if d[j, i] < 0:
            d[:, i] = -d[:, i]
    return s, d


def structure_detect(
    ch: ChannelPair, cov: CovariancePair, tol: Tolerances = DEFAULT_TOLERANCES
) -> StructureReport:
    """Check whether H1·B1 and H2·B2 share left and right singular factors.

    Raises:
        ValueError: If the effective channels are not square.
    """
    if ch.r != ch.t:
        raise ValueError(f"effective channels must be square, got {ch.r}×{ch.t}")
    b1 = cholesky(cov.k1, tol.rank, tol.matrix)
    b2 = cholesky(cov.k2, tol.rank, tol.matrix)
    s1, v1, d1 = svd(ch.h1 @ b1)
    s2, v2, d2 = svd(ch.h2 @ b2)
    s1, d1 = _canonical_signs(s1, v1, d1, tol.rank)
    s2, d2 = _canonical_signs(s2, v2, d2, tol.rank)

    shared = bool(
        np.allclose(s1, s2, rtol=0.0, atol=tol.structure)
        and np.allclose(d1, d2, rtol=0.0, atol=tol.structure)
    )
    if not shared:
        return StructureReport(shared_svd=False)
    return StructureReport(shared_svd=True, s=s1, v1=v1, v2=v2, d=d1)
