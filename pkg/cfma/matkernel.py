"""Dense real linear-algebra and polynomial primitives.

Thin, validated wrappers over numpy and scipy. Every other module goes through
these so that symmetrization, PSD checks and rank handling are applied the same
way everywhere.
"""

import logging
from collections.abc import Callable

import numpy as np
import numpy.typing as npt
from numpy.polynomial import Chebyshev, Polynomial
from scipy import linalg as sla
from scipy.linalg import lapack
from scipy.optimize import brentq

from .config import DEFAULT_TOLERANCES
from .errors import DegenerateInputError, NoConvergenceError, NotPSDError

logger = logging.getLogger(__name__)

Matrix = npt.NDArray[np.float64]
Vector = npt.NDArray[np.float64]

# Sign-change scan used to confirm that the companion-matrix roots missed nothing.
_SCAN_LO = 1e-6
_SCAN_HI = 1e6
_SCAN_POINTS = 4000


def as_matrix(m: npt.ArrayLike) -> Matrix:
    """Convert to a finite 2-D float array.

    Raises:
        ValueError: If the input is not 2-D or holds non-finite entries.
    """
    arr = np.array(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def _require_square(m: Matrix, name: str = "matrix") -> None:
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")


def symmetrize(m: npt.ArrayLike) -> Matrix:
    """Return (M + Mᵀ)/2."""
    arr = as_matrix(m)
    _require_square(arr)
    return 0.5 * (arr + arr.T)


def cholesky(
    k: npt.ArrayLike,
    rank_tol: float = DEFAULT_TOLERANCES.rank,
    psd_tol: float = DEFAULT_TOLERANCES.matrix,
) -> Matrix:
    """Factor a PSD matrix as B·Bᵀ.

    Full-rank input gets the plain lower-triangular Cholesky factor. Rank-deficient
    input goes through LAPACK's pivoted Cholesky; the factor is returned with the
    pivoting undone on the rows, so its zero columns are trailing.

    Args:
        k: Symmetric positive semi-definite matrix.
        rank_tol: Eigenvalues (and pivots) at or below this are treated as zero.
        psd_tol: Relative tolerance for negative eigenvalues.

    Returns:
        Factor B with B·Bᵀ = K.

    Raises:
        NotPSDError: If K has an eigenvalue below -psd_tol·‖K‖.
    """
    sym = symmetrize(k)
    n = sym.shape[0]
    norm = float(np.linalg.norm(sym))
    if norm == 0.0:
        return np.zeros((n, n))

    min_eig = float(np.linalg.eigvalsh(sym)[0])
    if min_eig < -psd_tol * norm:
        raise NotPSDError(f"matrix has eigenvalue {min_eig:.3e} below -{psd_tol}*||K||")

    if min_eig > rank_tol:
        return np.asarray(sla.cholesky(sym, lower=True), dtype=float)

    c, piv, rank, info = lapack.dpstrf(sym, tol=rank_tol, lower=1)
    if info < 0:
        raise ValueError(f"dpstrf rejected argument {-info}")
    factor = np.tril(c)
    factor[:, rank:] = 0.0
    perm = np.zeros((n, n))
    perm[piv - 1, np.arange(n)] = 1.0
    logger.debug(f"Pivoted Cholesky: rank {rank} of {n}")
    return np.asarray(perm @ factor, dtype=float)


def det(m: npt.ArrayLike) -> float:
    """Determinant of a square matrix (0 for singular input)."""
    arr = as_matrix(m)
    _require_square(arr)
    return float(np.linalg.det(arr))


def slogdet2(m: npt.ArrayLike) -> float:
    """log₂ of the determinant of a positive-definite matrix.

    Raises:
        NotPSDError: If the determinant is not positive.
    """
    arr = as_matrix(m)
    _require_square(arr)
    sign, logabs = np.linalg.slogdet(arr)
    if sign <= 0:
        raise NotPSDError("log-determinant requested for a matrix with non-positive determinant")
    return float(logabs / np.log(2.0))


def svd(m: npt.ArrayLike) -> tuple[Matrix, Matrix, Matrix]:
    """Singular value decomposition M = S·V·Dᵀ.

    Returns:
        Tuple (S, V, D) with S, D orthogonal and V a rectangular diagonal of
        singular values sorted in descending order.

    Raises:
        NoConvergenceError: If LAPACK fails to converge.
    """
    arr = as_matrix(m)
    try:
        u, s, vh = np.linalg.svd(arr)
    except np.linalg.LinAlgError as e:
        raise NoConvergenceError(f"SVD did not converge: {e}") from e
    v = np.zeros(arr.shape)
    v[np.arange(s.size), np.arange(s.size)] = s
    return u, v, vh.T


def sym_eigen(m: npt.ArrayLike) -> tuple[Vector, Matrix]:
    """Eigen-decomposition of a symmetric matrix, eigenvalues descending.

    Raises:
        NoConvergenceError: If LAPACK fails to converge.
    """
    sym = symmetrize(m)
    try:
        values, vectors = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as e:
        raise NoConvergenceError(f"eigen-decomposition did not converge: {e}") from e
    return values[::-1].copy(), vectors[:, ::-1].copy()


def interpolate(func: Callable[[Vector], Vector], degree: int) -> Polynomial:
    """Interpolate a polynomial of known degree from its values at Chebyshev nodes.

    Exact (up to rounding) when func is a polynomial of at most the given degree.
    """
    return Chebyshev.interpolate(func, degree).convert(kind=Polynomial)


def _scale(p: Polynomial) -> float:
    return float(np.max(np.abs(p.coef)))


def real_roots(p: Polynomial, tol: float = DEFAULT_TOLERANCES.achievability) -> list[float]:
    """Real roots of a polynomial, sorted ascending.

    Roots come from the companion-matrix eigenvalues, each polished by one Newton
    step. A sign-change scan over ±[1e-6, 1e6] then brackets any root the
    eigenvalue route missed.

    Args:
        p: Polynomial in ascending-coefficient form.
        tol: Accept x when |p(x)| ≤ tol·max|coeff|.

    Returns:
        Sorted, de-duplicated real roots.

    Raises:
        DegenerateInputError: If every coefficient is zero.
    """
    scale = _scale(p) if p.coef.size else 0.0
    if scale == 0.0 or not np.isfinite(scale):
        raise DegenerateInputError("polynomial has no non-zero coefficients")
    trimmed = p.trim(np.finfo(float).eps * scale)
    if trimmed.degree() < 1:
        return []

    deriv = trimmed.deriv()
    found: list[float] = []
    for z in trimmed.roots():
        if abs(z.imag) > 1e-6 * (1.0 + abs(z.real)):
            continue
        x = float(z.real)
        slope = float(deriv(x))
        if slope != 0.0:
            polished = x - float(trimmed(x)) / slope
            if abs(trimmed(polished)) <= abs(trimmed(x)):
                x = polished
        if abs(trimmed(x)) <= tol * scale:
            found.append(x)

    grid = np.geomspace(_SCAN_LO, _SCAN_HI, _SCAN_POINTS)
    for side in (grid, -grid[::-1]):
        values = trimmed(side)
        for i in np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)[0]:
            lo, hi = float(side[i]), float(side[i + 1])
            if any(lo <= r <= hi for r in found):
                continue
            root = float(brentq(trimmed, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))
            logger.debug(f"Sign-change scan recovered root {root:.6g}")
            found.append(root)

    found.sort()
    merged: list[float] = []
    for x in found:
        if merged and abs(x - merged[-1]) <= 1e-9 * (1.0 + abs(x)):
            continue
        merged.append(x)
    return merged
