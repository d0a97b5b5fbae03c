"""Data models for channels, coding-scheme parameters, and experiment results."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.polynomial import Polynomial

from .matkernel import Matrix, Vector, as_matrix

Scenario = Literal["simo", "diagonal-mimo", "generic-mimo"]
Scheme = Literal["scs", "scs-perm", "pcs"]
PrecoderStrategy = Literal["cholesky", "permutations"]
SearchFamily = Literal["triangular", "exhaustive"]

SCHEMES: tuple[Scheme, ...] = ("scs", "scs-perm", "pcs")
SCENARIOS: tuple[Scenario, ...] = ("simo", "diagonal-mimo", "generic-mimo")

# Ratios 2^(k/2) for k = -4..4.
DEFAULT_BETA_GRID: tuple[float, ...] = tuple(2.0 ** (k / 2) for k in range(-4, 5))
_COVARIANCE_SLACK = 1e-9


def _matrix_to_list(m: np.ndarray) -> list:
    return [[float(x) for x in row] for row in m]


@dataclass(frozen=True)
class Uniform:
    """Uniform distribution over [lo, hi] for channel coefficients."""

    lo: float
    hi: float

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, data: dict) -> Uniform:
        """Create from dictionary."""
        return cls(lo=float(data["lo"]), hi=float(data["hi"]))

    @property
    def label(self) -> str:
        """Short label such as uniform(0,1)."""
        return f"uniform({self.lo:g},{self.hi:g})"


@dataclass(frozen=True, eq=False)
class ChannelPair:
    """Channel matrices H1, H2 of a two-user MIMO MAC, both r×t."""

    h1: Matrix
    h2: Matrix

    def __post_init__(self) -> None:
        h1 = as_matrix(self.h1)
        h2 = as_matrix(self.h2)
        if h1.shape != h2.shape:
            raise ValueError(f"H1 {h1.shape} and H2 {h2.shape} must share dimensions")
        object.__setattr__(self, "h1", h1)
        object.__setattr__(self, "h2", h2)

    @property
    def r(self) -> int:
        """Receive-antenna count."""
        return int(self.h1.shape[0])

    @property
    def t(self) -> int:
        """Transmit-antenna count per user."""
        return int(self.h1.shape[1])

    @property
    def channels(self) -> tuple[Matrix, Matrix]:
        """(H1, H2)."""
        return (self.h1, self.h2)

    def rotated(self, q: Matrix) -> ChannelPair:
        """Left-multiply both channels by a common matrix."""
        return ChannelPair(h1=q @ self.h1, h2=q @ self.h2)

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {"h1": _matrix_to_list(self.h1), "h2": _matrix_to_list(self.h2)}

    @classmethod
    def from_dict(cls, data: dict) -> ChannelPair:
        """Create from dictionary."""
        return cls(h1=np.array(data["h1"], dtype=float), h2=np.array(data["h2"], dtype=float))


@dataclass(frozen=True, eq=False)
class CovariancePair:
    """Input covariances K1, K2 under a per-user trace budget P (linear)."""

    k1: Matrix
    k2: Matrix
    power: float

    def __post_init__(self) -> None:
        slack = _COVARIANCE_SLACK * max(1.0, self.power)
        for name, k in (("k1", self.k1), ("k2", self.k2)):
            if k.ndim != 2 or k.shape[0] != k.shape[1]:
                raise ValueError(f"{name} must be square, got shape {k.shape}")
            if float(np.trace(k)) > self.power + slack:
                raise ValueError(
                    f"{name} trace {float(np.trace(k)):.6g} exceeds power {self.power:.6g}"
                )
            if float(np.linalg.eigvalsh(0.5 * (k + k.T))[0]) < -slack:
                raise ValueError(f"{name} is not positive semidefinite")

    @property
    def covariances(self) -> tuple[Matrix, Matrix]:
        """(K1, K2)."""
        return (self.k1, self.k2)

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "k1": _matrix_to_list(self.k1),
            "k2": _matrix_to_list(self.k2),
            "power": self.power,
        }

    @classmethod
    def from_dict(cls, data: dict) -> CovariancePair:
        """Create from dictionary."""
        return cls(
            k1=np.array(data["k1"], dtype=float),
            k2=np.array(data["k2"], dtype=float),
            power=float(data["power"]),
        )


@dataclass(frozen=True, eq=False)
class CapacityResult:
    """Sum capacity (bits), its determinant C_d, and the optimal covariances."""

    c_sum: float
    c_d: float
    covariances: CovariancePair

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {"c_sum": self.c_sum, "c_d": self.c_d, "covariances": self.covariances.to_dict()}


@dataclass(frozen=True, eq=False)
class ScsParams:
    """Serial-scheme parameters: coefficient vectors, scaling, and precoders."""

    a: tuple[int, int]
    b: tuple[int, int]
    beta: tuple[float, float]
    b1: Matrix
    b2: Matrix

    @property
    def a_tilde(self) -> tuple[float, float]:
        """(a1·β1, a2·β2)."""
        return (self.a[0] * self.beta[0], self.a[1] * self.beta[1])

    @property
    def b_tilde(self) -> tuple[float, float]:
        """(b1·β1, b2·β2)."""
        return (self.b[0] * self.beta[0], self.b[1] * self.beta[1])

    @property
    def cross(self) -> float:
        """ã1·b̃2 − ã2·b̃1."""
        at, bt = self.a_tilde, self.b_tilde
        return at[0] * bt[1] - at[1] * bt[0]


@dataclass(frozen=True)
class ScsRatePair:
    """Serial-scheme rates for a fixed parameter choice."""

    r_a: tuple[float, float]
    r_b_given_a: tuple[float, float]
    rates: tuple[float, float]
    m_det: float
    feasible: bool

    @property
    def sum_rate(self) -> float:
        """R1 + R2."""
        return self.rates[0] + self.rates[1]

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "r_a": list(self.r_a),
            "r_b_given_a": list(self.r_b_given_a),
            "rates": list(self.rates),
            "m_det": self.m_det,
            "feasible": self.feasible,
        }


@dataclass(frozen=True, eq=False)
class ScsReport:
    """Verdict of the serial-scheme sum-capacity condition."""

    achievable: bool
    g_poly: Polynomial
    g_min: float
    precoder_choice: PrecoderStrategy
    gamma_witness: float | None = None
    gamma_interval: tuple[float, float] | None = None
    permutation: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "achievable": self.achievable,
            "g_coefficients": [float(c) for c in self.g_poly.coef],
            "g_min": self.g_min,
            "precoder_choice": self.precoder_choice,
            "gamma_witness": self.gamma_witness,
            "gamma_interval": list(self.gamma_interval) if self.gamma_interval else None,
            "permutation": [list(p) for p in self.permutation] if self.permutation else None,
        }


@dataclass(frozen=True)
class SimoResult:
    """Discriminant test for the single-antenna-per-user case."""

    delta: float
    c_d: float
    gamma_interval: tuple[float, float] | None

    @property
    def achievable(self) -> bool:
        """True when the discriminant is non-negative."""
        return self.delta >= 0

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "delta": self.delta,
            "c_d": self.c_d,
            "achievable": self.achievable,
            "gamma_interval": list(self.gamma_interval) if self.gamma_interval else None,
        }


@dataclass(frozen=True)
class PowerThreshold:
    """Power above which the SIMO condition is guaranteed."""

    collinear: bool
    condition_met: bool
    p_star: float | None


@dataclass(frozen=True)
class DiagonalVerdict:
    """Which of the two diagonal-channel conditions holds, if either."""

    condition1: bool
    condition2: bool
    gamma1: float | None
    gamma2: float | None
    p_threshold: float | None = None

    @property
    def engaged(self) -> int | None:
        """1 or 2 for the first condition that holds, else None."""
        if self.condition1:
            return 1
        if self.condition2:
            return 2
        return None

    @property
    def gamma(self) -> float | None:
        """γ associated with the engaged condition."""
        if self.condition1:
            return self.gamma1
        if self.condition2:
            return self.gamma2
        return None


@dataclass(frozen=True)
class SvdVerdict:
    """Shared-SVD check result."""

    achievable: bool
    discriminants: tuple[float, ...]
    index: int | None = None
    gamma: float | None = None

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "achievable": self.achievable,
            "discriminants": list(self.discriminants),
            "index": self.index,
            "gamma": self.gamma,
        }


@dataclass(frozen=True, eq=False)
class StructureReport:
    """Whether H1·B1 and H2·B2 share left and right singular factors."""

    shared_svd: bool
    s: Matrix | None = None
    v1: Matrix | None = None
    v2: Matrix | None = None
    d: Matrix | None = None

    @property
    def singular_values(self) -> tuple[Vector, Vector] | None:
        """Diagonals of V1 and V2 when shared."""
        if self.v1 is None or self.v2 is None:
            return None
        return (np.diag(self.v1).copy(), np.diag(self.v2).copy())


@dataclass(frozen=True, eq=False)
class PcsSystem:
    """Equivalent SIMO system seen by the parallel coding scheme."""

    h_tilde: Matrix
    t1: int
    t2: int
    l_factor: Matrix

    @property
    def n(self) -> int:
        """Number of codebooks t1 + t2."""
        return self.t1 + self.t2


@dataclass(frozen=True, eq=False)
class PcsWitness:
    """Integer matrix, decode assignment, and scaling that reach the sum capacity."""

    a_matrix: np.ndarray
    pi: tuple[int, ...]
    beta: Vector
    sigma_hat: Vector

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "a_matrix": [[int(x) for x in row] for row in self.a_matrix],
            "pi": list(self.pi),
            "beta": [float(x) for x in self.beta],
            "sigma_hat_sq": [float(x) for x in self.sigma_hat],
        }


@dataclass(frozen=True, eq=False)
class PcsRates:
    """Per-codebook rates of the parallel scheme."""

    rates: Vector
    sigma_hat: Vector

    @property
    def sum_rate(self) -> float:
        """Σ r_i."""
        return float(np.sum(self.rates))


@dataclass(frozen=True)
class PcsSearch:
    """Bounds of the integer-matrix and scaling search."""

    entry_bound: int = 3
    beta_grid: tuple[float, ...] = DEFAULT_BETA_GRID
    family: SearchFamily = "triangular"

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "entry_bound": self.entry_bound,
            "beta_grid": list(self.beta_grid),
            "family": self.family,
        }

    @classmethod
    def from_dict(cls, data: dict) -> PcsSearch:
        """Create from dictionary."""
        default = cls()
        return cls(
            entry_bound=int(data.get("entry_bound", default.entry_bound)),
            beta_grid=tuple(float(x) for x in data.get("beta_grid", default.beta_grid)),
            family=data.get("family", default.family),
        )


@dataclass(frozen=True, eq=False)
class AchievabilityReport:
    """Verdict of the parallel-scheme search."""

    scheme: Scheme
    achievable: bool
    c_sum: float
    sum_rate: float | None = None
    witness: PcsWitness | None = None
    t1: int = 0
    t2: int = 0

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "scheme": self.scheme,
            "achievable": self.achievable,
            "c_sum": self.c_sum,
            "sum_rate": self.sum_rate,
            "t1": self.t1,
            "t2": self.t2,
            "witness": self.witness.to_dict() if self.witness else None,
        }


@dataclass(frozen=True)
class SweepConfig:
    """Monte Carlo sweep description."""

    scenario: Scenario
    r: int
    t: int
    dist: Uniform
    power_grid_db: tuple[float, ...]
    realizations: int
    seed: int
    schemes: tuple[Scheme, ...] = ("scs",)
    pcs_search: PcsSearch = field(default_factory=PcsSearch)

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "scenario": self.scenario,
            "r": self.r,
            "t": self.t,
            "dist": self.dist.to_dict(),
            "power_grid_db": list(self.power_grid_db),
            "realizations": self.realizations,
            "seed": self.seed,
            "schemes": list(self.schemes),
            "pcs_search": self.pcs_search.to_dict(),
        }

    def to_json(self, indent: int = 2) -> str:
        """Serialize to JSON string."""
        return json.dumps(self.to_dict(), indent=indent)


@dataclass(frozen=True)
class RaPoint:
    """Achievability tally for one (power, scheme) pair."""

    p_db: float
    scheme: Scheme
    realizations: int
    achievable: int
    errors: int

    @property
    def r_a(self) -> float:
        """Fraction of realizations reaching the sum capacity."""
        return self.achievable / self.realizations if self.realizations else 0.0

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "p_db": self.p_db,
            "scheme": self.scheme,
            "realizations": self.realizations,
            "achievable": self.achievable,
            "errors": self.errors,
            "r_a": self.r_a,
        }


@dataclass(frozen=True)
class RaCurve:
    """R_A per power point and scheme."""

    points: tuple[RaPoint, ...]

    def for_scheme(self, scheme: Scheme) -> tuple[RaPoint, ...]:
        """Points for one scheme, in power-grid order."""
        return tuple(p for p in self.points if p.scheme == scheme)

    def r_a(self, scheme: Scheme) -> dict[float, float]:
        """Mapping p_db → R_A for one scheme."""
        return {p.p_db: p.r_a for p in self.for_scheme(scheme)}

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {"points": [p.to_dict() for p in self.points]}


@dataclass(frozen=True)
class PairedPoint:
    """SCS versus permuted-SCS R_A at one power point."""

    p_db: float
    r_a_scs: float
    r_a_perm: float

    @property
    def delta(self) -> float:
        """R_A(permuted) − R_A(plain)."""
        return self.r_a_perm - self.r_a_scs

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "p_db": self.p_db,
            "r_a_scs": self.r_a_scs,
            "r_a_perm": self.r_a_perm,
            "delta": self.delta,
        }


@dataclass(frozen=True)
class Table1Row:
    """Verdict of one scheme at one power point on a fixed channel."""

    p_db: float
    scheme: Scheme
    achievable: bool
    error: str | None = None
    witness: dict | None = None

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "p_db": self.p_db,
            "scheme": self.scheme,
            "achievable": self.achievable,
            "error": self.error,
            "witness": self.witness,
        }
