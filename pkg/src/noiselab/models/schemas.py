"""Pydantic models for noiselab data structures."""

from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator
from scipy.interpolate import CubicSpline

ARRAY_CONFIG = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class TailContinuation(str, Enum):
    """Admissible convex continuations of the kernel beyond the cutoff."""
    TANGENT = "tangent"
    QUADRATIC = "quadratic"


class CorrectionKind(str, Enum):
    """Corrected kernels for the half-line transform."""
    B1 = "b1"
    B2 = "b2"


class SetStyle(str, Enum):
    """Placement of intervals inside each cell of an elementary set."""
    CENTERED = "centered"
    LEFT = "left"


class TrendClass(str, Enum):
    """Classification of a Z_n threshold scan."""
    DIVERGING = "diverging"
    STABILIZING = "stabilizing"
    COLLAPSING = "collapsing-to-Z"
    INCONCLUSIVE = "inconclusive"


class KakutaniVerdict(str, Enum):
    """Doubling-increment verdict for Kakutani partial sums."""
    EQUIVALENT = "equivalent-signature"
    SINGULAR = "singular-signature"
    INCONCLUSIVE = "inconclusive"


class ScheduleKind(str, Enum):
    """Named eps_n schedules for Z_n scans."""
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"
    CUSTOM = "custom"
    STANDARD = "standard"


# --------------------------------------------------------------------------- kernel


class KernelSpec(BaseModel):
    """Covariance kernel B(t) = 1/(t ln^alpha(1/t)) near 0 with a convex compact tail."""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., gt=1, description="Log exponent of the singularity")
    eps_cut: float = Field(..., gt=0, lt=1, description="End of the closed-form region")
    slope_at_cut: float = Field(..., lt=0, description="Right derivative of the tail at eps_cut")
    t_zero: float = Field(..., gt=0, description="Support endpoint; B vanishes beyond it")
    support_T: float = Field(default=1.0, gt=0, description="Horizon T for Gram work")
    continuation: TailContinuation = Field(default=TailContinuation.TANGENT)

    @model_validator(mode="after")
    def validate_support(self) -> "KernelSpec":
        """The tail must start at the cutoff and end after it."""
        if self.t_zero <= self.eps_cut:
            raise ValueError("t_zero must exceed eps_cut")
        return self

    def to_json_dict(self) -> Dict[str, Any]:
        """JSON form with the four core keys first."""
        return {
            "alpha": self.alpha,
            "eps_cut": self.eps_cut,
            "t_zero": self.t_zero,
            "support_T": self.support_T,
            "slope_at_cut": self.slope_at_cut,
            "continuation": self.continuation.value,
        }


class ShapeReport(BaseModel):
    """Grid witness of positivity, monotonicity, convexity and spectral positivity."""

    positive: bool
    decreasing: bool
    convex: bool
    min_bhat: float = Field(..., description="Minimum of the spectral density over the lambda grid")
    n_grid: int
    n_lambda: int

    @property
    def passed(self) -> bool:
        return self.positive and self.decreasing and self.convex and self.min_bhat >= -1e-9


class SpectrumTable(BaseModel):
    """Spectral density tabulated on a uniform head and a log-graded tail.

    Values beyond ``log_max`` follow ``tail_constant / ln^(alpha-1)(lambda)``.
    """

    model_config = ARRAY_CONFIG

    alpha: float
    lambdas: np.ndarray
    values: np.ndarray
    uniform_max: float
    log_max: float
    tail_constant: float = Field(..., description="B_hat * ln^(alpha-1) lambda at log_max")

    _uniform: CubicSpline = PrivateAttr()
    _graded: CubicSpline = PrivateAttr()

    def model_post_init(self, __context: Any) -> None:
        head = self.lambdas <= self.uniform_max
        tail = self.lambdas >= self.uniform_max
        self._uniform = CubicSpline(self.lambdas[head], self.values[head])
        self._graded = CubicSpline(np.log(self.lambdas[tail]), self.values[tail])

    def evaluate(self, lams: np.ndarray) -> np.ndarray:
        """Interpolated spectral density; even in lambda."""
        lam = np.abs(np.asarray(lams, dtype=float))
        out = np.empty_like(lam)
        head = lam <= self.uniform_max
        beyond = lam > self.log_max
        mid = ~head & ~beyond
        out[head] = self._uniform(lam[head])
        out[mid] = self._graded(np.log(lam[mid]))
        out[beyond] = self.tail_constant / np.log(lam[beyond]) ** (self.alpha - 1.0)
        return out

    def sup_beyond(self, lam: float) -> float:
        """Upper envelope of the tabulated density on [lam, inf)."""
        mask = self.lambdas >= lam
        tail_sup = float(self.tail_constant / np.log(max(lam, self.log_max)) ** (self.alpha - 1.0))
        if not np.any(mask):
            return tail_sup
        return max(float(np.max(self.values[mask])), tail_sup)

    def csv_rows(self) -> List[Tuple[float, float]]:
        return [(float(lam), float(v)) for lam, v in zip(self.lambdas, self.values)]


# --------------------------------------------------------------------------- spectral


class LinearPiece(BaseModel):
    """Linear function c0 + c1*t on the interval [a, b]."""

    model_config = ConfigDict(frozen=True)

    a: float
    b: float
    c0: float
    c1: float


class CorrectedKernel(BaseModel):
    """Kernel restricted to (0, T] plus a piecewise-linear correction on (0, 2T]."""

    model_config = ConfigDict(frozen=True)

    kind: CorrectionKind
    base: KernelSpec
    T: float = Field(..., gt=0)
    correction: Tuple[LinearPiece, ...]
    jump: float = Field(..., description="Value at T of the correction's hat function")


class AsymptoteReport(BaseModel):
    """Normalized half-line transform ratios on a lambda grid."""

    alpha: float
    T: float
    kind: CorrectionKind
    lambda_grid: List[float]
    ratio_value: List[float]
    ratio_derivative: List[float]
    value_decay_exponent: float = Field(..., description="Slope of log|ratio-1| against log(1/ln lambda)")
    derivative_decay_exponent: float
    max_deviation: float
    final_deviation: float

    @field_validator("lambda_grid")
    @classmethod
    def validate_grid(cls, v: List[float]) -> List[float]:
        """Grids are strictly increasing."""
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("lambda grid must be strictly increasing")
        return v

    @model_validator(mode="after")
    def validate_finite(self) -> "AsymptoteReport":
        if not (np.all(np.isfinite(self.ratio_value)) and np.all(np.isfinite(self.ratio_derivative))):
            raise ValueError("asymptote ratios must be finite")
        return self

    def csv_rows(self) -> List[Tuple[float, float, float]]:
        return list(zip(self.lambda_grid, self.ratio_value, self.ratio_derivative))


class HypothesisReport(BaseModel):
    """Grid assertion of the finite-variation hypotheses for the half-line asymptotics."""

    psi_increasing: bool = Field(..., description="(tB)' - 2B increasing on (0, eps_cut]")
    tb_variation: float = Field(..., description="Total variation of tB on (0, t_zero]")
    n_grid: int

    @property
    def passed(self) -> bool:
        return self.psi_increasing and bool(np.isfinite(self.tb_variation))


# --------------------------------------------------------------------------- gram


class GramMatrix(BaseModel):
    """Normalized Gram matrix of X_{-N..N} followed by Y_{-N..N}.

    X_j sits at flat index j + N, Y_j at 2N + 1 + j + N.
    """

    model_config = ARRAY_CONFIG

    N: int = Field(..., ge=1)
    alpha: float
    T: float
    matrix: np.ndarray
    norms2: np.ndarray = Field(..., description="Unnormalized ||X_j||^2 for j = -N..N")

    def x_index(self, j: int) -> int:
        return j + self.N

    def y_index(self, j: int) -> int:
        return 2 * self.N + 1 + j + self.N

    @property
    def size(self) -> int:
        return 2 * (2 * self.N + 1)

    @property
    def xx(self) -> np.ndarray:
        m = 2 * self.N + 1
        return self.matrix[:m, :m]

    @property
    def xy(self) -> np.ndarray:
        m = 2 * self.N + 1
        return self.matrix[:m, m:]

    @property
    def yy(self) -> np.ndarray:
        m = 2 * self.N + 1
        return self.matrix[m:, m:]

    def truncated(self, n: int) -> np.ndarray:
        """Sub-matrix over |j| <= n in both families."""
        keep = [self.x_index(j) for j in range(-n, n + 1)] + [self.y_index(j) for j in range(-n, n + 1)]
        return self.matrix[np.ix_(keep, keep)]

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "N": self.N,
            "alpha": self.alpha,
            "T": self.T,
            "ordering": "X_-N..X_N, Y_-N..Y_N",
            "entries": [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix],
        }


class HSDefect(BaseModel):
    """Squared Frobenius distance of a normalized Gram from the identity."""

    total: float
    truncations: List[int] = Field(..., description="Ascending truncations N'")
    partial_sums: List[float]
    increments: List[float] = Field(..., description="S_{2N'} - S_{N'} for consecutive truncations")


class DiagAsymptote(BaseModel):
    """Normalized diagonal Gram entries against their logarithmic asymptote."""

    alpha: float
    T: float
    k_list: List[int]
    ratios: List[float]
    slope: float


# --------------------------------------------------------------------------- gspace


class StepFunction(BaseModel):
    """Complex step function on (0, 1) with sorted, disjoint pieces."""

    model_config = ARRAY_CONFIG

    starts: np.ndarray
    ends: np.ndarray
    values: np.ndarray

    @model_validator(mode="after")
    def validate_pieces(self) -> "StepFunction":
        a, b = self.starts, self.ends
        if not (a.shape == b.shape == self.values.shape and a.ndim == 1):
            raise ValueError("starts, ends and values must be 1-D arrays of equal length")
        if np.any(a < 0) or np.any(b > 1) or np.any(b <= a):
            raise ValueError("pieces must satisfy 0 <= a < b <= 1")
        if np.any(a[1:] < b[:-1]):
            raise ValueError("pieces must be sorted and disjoint")
        return self

    @classmethod
    def from_pieces(cls, pieces: List[Tuple[float, float, complex]]) -> "StepFunction":
        ordered = sorted(pieces, key=lambda p: p[0])
        return cls(
            starts=np.array([p[0] for p in ordered], dtype=float),
            ends=np.array([p[1] for p in ordered], dtype=float),
            values=np.array([p[2] for p in ordered], dtype=complex),
        )

    def scaled(self, c: complex) -> "StepFunction":
        return StepFunction(starts=self.starts, ends=self.ends, values=self.values * c)

    def jumps(self) -> Tuple[np.ndarray, np.ndarray]:
        """Breakpoints x and jump sizes f(x-) - f(x+)."""
        points = np.concatenate([self.starts, self.ends])
        sizes = np.concatenate([-self.values, self.values])
        xs, inverse = np.unique(points, return_inverse=True)
        jump = np.zeros(xs.shape, dtype=complex)
        np.add.at(jump, inverse, sizes)
        return xs, jump


class ElementarySet(BaseModel):
    """n equidistant intervals of equal length inside (0, 1)."""

    model_config = ARRAY_CONFIG

    n: int = Field(..., ge=1)
    mes: float = Field(..., gt=0, le=1)
    style: SetStyle
    starts: np.ndarray
    ends: np.ndarray

    @property
    def length(self) -> float:
        return self.mes / self.n

    def to_step(self, scale: complex = 1.0) -> StepFunction:
        return StepFunction(
            starts=self.starts,
            ends=self.ends,
            values=np.full(self.n, scale, dtype=complex),
        )


class SpectralNorm(BaseModel):
    """Frequency-domain G-inner product with its truncation bookkeeping."""

    value: complex
    tail_estimate: float
    tail_bound: float
    lambda_max: float
    precision_warning: bool


class ZnStats(BaseModel):
    """Variance and correlation of Z_n against Z."""

    n: int
    eps_n: float
    theta: float = Field(..., description="eps_n * ln^(alpha-1) n")
    var_Z: float
    var_Zn: float = Field(..., ge=0)
    cov: float
    corr: float

    @model_validator(mode="after")
    def validate_corr(self) -> "ZnStats":
        if abs(self.corr) > 1.0 + 1e-9:
            raise ValueError(f"correlation out of range: {self.corr}")
        return self


class ThresholdScan(BaseModel):
    """Z_n statistics along a schedule plus its trend classification."""

    alpha: float
    rows: List[ZnStats]
    classification: TrendClass

    def csv_rows(self) -> List[Tuple[Any, ...]]:
        return [(r.n, r.eps_n, r.theta, r.var_Z, r.var_Zn, r.cov, r.corr) for r in self.rows]


class SeparationRow(BaseModel):
    """Norms and overlaps of g_n = 1_{E_n}/mes against g = 1_(0,1) in one system."""

    n: int
    mes: float
    system: str
    alpha: float
    norm_gn: float
    inner_gn_g: float
    dist_gn_g: float
    overlap: float = Field(..., description="<g_n, g> / (||g_n|| ||g||)")


class SeparationReport(BaseModel):
    alpha_a: float
    alpha_b: float
    rows: List[SeparationRow]
    separated: bool
    b_floor: float = Field(..., description="Smallest system-B overlap")
    a_final_over_initial: float

    def series(self, system: str) -> List[SeparationRow]:
        return [r for r in self.rows if r.system == system]


class ComplementDistance(BaseModel):
    """Distance between g = 1_(0,1) and its restriction to the complement of E."""

    mes: float
    value: float
    bound: float


# --------------------------------------------------------------------------- measures


class DiscreteMeasurePair(BaseModel):
    """Two probability vectors on a common finite support."""

    model_config = ARRAY_CONFIG

    p: np.ndarray
    q: np.ndarray

    @model_validator(mode="after")
    def validate_weights(self) -> "DiscreteMeasurePair":
        if self.p.shape != self.q.shape or self.p.ndim != 1 or self.p.size == 0:
            raise ValueError("p and q must be non-empty 1-D arrays of equal length")
        for name, w in (("p", self.p), ("q", self.q)):
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError(f"{name} has negative or non-finite weights")
            if abs(float(np.sum(w)) - 1.0) > 1e-12:
                raise ValueError(f"{name} must sum to 1, got {float(np.sum(w))!r}")
        return self


class SandwichCheck(BaseModel):
    affinity: float
    distance: float
    lower_margin: float = Field(..., description="(1 - A) - (d/2)^2")
    upper_margin: float = Field(..., description="d/2 - (1 - A)")
    holds: bool


class SpectralRatios(BaseModel):
    """Norm ratios lambda_k with optional means m_k."""

    model_config = ARRAY_CONFIG

    lambdas: np.ndarray
    means: Optional[np.ndarray] = None

    @model_validator(mode="after")
    def validate_ratios(self) -> "SpectralRatios":
        if self.lambdas.ndim != 1:
            raise ValueError("lambdas must be 1-D")
        if np.any(self.lambdas <= 0) or not np.all(np.isfinite(self.lambdas)):
            raise ValueError("all ratios must be positive and finite")
        if self.means is not None and self.means.shape != self.lambdas.shape:
            raise ValueError("means must match lambdas")
        return self


class GaussianAffinity(BaseModel):
    value: float
    log_value: float
    underflow: bool


class KakutaniReport(BaseModel):
    truncations: List[int]
    sum_sq_sigma: float
    sum_sq_mean: float
    partial_sums: List[float]
    increments: List[float]
    verdict: KakutaniVerdict


# --------------------------------------------------------------------------- fock


class PureState(BaseModel):
    """Normalized bipartite state stored as a d1 x d2 amplitude matrix."""

    model_config = ARRAY_CONFIG

    amplitudes: np.ndarray

    @model_validator(mode="after")
    def validate_state(self) -> "PureState":
        if self.amplitudes.ndim != 2:
            raise ValueError("amplitudes must be a d1 x d2 matrix")
        norm2 = float(np.sum(np.abs(self.amplitudes) ** 2))
        if abs(norm2 - 1.0) > 1e-12:
            raise ValueError(f"state is not normalized: |psi|^2 = {norm2!r}")
        return self

    @property
    def d1(self) -> int:
        return int(self.amplitudes.shape[0])

    @property
    def d2(self) -> int:
        return int(self.amplitudes.shape[1])


class DensityMatrix(BaseModel):
    """Hermitian PSD trace-one matrix."""

    model_config = ARRAY_CONFIG

    entries: np.ndarray

    @model_validator(mode="after")
    def validate_density(self) -> "DensityMatrix":
        rho = self.entries
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("density matrix must be square")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > 1e-12:
            raise ValueError("density matrix must be Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-10:
            raise ValueError("density matrix must have unit trace")
        if np.min(np.linalg.eigvalsh(rho)) < -1e-10:
            raise ValueError("density matrix must be positive semidefinite")
        return self

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])


class LipschitzCheck(BaseModel):
    lhs: float = Field(..., description="Trace norm of the difference of reduced states")
    rhs: float = Field(..., description="2 ||psi1 - psi2||")
    holds: bool
    margin: float


class CovarianceCheck(BaseModel):
    max_deviation_left: float
    max_deviation_right: float
    holds: bool


class CoherentCheck(BaseModel):
    beta: complex
    fock_dim: int
    tail_mass: float
    lhs: float
    lhs_closed_form: float
    rhs: float
    holds: bool
    margin: float


class FockSuiteReport(BaseModel):
    seed: int
    trials: int
    lipschitz_worst_margin: float
    reduce_worst_eigenvalue: float
    reduce_worst_trace_error: float
    covariance_worst_deviation: float
    coherent_worst_margin: float
    coherent_grid: int

    @property
    def passed(self) -> bool:
        return (
            self.lipschitz_worst_margin >= -1e-10
            and self.reduce_worst_eigenvalue >= -1e-10
            and self.reduce_worst_trace_error <= 1e-10
            and self.covariance_worst_deviation <= 1e-10
            and self.coherent_worst_margin >= -1e-8
        )


# --------------------------------------------------------------------------- sim


class BinCov(BaseModel):
    """Covariance of bin integrals of the noise over equal bins of (0, 1)."""

    model_config = ARRAY_CONFIG

    n_bins: int = Field(..., ge=2)
    matrix: np.ndarray
    factor: np.ndarray = Field(..., description="F with F F^T equal to the repaired matrix")
    clip_mass: float = Field(..., ge=0)
    trace: float

    @property
    def clip_ratio(self) -> float:
        return self.clip_mass / self.trace


class ZnMonteCarlo(BaseModel):
    n: int
    eps_n: float
    n_samples: int
    seed: int
    bins_per_cell: int
    var_hat: float
    var_ci: Tuple[float, float]
    corr_hat: float
    corr_ci: Tuple[float, float]
    var_quadrature: float
    corr_quadrature: float
    var_lagsum: float = Field(..., description="Var Z_n from the gspace lag sum")
    corr_lagsum: float = Field(..., description="corr(Z, Z_n) from the gspace lag sum")
    clip_ratio: float

    @property
    def corr_half_width(self) -> float:
        return 0.5 * (self.corr_ci[1] - self.corr_ci[0])

    @property
    def bracketed(self) -> bool:
        return abs(self.corr_quadrature - self.corr_hat) <= self.corr_half_width + 1e-3


# --------------------------------------------------------------------------- cli


class ExperimentConfig(BaseModel):
    """Per-run experiment parameters, echoed into every report."""

    model_config = ConfigDict(extra="forbid")

    alpha: float = Field(default=2.0, gt=1)
    alpha_a: float = Field(default=1.5, gt=1)
    alpha_b: float = Field(default=2.5, gt=1)
    T: float = Field(default=1.0, gt=0)
    N: int = Field(default=128, ge=1)
    schedule: ScheduleKind = Field(default=ScheduleKind.CRITICAL)
    schedule_constant: float = Field(default=1.0, gt=0)
    n_min: int = Field(default=64, ge=2)
    n_max: int = Field(default=16384, ge=2)
    eps_file: Optional[str] = None
    mes: Optional[float] = Field(default=None, gt=0, lt=1)
    seed: Optional[int] = Field(default=None, ge=0)
    samples: int = Field(default=100000, ge=100)
    out: str = Field(default="reports")
    tol_quad: Optional[float] = Field(default=None, gt=0, lt=1)
    format: str = Field(default="both")
    lambda_decades: Tuple[int, int] = Field(default=(2, 7))
    per_decade: int = Field(default=8, ge=1)
    k_list: List[int] = Field(default_factory=lambda: [1000, 10000, 100000])
    scan_points: List[Tuple[int, float]] = Field(
        default_factory=lambda: [(16, 0.5), (32, 0.25), (64, 0.1), (64, 0.5), (128, 0.25), (32, 1.0)]
    )
    p: Optional[List[float]] = None
    q: Optional[List[float]] = None
    ratios: Optional[List[float]] = None
    weights_file: Optional[str] = None
    suite_size: int = Field(default=1000, ge=1)
    fock_dim: int = Field(default=60, ge=2)
    dump_matrix: bool = False

    @field_validator("format")
    @classmethod
    def validate_format(cls, v: str) -> str:
        valid = ["csv", "json", "both"]
        if v.lower() not in valid:
            raise ValueError(f"format must be one of: {valid}")
        return v.lower()

    @model_validator(mode="after")
    def validate_ranges(self) -> "ExperimentConfig":
        if self.n_max < self.n_min:
            raise ValueError("n_max must not be below n_min")
        if self.lambda_decades[1] <= self.lambda_decades[0]:
            raise ValueError("lambda_decades must be increasing")
        return self


class CheckResult(BaseModel):
    """One named acceptance check; serialized with the key ``pass``."""

    model_config = ConfigDict(populate_by_name=True)

    name: str
    passed: bool = Field(..., serialization_alias="pass")
    margin: float


class CommandReport(BaseModel):
    """JSON summary written next to every CSV body."""

    command: str
    version: str
    timestamp: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    config: Dict[str, Any]
    results: Dict[str, Any]
    checks: List[CheckResult] = Field(default_factory=list)
    runtime_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)
