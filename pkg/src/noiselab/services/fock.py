"""Reduced density matrices, their trace-norm bounds and the M(r) lower bound."""

import time
from typing import Optional, Union

import numpy as np
from pydantic import ValidationError
from scipy import linalg, optimize, stats
from scipy.special import gammaln

from config.settings import settings
from noiselab.core.exceptions import ParameterError, PrecisionError, ShapeError
from noiselab.models.schemas import (
    CoherentCheck,
    CovarianceCheck,
    DensityMatrix,
    FockSuiteReport,
    LipschitzCheck,
    PureState,
)
from noiselab.utils.logger import get_logger

logger = get_logger(__name__)

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-10
M_GRID = 1000
COHERENT_GRID = 50
COHERENT_MAX = 4.0
MAX_FACTOR_DIM = 6

StateLike = Union[PureState, np.ndarray]


def make_pure_state(amplitudes: np.ndarray) -> PureState:
    """Wrap a d1 x d2 amplitude matrix; it must already be normalized."""
    try:
        return PureState(amplitudes=np.asarray(amplitudes, dtype=complex))
    except ValidationError as e:
        raise ParameterError(f"Invalid pure state: {e}") from e


def normalize(amplitudes: np.ndarray) -> PureState:
    amplitudes = np.asarray(amplitudes, dtype=complex)
    norm = np.linalg.norm(amplitudes)
    if norm == 0:
        raise ParameterError("cannot normalize the zero vector")
    return make_pure_state(amplitudes / norm)


def _as_state(psi: StateLike) -> PureState:
    return psi if isinstance(psi, PureState) else make_pure_state(psi)


def reduce(psi: StateLike, side: str = "left") -> DensityMatrix:
    """Partial trace over the other factor: left psi psi^*, right psi^T conj(psi)."""
    amps = _as_state(psi).amplitudes
    if side == "left":
        rho = amps @ amps.conj().T
    elif side == "right":
        rho = amps.T @ amps.conj()
    else:
        raise ParameterError(f"side must be 'left' or 'right', got {side!r}")
    rho = 0.5 * (rho + rho.conj().T)
    try:
        return DensityMatrix(entries=rho)
    except ValidationError as e:
        raise ParameterError(f"Reduced state is not a density matrix: {e}") from e


def trace_norm(A: np.ndarray) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"trace_norm needs a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    if np.max(np.abs(A - A.conj().T), initial=0.0) > HERMITIAN_TOL * scale:
        raise ParameterError("trace_norm needs a Hermitian matrix")
    return float(np.sum(np.abs(linalg.eigvalsh(A))))


def lipschitz_check(psi1: StateLike, psi2: StateLike) -> LipschitzCheck:
    """||rho(psi1) - rho(psi2)||_1 <= 2 ||psi1 - psi2||."""
    s1, s2 = _as_state(psi1), _as_state(psi2)
    if s1.amplitudes.shape != s2.amplitudes.shape:
        raise ShapeError(
            f"state shapes differ: {s1.amplitudes.shape} vs {s2.amplitudes.shape}"
        )
    lhs = trace_norm(reduce(s1).entries - reduce(s2).entries)
    rhs = 2.0 * float(np.linalg.norm(s1.amplitudes - s2.amplitudes))
    return LipschitzCheck(lhs=lhs, rhs=rhs, holds=lhs <= rhs + 1e-10, margin=rhs - lhs)


def _require_unitary(U: np.ndarray, name: str) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {U.shape}")
    deviation = float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))
    if deviation > UNITARY_TOL:
        raise ParameterError(f"{name} is not unitary (deviation {deviation:.3e})")
    return U


def covariance_check(psi: StateLike, U1: np.ndarray, U2: np.ndarray) -> CovarianceCheck:
    """For psi' = U1 psi U2^T: rho_left(psi') = U1 rho_left U1^* and likewise on the right."""
    state = _as_state(psi)
    U1 = _require_unitary(U1, "U1")
    U2 = _require_unitary(U2, "U2")
    if U1.shape[0] != state.d1 or U2.shape[0] != state.d2:
        raise ShapeError("unitaries must match the factor dimensions")
    moved = make_pure_state(U1 @ state.amplitudes @ U2.T)

    left_expected = U1 @ reduce(state, "left").entries @ U1.conj().T
    right_expected = U2 @ reduce(state, "right").entries @ U2.conj().T
    dev_left = float(np.max(np.abs(reduce(moved, "left").entries - left_expected)))
    dev_right = float(np.max(np.abs(reduce(moved, "right").entries - right_expected)))
    return CovarianceCheck(
        max_deviation_left=dev_left,
        max_deviation_right=dev_right,
        holds=dev_left <= 1e-10 and dev_right <= 1e-10,
    )


def _m_profile(phi: np.ndarray, r: float) -> np.ndarray:
    return np.exp(-phi ** 2 / (2.0 * r * r)) * 2.0 * np.sin(0.5 * phi)


def M_of_r(r: float) -> float:
    """max over phi in [0, pi] of exp(-phi^2/2r^2) 2 sin(phi/2)."""
    if r < 0:
        raise ParameterError(f"r must be non-negative, got {r}")
    if r == 0:
        return 0.0
    phi = np.linspace(0.0, np.pi, M_GRID)
    values = _m_profile(phi, r)
    i = int(np.argmax(values))
    best = float(values[i])
    if i == 0 or i == M_GRID - 1:
        return best
    try:
        res = optimize.minimize_scalar(
            lambda x: -float(_m_profile(np.array(x), r)),
            bracket=(phi[i - 1], phi[i], phi[i + 1]),
            method="golden",
        )
    except ValueError as e:
        logger.debug("Golden refinement failed, keeping grid maximum", r=r, error=str(e))
        return best
    refined = float(_m_profile(np.array(np.clip(res.x, 0.0, np.pi)), r))
    return max(best, refined)


def coherent_state(beta: complex, fock_dim: Optional[int] = None) -> np.ndarray:
    """Truncated Fock amplitudes of the coherent state with amplitude beta.

    Raises:
        PrecisionError: if the Poisson mass beyond the truncation reaches the tolerance
    """
    dim = settings.fock_dim if fock_dim is None else int(fock_dim)
    if dim < 2:
        raise ParameterError(f"fock_dim must be at least 2, got {dim}")
    mean = abs(beta) ** 2
    tail = float(stats.poisson.sf(dim - 1, mean)) if mean > 0 else 0.0
    if tail >= settings.fock_tail_tolerance:
        raise PrecisionError(
            f"Coherent state truncation at {dim} loses mass {tail:.3e}",
            details={"beta": abs(beta), "fock_dim": dim, "tail_mass": tail},
        )

    n = np.arange(dim)
    amps = np.zeros(dim, dtype=complex)
    if mean == 0:
        amps[0] = 1.0
        return amps
    log_mod = -0.5 * mean + n * np.log(abs(beta)) - 0.5 * gammaln(n + 1)
    amps = np.exp(log_mod + 1j * n * np.angle(beta))
    return amps / np.linalg.norm(amps)


def coherent_bound_check(beta1: complex, fock_dim: Optional[int] = None) -> CoherentCheck:
    """Trace distance between the vacuum and a displaced factor against M(2|beta1|).

    The product state vacuum x vacuum is compared with beta1 x vacuum; the reduced
    states differ by 2 sqrt(1 - exp(-|beta1|^2)) in trace norm.
    """
    dim = settings.fock_dim if fock_dim is None else int(fock_dim)
    displaced = coherent_state(beta1, dim)
    tail = float(stats.poisson.sf(dim - 1, abs(beta1) ** 2)) if beta1 != 0 else 0.0

    vacuum = np.zeros((dim, 2), dtype=complex)
    vacuum[0, 0] = 1.0
    moved = np.zeros((dim, 2), dtype=complex)
    moved[:, 0] = displaced

    lhs = trace_norm(reduce(vacuum).entries - reduce(moved).entries)
    closed = float(2.0 * np.sqrt(-np.expm1(-abs(beta1) ** 2)))
    rhs = M_of_r(2.0 * abs(beta1))
    return CoherentCheck(
        beta=complex(beta1),
        fock_dim=dim,
        tail_mass=tail,
        lhs=lhs,
        lhs_closed_form=closed,
        rhs=rhs,
        holds=lhs >= rhs - 1e-8,
        margin=lhs - rhs,
    )


def random_pure_state(rng: np.random.Generator, d1: int, d2: int) -> PureState:
    raw = rng.standard_normal((d1, d2)) + 1j * rng.standard_normal((d1, d2))
    return normalize(raw)


def random_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    """Haar-distributed unitary."""
    if d == 1:
        return np.array([[np.exp(2j * np.pi * rng.uniform())]])
    return np.asarray(stats.unitary_group.rvs(d, random_state=rng))


def run_fock_suite(seed: int, trials: int) -> FockSuiteReport:
    """Randomized Lipschitz, reduction and covariance checks plus the coherent grid."""
    if trials < 1:
        raise ParameterError(f"trials must be positive, got {trials}")
    start = time.time()
    rng = np.random.default_rng(seed)
    worst_lipschitz = np.inf
    worst_eigen = np.inf
    worst_trace = 0.0
    worst_cov = 0.0

    for _ in range(trials):
        d1, d2 = (int(d) for d in rng.integers(1, MAX_FACTOR_DIM + 1, size=2))
        psi1 = random_pure_state(rng, d1, d2)
        noise = rng.standard_normal((d1, d2)) + 1j * rng.standard_normal((d1, d2))
        psi2 = normalize(psi1.amplitudes + rng.uniform() * noise)

        worst_lipschitz = min(worst_lipschitz, lipschitz_check(psi1, psi2).margin)
        for side in ("left", "right"):
            rho = reduce(psi1, side).entries
            worst_eigen = min(worst_eigen, float(linalg.eigvalsh(rho)[0]))
            worst_trace = max(worst_trace, abs(float(np.trace(rho).real) - 1.0))
        cov = covariance_check(psi1, random_unitary(rng, d1), random_unitary(rng, d2))
        worst_cov = max(worst_cov, cov.max_deviation_left, cov.max_deviation_right)

    moduli = np.linspace(COHERENT_MAX / COHERENT_GRID, COHERENT_MAX, COHERENT_GRID)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=COHERENT_GRID)
    worst_coherent = min(
        coherent_bound_check(m * np.exp(1j * p)).margin for m, p in zip(moduli, phases)
    )

    report = FockSuiteReport(
        seed=seed,
        trials=trials,
        lipschitz_worst_margin=float(worst_lipschitz),
        reduce_worst_eigenvalue=float(worst_eigen),
        reduce_worst_trace_error=float(worst_trace),
        covariance_worst_deviation=float(worst_cov),
        coherent_worst_margin=float(worst_coherent),
        coherent_grid=COHERENT_GRID,
    )
    logger.info(
        "Fock suite finished",
        seed=seed,
        trials=trials,
        passed=report.passed,
        elapsed_s=round(time.time() - start, 3),
    )
    return report
