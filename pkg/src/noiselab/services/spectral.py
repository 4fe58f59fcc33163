"""Half-line Fourier transforms of the corrected kernels b1, b2 and their asymptotics."""

import time
from typing import List, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import trapezoid

from config.settings import settings
from noiselab.core.exceptions import NoiseLabException, ParameterError, QuadratureError
from noiselab.core.quadrature import QuadResult, WeightPiece, polynomial_transform
from noiselab.models.schemas import (
    AsymptoteReport,
    CorrectedKernel,
    CorrectionKind,
    HypothesisReport,
    KernelSpec,
    LinearPiece,
)
from noiselab.services.kernel import (
    closed_form,
    eval_B,
    kernel_moments,
    kernel_values,
    weighted_transform,
)
from noiselab.utils.logger import get_logger

logger = get_logger(__name__)

LAMBDA_MIN = 1e2
LAMBDA_MAX = 1e7
FD_STEP = 1e-4


def _kernel_at(k: KernelSpec, t: float) -> float:
    return eval_B(k, t) if t < k.t_zero else 0.0


def make_corrected(k: KernelSpec, T: float, kind: CorrectionKind = CorrectionKind.B1) -> CorrectedKernel:
    """Attach the piecewise-linear hat correction that makes b continuous on (0, inf)."""
    try:
        kind = CorrectionKind(kind)
    except ValueError as e:
        raise ParameterError(f"Unknown corrected kernel kind: {kind}") from e
    if not T > 0:
        raise ParameterError(f"T must be positive, got {T}")
    if T > 0.5 * k.t_zero:
        logger.info("Horizon beyond half the support", T=T, t_zero=k.t_zero)

    if kind is CorrectionKind.B1:
        c = _kernel_at(k, T)
    else:
        c = _kernel_at(k, T) - _kernel_at(k, 2.0 * T)
    correction = (
        LinearPiece(a=0.0, b=T, c0=-c, c1=c / T),
        LinearPiece(a=T, b=2.0 * T, c0=2.0 * c, c1=-c / T),
    )
    return CorrectedKernel(kind=kind, base=k, T=T, correction=correction, jump=c)


def eval_corrected(b: CorrectedKernel, t: np.ndarray) -> np.ndarray:
    """b(t) for t > 0; zero from 2T on."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ParameterError("corrected kernels are evaluated on t > 0 only")
    T = b.T
    out = np.where(t <= T, kernel_values(b.base, t), 0.0)
    if b.kind is CorrectionKind.B2:
        out = out - np.where(t <= T, kernel_values(b.base, t + T), 0.0)
    for piece in b.correction:
        inside = (t > piece.a) & (t <= piece.b)
        out = out + np.where(inside, piece.c0 + piece.c1 * t, 0.0)
    return out


def _correction_transform(b: CorrectedKernel, lams: np.ndarray, moment: int) -> np.ndarray:
    shift = Polynomial([0.0, 1.0]) ** moment
    total = np.zeros(lams.shape, dtype=complex)
    for piece in b.correction:
        total += polynomial_transform(Polynomial([piece.c0, piece.c1]) * shift, piece.a, piece.b, lams)
    return total


def _halfline(b: CorrectedKernel, lams: np.ndarray, moment: int, rtol: float) -> QuadResult:
    """int_0^inf t^moment b(t) exp(i lam t) dt."""
    T = b.T
    weight = (1.0, 0.0) if moment == 0 else (0.0, 1.0)
    main = weighted_transform(b.base, lams, [WeightPiece(0.0, T, *weight)], rtol)
    value = main.value + _correction_transform(b, lams, moment)
    error = main.error.copy()
    if b.kind is CorrectionKind.B2:
        # int_0^T t^m B(t + T) e^{i lam t} dt, written in x = t + T
        shifted_weight = (1.0, 0.0) if moment == 0 else (-T, 1.0)
        shifted = weighted_transform(b.base, lams, [WeightPiece(T, 2.0 * T, *shifted_weight)], rtol)
        value = value - np.exp(-1j * lams * T) * shifted.value
        error = error + shifted.error
    return QuadResult(value, error)


def halfline_transform(b: CorrectedKernel, lams: np.ndarray, rtol: Optional[float] = None) -> np.ndarray:
    """Vectorised b_hat on any real lambdas, including 0 and negative values."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    rtol = settings.halfline_rtol if rtol is None else rtol
    return _halfline(b, lams, 0, rtol).value


def fourier_halfline(b: CorrectedKernel, lam: float) -> complex:
    """b_hat(lam) = int_0^inf exp(i lam t) b(t) dt for lam > 0.

    Raises:
        ParameterError: if lam <= 0
        QuadratureError: if the error estimate misses the half-line tolerance
    """
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    return complex(halfline_transform(b, np.array([lam]))[0])


def halfline_derivative(b: CorrectedKernel, lams: np.ndarray, rtol: Optional[float] = None) -> np.ndarray:
    """d b_hat / d lam = i int_0^inf t exp(i lam t) b(t) dt."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    rtol = settings.halfline_rtol if rtol is None else rtol
    return 1j * _halfline(b, lams, 1, rtol).value


def finite_difference_gap(b: CorrectedKernel, lam: float) -> float:
    """Relative gap between the moment derivative and a central difference at lam."""
    h = FD_STEP * lam
    pair = halfline_transform(b, np.array([lam - h, lam + h]))
    central = (pair[1] - pair[0]) / (2.0 * h)
    exact = complex(halfline_derivative(b, np.array([lam]))[0])
    return float(abs(central - exact) / abs(exact))


def lambda_grid(first_decade: int = 2, last_decade: int = 7, per_decade: int = 8) -> np.ndarray:
    """Log-spaced grid from 10^first to 10^last inclusive."""
    count = (last_decade - first_decade) * per_decade + 1
    return np.logspace(first_decade, last_decade, count)


def _decay_exponent(lams: np.ndarray, ratios: np.ndarray) -> float:
    deviation = np.abs(ratios - 1.0)
    mask = deviation > 0
    if np.count_nonzero(mask) < 2:
        return float("nan")
    x = np.log(1.0 / np.log(lams[mask]))
    slope, _ = np.polyfit(x, np.log(deviation[mask]), 1)
    return float(slope)


def asymptote_check(
    k: KernelSpec,
    T: float,
    lambda_grid_values: Optional[Sequence[float]] = None,
    kind: CorrectionKind = CorrectionKind.B1
) -> AsymptoteReport:
    """Compare b_hat and its derivative with the logarithmic asymptotes.

    ratio_value = Re b_hat(lam) (alpha-1) ln^(alpha-1) lam and
    ratio_derivative = -Re(d b_hat/d lam) lam ln^alpha lam both tend to 1.
    """
    lams = lambda_grid() if lambda_grid_values is None else np.asarray(lambda_grid_values, dtype=float)
    if lams.size == 0 or np.any(np.diff(lams) <= 0):
        raise ParameterError("lambda grid must be non-empty and strictly increasing")
    if lams[0] < LAMBDA_MIN * (1 - 1e-12) or lams[-1] > LAMBDA_MAX * (1 + 1e-12):
        raise ParameterError(f"lambda grid must lie within [{LAMBDA_MIN:g}, {LAMBDA_MAX:g}]")

    start = time.time()
    b = make_corrected(k, T, kind)
    alpha = k.alpha
    try:
        value = halfline_transform(b, lams)
        derivative = halfline_derivative(b, lams)
    except NoiseLabException:
        raise
    except Exception as e:
        logger.error("Asymptote check failed", alpha=alpha, error=str(e), exc_info=True)
        raise QuadratureError(f"Failed to evaluate half-line transforms: {e}") from e

    log_lam = np.log(lams)
    ratio_value = value.real * (alpha - 1.0) * log_lam ** (alpha - 1.0)
    ratio_derivative = -derivative.real * lams * log_lam ** alpha
    deviation = np.abs(ratio_value - 1.0)

    logger.info(
        "Asymptote check finished",
        alpha=alpha,
        kind=b.kind.value,
        points=lams.size,
        final_ratio=float(ratio_value[-1]),
        elapsed_s=round(time.time() - start, 3),
    )
    return AsymptoteReport(
        alpha=alpha,
        T=T,
        kind=b.kind,
        lambda_grid=[float(x) for x in lams],
        ratio_value=[float(x) for x in ratio_value],
        ratio_derivative=[float(x) for x in ratio_derivative],
        value_decay_exponent=_decay_exponent(lams, ratio_value),
        derivative_decay_exponent=_decay_exponent(lams, ratio_derivative),
        max_deviation=float(np.max(deviation)),
        final_deviation=float(deviation[-1]),
    )


def continuation_gap(
    k_a: KernelSpec,
    k_b: KernelSpec,
    T: float,
    lambda_grid_values: Optional[Sequence[float]] = None
) -> np.ndarray:
    """|ratio_value_a - ratio_value_b| for two continuations sharing the germ at 0."""
    if k_a.alpha != k_b.alpha or k_a.eps_cut != k_b.eps_cut:
        raise ParameterError("continuations must share alpha and eps_cut")
    report_a = asymptote_check(k_a, T, lambda_grid_values)
    report_b = asymptote_check(k_b, T, lambda_grid_values)
    return np.abs(np.asarray(report_a.ratio_value) - np.asarray(report_b.ratio_value))


def hypothesis_report(k: KernelSpec, n_grid: int = 10_000) -> HypothesisReport:
    """Grid check that (tB)' - 2B = tB' - B increases near 0 and tB has finite variation."""
    if n_grid < 100:
        raise ParameterError(f"n_grid must be at least 100, got {n_grid}")
    t = np.geomspace(k.eps_cut * 1e-10, k.eps_cut, n_grid)
    log_inv = -np.log(t)
    slope = -(1.0 - k.alpha / log_inv) / (t * t * log_inv ** k.alpha)
    psi = t * slope - closed_form(t, k.alpha)
    psi_increasing = bool(np.all(np.diff(psi) >= -1e-12 * np.abs(psi[:-1])))

    tail = np.linspace(k.eps_cut, k.t_zero, n_grid)[1:]
    grid = np.concatenate([t, tail])
    tb = grid * kernel_values(k, grid)
    variation = float(np.sum(np.abs(np.diff(tb))) + tb[0])
    return HypothesisReport(psi_increasing=psi_increasing, tb_variation=variation, n_grid=grid.size)


def moment_bound(b: CorrectedKernel, n_grid: int = 20_000) -> float:
    """int |b| for the trivial bound |b_hat| <= int |b|; closed form on (0, t_first]."""
    first = 1e-12
    t = np.concatenate([
        np.geomspace(first, min(b.base.eps_cut, 2.0 * b.T), n_grid),
        np.linspace(min(b.base.eps_cut, 2.0 * b.T), 2.0 * b.T, n_grid)[1:],
    ])
    head, _ = kernel_moments(b.base, np.array([first]))
    return float(head[0]) + float(trapezoid(np.abs(eval_corrected(b, t)), t))


__all__: List[str] = [
    "asymptote_check",
    "continuation_gap",
    "eval_corrected",
    "finite_difference_gap",
    "fourier_halfline",
    "halfline_derivative",
    "halfline_transform",
    "hypothesis_report",
    "lambda_grid",
    "make_corrected",
    "moment_bound",
]
