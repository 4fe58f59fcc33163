"""Covariance kernel B_alpha, its closed-form primitives and its spectral density."""

import time
from functools import lru_cache
from typing import Iterable, List, Optional, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import ValidationError
from scipy import special

from config.settings import settings
from noiselab.core.exceptions import DomainError, ParameterError, QuadratureError, ShapeError
from noiselab.core.quadrature import (
    QuadResult,
    WeightPiece,
    filon_with_estimate,
    graded_edges,
    log_head,
    polynomial_transform,
)
from noiselab.models.schemas import KernelSpec, ShapeReport, SpectrumTable, TailContinuation
from noiselab.utils.logger import get_logger

logger = get_logger(__name__)

SHAPE_GRID = 10_000


def default_eps_cut(alpha: float) -> float:
    return min(float(np.exp(-(alpha + 2.0))), 0.05)


def closed_form(t: np.ndarray, alpha: float) -> np.ndarray:
    """1/(t ln^alpha(1/t)) for 0 < t < 1."""
    return 1.0 / (t * (-np.log(t)) ** alpha)


def closed_form_slope(t: float, alpha: float) -> float:
    log_inv = -np.log(t)
    return float(-(1.0 - alpha / log_inv) / (t * t * log_inv ** alpha))


def make_kernel(
    alpha: float,
    eps_cut: Optional[float] = None,
    T: Optional[float] = None,
    continuation: TailContinuation = TailContinuation.TANGENT
) -> KernelSpec:
    """Build the kernel with a convex decreasing tail and compact support.

    Raises:
        ParameterError: if alpha <= 1 or the horizon is not positive
        ShapeError: if the closed form is not decreasing up to eps_cut or the
            grid check fails
    """
    if not alpha > 1.0:
        raise ParameterError(f"alpha must exceed 1, got {alpha}")
    if T is not None and not T > 0:
        raise ParameterError(f"support_T must be positive, got {T}")
    eps = default_eps_cut(alpha) if eps_cut is None else float(eps_cut)
    if not 0.0 < eps < 1.0:
        raise ParameterError(f"eps_cut must lie in (0, 1), got {eps}")
    if eps >= np.exp(-alpha):
        raise ShapeError(
            f"eps_cut={eps:.6g} >= exp(-alpha)={np.exp(-alpha):.6g}: closed form is not decreasing there",
            error_code="KERNEL_NOT_DECREASING",
        )

    value = float(closed_form(np.array(eps), alpha))
    slope = closed_form_slope(eps, alpha)
    if continuation is TailContinuation.TANGENT:
        t_zero = eps + value / abs(slope)
    else:
        t_zero = eps + 2.0 * value / abs(slope)

    try:
        k = KernelSpec(
            alpha=alpha,
            eps_cut=eps,
            slope_at_cut=slope,
            t_zero=t_zero,
            support_T=1.0 if T is None else T,
            continuation=continuation,
        )
    except ValidationError as e:
        raise ParameterError(f"Invalid kernel parameters: {e}") from e

    report = _grid_shape(k, SHAPE_GRID)
    if not (report[0] and report[1] and report[2]):
        logger.error("Kernel shape check failed", alpha=alpha, eps_cut=eps, flags=report)
        raise ShapeError(
            "Kernel failed the positivity/monotonicity/convexity grid check",
            error_code="KERNEL_SHAPE",
            details={"positive": report[0], "decreasing": report[1], "convex": report[2]},
        )

    logger.debug("Kernel constructed", alpha=alpha, eps_cut=eps, t_zero=t_zero)
    return k


def tail_polynomial(k: KernelSpec) -> Polynomial:
    """Polynomial form of B on [eps_cut, t_zero]."""
    value = float(closed_form(np.array(k.eps_cut), k.alpha))
    if k.continuation is TailContinuation.TANGENT:
        return Polynomial([value - k.slope_at_cut * k.eps_cut, k.slope_at_cut])
    d = k.t_zero - k.eps_cut
    return value * Polynomial([1.0 + k.eps_cut / d, -1.0 / d]) ** 2


def kernel_values(k: KernelSpec, t: np.ndarray) -> np.ndarray:
    """Vectorised even kernel; raises DomainError at t = 0."""
    t = np.abs(np.asarray(t, dtype=float))
    if np.any(t == 0.0):
        raise DomainError("B is singular at t = 0", error_code="KERNEL_SINGULAR")
    out = np.zeros(t.shape)
    near = t <= k.eps_cut
    out[near] = closed_form(t[near], k.alpha)
    mid = ~near & (t < k.t_zero)
    out[mid] = np.maximum(tail_polynomial(k)(t[mid]), 0.0)
    return out


def eval_B(k: KernelSpec, t: float) -> float:
    """B(t) for real t != 0."""
    if t == 0:
        raise DomainError("B is singular at t = 0", error_code="KERNEL_SINGULAR")
    return float(kernel_values(k, np.array([t]))[0])


def _upper_gamma(s: float, x: np.ndarray) -> np.ndarray:
    """Upper incomplete gamma Gamma(s, x) for real s <= 1 and x > 0."""
    steps = int(np.ceil(-s)) if s < 0 else 0
    base = s + steps
    if base == 0.0:
        value = special.exp1(x)
    else:
        value = special.gammaincc(base, x) * special.gamma(base)
    # Gamma(a - 1, x) = (Gamma(a, x) - x^(a-1) e^-x) / (a - 1)
    a = base
    for _ in range(steps):
        value = (value - x ** (a - 1.0) * np.exp(-x)) / (a - 1.0)
        a -= 1.0
    return value


def kernel_moments(k: KernelSpec, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Closed-form K(x) = int_0^x B and M1(x) = int_0^x t B(t) dt for x >= 0."""
    x = np.asarray(x, dtype=float)
    eps, tz, alpha = k.eps_cut, k.t_zero, k.alpha
    K = np.zeros(x.shape)
    M1 = np.zeros(x.shape)

    near = (x > 0.0) & (x <= eps)
    log_inv = -np.log(x[near])
    K[near] = log_inv ** (1.0 - alpha) / (alpha - 1.0)
    M1[near] = _upper_gamma(1.0 - alpha, log_inv)

    far = x > eps
    if np.any(far):
        log_eps = -np.log(eps)
        K_eps = log_eps ** (1.0 - alpha) / (alpha - 1.0)
        M1_eps = float(_upper_gamma(1.0 - alpha, np.array(log_eps)))
        tail = tail_polynomial(k)
        prim0 = tail.integ(lbnd=eps)
        prim1 = (tail * Polynomial([0.0, 1.0])).integ(lbnd=eps)
        upper = np.minimum(x[far], tz)
        K[far] = K_eps + prim0(upper)
        M1[far] = M1_eps + prim1(upper)
    return K, M1


def second_primitive(k: KernelSpec, x: np.ndarray) -> np.ndarray:
    """Even function S00 with S00'' = B and S00(0) = S00'(0) = 0."""
    ax = np.abs(np.asarray(x, dtype=float))
    K, M1 = kernel_moments(k, ax)
    return ax * K - M1


def interval_overlap(
    k: KernelSpec, a1: np.ndarray, b1: np.ndarray, a2: np.ndarray, b2: np.ndarray
) -> np.ndarray:
    """Exact double integral of B(s - t) over (a1, b1) x (a2, b2)."""
    S = lambda u: second_primitive(k, u)  # noqa: E731
    return S(b1 - a2) - S(b1 - b2) - S(a1 - a2) + S(a1 - b2)


def _segments(k: KernelSpec, pieces: Iterable[WeightPiece]) -> List[WeightPiece]:
    out: List[WeightPiece] = []
    for a, b, c0, c1 in pieces:
        b = min(b, k.t_zero)
        if a >= b:
            continue
        if a < k.eps_cut < b:
            out.append(WeightPiece(a, k.eps_cut, c0, c1))
            out.append(WeightPiece(k.eps_cut, b, c0, c1))
        else:
            out.append(WeightPiece(a, b, c0, c1))
    return out


def _transform_batch(k: KernelSpec, lams: np.ndarray, pieces: List[WeightPiece]) -> QuadResult:
    value = np.zeros(lams.shape, dtype=complex)
    error = np.zeros(lams.shape)
    lam_max = float(np.max(np.abs(lams)))
    tail = tail_polynomial(k)

    for lo, hi, c0, c1 in _segments(k, pieces):
        weight = Polynomial([c0, c1])
        if lo >= k.eps_cut:
            value += polynomial_transform(tail * weight, lo, hi, lams)
            continue

        start = lo
        if lo == 0.0:
            t1 = hi if lam_max == 0.0 else min(hi, 1.0 / lam_max)
            head = log_head(
                lams, k.alpha, t1, c0, c1,
                settings.head_width, settings.head_panels, settings.head_nodes,
            )
            value += head.value
            error += head.error
            start = t1
        if hi > start * (1.0 + 1e-14):
            edges = graded_edges(start, hi, settings.graded_ratio)
            body = filon_with_estimate(lambda t: weight(t) * closed_form(t, k.alpha), edges, lams)
            value += body.value
            error += body.error
    return QuadResult(value, error)


def weighted_transform(
    k: KernelSpec,
    lams: np.ndarray,
    pieces: Iterable[WeightPiece],
    rtol: Optional[float] = None
) -> QuadResult:
    """int_0^inf w(t) B(t) exp(i*lam*t) dt for a piecewise-linear real weight.

    Lambdas are processed in batches of ``settings.lambda_batch`` sorted by
    modulus; members of a batch share their panel edges.

    Raises:
        QuadratureError: if any error estimate exceeds rtol*|value| + atol
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    rtol = settings.quad_rtol if rtol is None else rtol
    pieces = list(pieces)
    order = np.argsort(np.abs(lams), kind="stable")
    value = np.empty(lams.shape, dtype=complex)
    error = np.empty(lams.shape)

    for start in range(0, lams.size, settings.lambda_batch):
        idx = order[start:start + settings.lambda_batch]
        batch = _transform_batch(k, lams[idx], pieces)
        value[idx] = batch.value
        error[idx] = batch.error

    tolerance = rtol * np.abs(value) + settings.quad_atol
    if np.any(error > tolerance):
        j = int(np.argmax(error - tolerance))
        achieved = float(error[j] / max(abs(value[j]), np.finfo(float).tiny))
        logger.error(
            "Quadrature tolerance missed",
            lam=float(lams[j]),
            achieved=achieved,
            target=rtol,
        )
        raise QuadratureError(
            f"Quadrature missed tolerance at lambda={lams[j]:.6g}: "
            f"achieved relative error {achieved:.3e}, target {rtol:.1e}",
            error_code="QUAD_TOLERANCE",
            details={"lam": float(lams[j]), "achieved": achieved, "target": rtol},
        )
    return QuadResult(value, error)


def spectral_densities(k: KernelSpec, lams: np.ndarray, rtol: Optional[float] = None) -> np.ndarray:
    """Vectorised B_hat(lam) = 2 int_0^t_zero cos(lam t) B(t) dt."""
    res = weighted_transform(k, lams, [WeightPiece(0.0, k.t_zero, 1.0, 0.0)], rtol)
    return 2.0 * res.value.real


def spectral_density(k: KernelSpec, lam: float) -> float:
    """B_hat(lam) with the non-unitary convention int exp(i lam t) B(t) dt."""
    if not np.isfinite(lam):
        raise ParameterError(f"lambda must be finite, got {lam}")
    return float(spectral_densities(k, np.array([lam]))[0])


def _grid_shape(k: KernelSpec, n_grid: int) -> Tuple[bool, bool, bool]:
    half = n_grid // 2
    near = np.geomspace(k.eps_cut * 1e-8, k.eps_cut, half)
    far = np.linspace(k.eps_cut, k.t_zero, n_grid - half + 2)[1:-1]
    t = np.concatenate([near, far])
    values = kernel_values(k, t)
    slopes = np.diff(values) / np.diff(t)
    positive = bool(np.all(values > 0.0))
    decreasing = bool(np.all(slopes < 0.0))
    convex = bool(np.all(np.diff(slopes) >= -1e-9 * np.abs(slopes[:-1])))
    return positive, decreasing, convex


def shape_lambda_grid() -> np.ndarray:
    return np.concatenate([[0.0], 10.0 ** (np.arange(65) / 8.0)])


def shape_report(k: KernelSpec, n_grid: int = SHAPE_GRID) -> ShapeReport:
    """Report-only witness of the kernel shape and spectral positivity."""
    if n_grid < 100:
        raise ParameterError(f"n_grid must be at least 100, got {n_grid}")
    positive, decreasing, convex = _grid_shape(k, n_grid)
    lams = shape_lambda_grid()
    min_bhat = float(np.min(spectral_densities(k, lams)))
    return ShapeReport(
        positive=positive,
        decreasing=decreasing,
        convex=convex,
        min_bhat=min_bhat,
        n_grid=n_grid,
        n_lambda=lams.size,
    )


@lru_cache(maxsize=8)
def spectrum_table(k: KernelSpec) -> SpectrumTable:
    """Tabulate B_hat on [0, uniform_max] uniformly and up to log_max log-graded."""
    start = time.time()
    uniform = np.arange(0.0, settings.table_uniform_max + 0.5 * settings.table_uniform_step,
                        settings.table_uniform_step)
    decades = np.log10(settings.table_log_max / settings.table_uniform_max)
    count = int(np.ceil(decades * settings.table_per_decade))
    graded = np.geomspace(settings.table_uniform_max, settings.table_log_max, count + 1)[1:]
    lams = np.concatenate([uniform, graded])

    try:
        values = spectral_densities(k, lams)
    except QuadratureError:
        raise
    except Exception as e:
        logger.error("Spectrum table failed", alpha=k.alpha, error=str(e), exc_info=True)
        raise QuadratureError(f"Failed to tabulate spectral density: {e}") from e

    tail_constant = float(values[-1] * np.log(lams[-1]) ** (k.alpha - 1.0))
    logger.info(
        "Spectrum table built",
        alpha=k.alpha,
        points=lams.size,
        tail_constant=tail_constant,
        elapsed_s=round(time.time() - start, 3),
    )
    return SpectrumTable(
        alpha=k.alpha,
        lambdas=lams,
        values=values,
        uniform_max=float(uniform[-1]),
        log_max=float(lams[-1]),
        tail_constant=tail_constant,
    )
