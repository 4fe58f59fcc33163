"""Oscillatory quadrature primitives.

All transforms use the convention int f(t) exp(i*lam*t) dt. Panels follow the
Filon idea: the non-oscillatory factor is interpolated by a polynomial on each
panel and integrated exactly against the exponential, so accuracy does not
degrade with lam * panel_width.
"""

from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss

# |theta| below the cutoff uses the power series, above it the upward recursion
_SERIES_CUTOFF = 2.0
_SERIES_TERMS = 30

FILON_DEGREE = 4


class QuadResult(NamedTuple):
    """Values and absolute error estimates, one per lambda."""
    value: np.ndarray
    error: np.ndarray


class WeightPiece(NamedTuple):
    """Real weight c0 + c1*t on the interval (a, b]."""
    a: float
    b: float
    c0: float
    c1: float


def filon_moments(theta: np.ndarray, degree: int) -> np.ndarray:
    """Moments int_{-1}^{1} x^m exp(i*theta*x) dx for m = 0..degree.

    The result has shape ``theta.shape + (degree + 1,)``.
    """
    theta = np.asarray(theta, dtype=float)
    out = np.zeros(theta.shape + (degree + 1,), dtype=complex)
    small = np.abs(theta) < _SERIES_CUTOFF

    if np.any(small):
        ts = theta[small]
        acc = np.zeros(ts.shape + (degree + 1,), dtype=complex)
        term = np.ones(ts.shape, dtype=complex)
        for k in range(_SERIES_TERMS):
            if k:
                term = term * (1j * ts / k)
            # only m + k even survives the symmetric integral
            for m in range(k % 2, degree + 1, 2):
                acc[..., m] += term * (2.0 / (m + k + 1))
        out[small] = acc

    big = ~small
    if np.any(big):
        tb = theta[big]
        e_plus = np.exp(1j * tb)
        e_minus = np.conj(e_plus)
        acc = np.empty(tb.shape + (degree + 1,), dtype=complex)
        acc[..., 0] = 2.0 * np.sin(tb) / tb
        for m in range(1, degree + 1):
            boundary = e_plus - (-1) ** m * e_minus
            acc[..., m] = (boundary - m * acc[..., m - 1]) / (1j * tb)
        out[big] = acc

    return out


@lru_cache(maxsize=8)
def _interpolation_matrix(degree: int) -> np.ndarray:
    nodes = np.linspace(-1.0, 1.0, degree + 1)
    return np.linalg.inv(np.vander(nodes, degree + 1, increasing=True))


def filon_nodes(edges: np.ndarray, degree: int = FILON_DEGREE) -> np.ndarray:
    """Equispaced interpolation nodes of every panel, shape (P, degree + 1)."""
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    x = np.linspace(-1.0, 1.0, degree + 1)
    return mid[:, None] + half[:, None] * x[None, :]


def filon_sum(
    edges: np.ndarray,
    node_values: np.ndarray,
    lams: np.ndarray,
    degree: int = FILON_DEGREE
) -> np.ndarray:
    """Composite Filon rule for int f(t) exp(i*lam*t) dt over the panels."""
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    coeffs = node_values @ _interpolation_matrix(degree).T
    moments = filon_moments(lams[:, None] * half[None, :], degree)
    panel = np.einsum("lpm,pm->lp", moments, coeffs)
    phase = np.exp(1j * lams[:, None] * mid[None, :])
    return np.sum(half[None, :] * phase * panel, axis=1)


def graded_edges(lo: float, hi: float, ratio: float) -> np.ndarray:
    """Geometric panel edges on [lo, hi] with an even panel count."""
    if lo <= 0.0:
        raise ValueError("graded grids need a positive left end")
    n = max(2, int(np.ceil(np.log(hi / lo) / np.log(ratio))))
    n += n % 2
    edges = np.geomspace(lo, hi, n + 1)
    edges[0], edges[-1] = lo, hi
    return edges


def filon_with_estimate(
    func: Callable[[np.ndarray], np.ndarray],
    edges: np.ndarray,
    lams: np.ndarray,
    degree: int = FILON_DEGREE
) -> QuadResult:
    """Filon on ``edges`` with an error estimate from the halved grid."""
    fine = filon_sum(edges, func(filon_nodes(edges, degree)), lams, degree)
    coarse_edges = edges[::2]
    coarse = filon_sum(coarse_edges, func(filon_nodes(coarse_edges, degree)), lams, degree)
    # halving the panel width shrinks the interpolation error by 2^(degree+1)
    return QuadResult(fine, np.abs(fine - coarse) / (2 ** (degree + 1) - 1))


def polynomial_transform(poly: Polynomial, a: float, b: float, lams: np.ndarray) -> np.ndarray:
    """Exact int_a^b p(t) exp(i*lam*t) dt for a polynomial p."""
    lams = np.asarray(lams, dtype=float)
    if b <= a:
        return np.zeros(lams.shape, dtype=complex)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    local = poly(Polynomial([mid, half]))
    coef = np.asarray(local.coef, dtype=float)
    moments = filon_moments(lams * half, coef.size - 1)
    return half * np.exp(1j * lams * mid) * (moments @ coef)


def log_head(
    lams: np.ndarray,
    alpha: float,
    t1: float,
    c0: float,
    c1: float,
    width: float,
    panels: int,
    nodes: int
) -> QuadResult:
    """int_0^t1 (c0 + c1*t) B(t) exp(i*lam*t) dt for B(t) = 1/(t ln^alpha(1/t)).

    In u = ln(1/t) the integrand becomes (c0 + c1 e^-u) exp(i lam e^-u) u^-alpha.
    The pure power c0 u^-alpha is integrated exactly; the remainder is smooth
    and exponentially small beyond ``width`` and is done by composite
    Gauss-Legendre. Requires t1 <= 1/max|lam| so that the phase stays bounded.
    """
    u1 = -np.log(t1)
    exact = c0 * u1 ** (1.0 - alpha) / (alpha - 1.0)
    bounds = np.linspace(u1, u1 + width, panels + 1)

    def composite(n: int) -> np.ndarray:
        x, w = leggauss(n)
        lo, hi = bounds[:-1, None], bounds[1:, None]
        u = (0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)).ravel()
        weights = (0.5 * (hi - lo) * w[None, :]).ravel()
        decay = np.exp(-u)
        phase = lams[:, None] * decay[None, :]
        # exp(ix) - 1 without cancellation
        expm1 = -2.0 * np.sin(0.5 * phase) ** 2 + 1j * np.sin(phase)
        integrand = (c0 * expm1 + c1 * decay[None, :] * (1.0 + expm1)) * u[None, :] ** (-alpha)
        return integrand @ weights

    fine = composite(nodes)
    coarse = composite(max(2, nodes // 2))
    return QuadResult(exact + fine, np.abs(fine - coarse))
