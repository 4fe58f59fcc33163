"""Gram matrices of the trigonometric bases X_k on (0, T) and Y_k on (-T, 0)."""

import time
from typing import Callable, Dict, List, NamedTuple, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, linalg

from noiselab.core.exceptions import (
    EigenSolveError,
    NoiseLabException,
    ParameterError,
    QuadratureError,
)
from noiselab.core.quadrature import WeightPiece
from noiselab.models.schemas import DiagAsymptote, GramMatrix, HSDefect, KernelSpec
from noiselab.services.kernel import kernel_moments, kernel_values, weighted_transform
from noiselab.utils.logger import get_logger

logger = get_logger(__name__)

ORACLE_NODES = 48
ORACLE_WIDTH = 40.0

BasisFunction = Tuple[str, int]


class BasisTransforms(NamedTuple):
    """One-dimensional reductions at frequencies 2*pi*j/T.

    diag = ||X_j||^2, sine = int_0^T B sin, signed = int_0^2T sgn(T-t) B e^{i..},
    tent = int_0^2T min(t, 2T-t) B e^{i..}.
    """
    diag: np.ndarray
    sine: np.ndarray
    signed: np.ndarray
    tent: np.ndarray


def _frequencies(T: float, js: np.ndarray) -> np.ndarray:
    return 2.0 * np.pi * np.asarray(js, dtype=float) / T


def basis_transforms(k: KernelSpec, T: float, js: Sequence[int]) -> BasisTransforms:
    """Evaluate the four reductions for arbitrary integer indices."""
    if not T > 0:
        raise ParameterError(f"T must be positive, got {T}")
    lams = _frequencies(T, np.asarray(js))
    try:
        diag = 2.0 * weighted_transform(k, lams, [WeightPiece(0.0, T, T, -1.0)]).value.real
        sine = weighted_transform(k, lams, [WeightPiece(0.0, T, 1.0, 0.0)]).value.imag
        signed = weighted_transform(
            k, lams, [WeightPiece(0.0, T, 1.0, 0.0), WeightPiece(T, 2.0 * T, -1.0, 0.0)]
        ).value
        tent = weighted_transform(
            k, lams, [WeightPiece(0.0, T, 0.0, 1.0), WeightPiece(T, 2.0 * T, 2.0 * T, -1.0)]
        ).value
    except NoiseLabException:
        raise
    except Exception as e:
        logger.error("Basis transforms failed", T=T, error=str(e), exc_info=True)
        raise QuadratureError(f"Failed to evaluate basis transforms: {e}") from e
    return BasisTransforms(diag, sine, signed, tent)


def _mirrored(k: KernelSpec, T: float, N: int) -> BasisTransforms:
    """Transforms for j = -N..N computed on j >= 0 and extended by symmetry."""
    half = basis_transforms(k, T, np.arange(N + 1))
    return BasisTransforms(
        diag=np.concatenate([half.diag[:0:-1], half.diag]),
        sine=np.concatenate([-half.sine[:0:-1], half.sine]),
        signed=np.concatenate([np.conj(half.signed[:0:-1]), half.signed]),
        tent=np.concatenate([np.conj(half.tent[:0:-1]), half.tent]),
    )


def _xx_block(T: float, idx: np.ndarray, tr: BasisTransforms) -> np.ndarray:
    diff = idx[:, None] - idx[None, :]
    off = diff != 0
    safe = np.where(off, diff, 1)
    block = -T / (np.pi * safe) * (tr.sine[:, None] - tr.sine[None, :])
    block = np.where(off, block, np.diag(tr.diag))
    return block.astype(complex)


def _xy_block(T: float, idx: np.ndarray, tr: BasisTransforms) -> np.ndarray:
    diff = idx[:, None] - idx[None, :]
    off = diff != 0
    safe = np.where(off, diff, 1)
    block = -1j * T / (2.0 * np.pi * safe) * (tr.signed[:, None] - tr.signed[None, :])
    return np.where(off, block, np.diag(tr.tent))


def inner_XX(k: KernelSpec, T: float, m: int, n: int) -> complex:
    """<X_m, X_n>; real, the diagonal being 2 int_0^T (T-t) B cos."""
    tr = basis_transforms(k, T, [m, n])
    if m == n:
        return complex(tr.diag[0])
    return complex(-T / (np.pi * (m - n)) * (tr.sine[0] - tr.sine[1]))


def inner_XY(k: KernelSpec, T: float, m: int, n: int) -> complex:
    """<X_m, Y_n> with the second slot conjugated."""
    tr = basis_transforms(k, T, [m, n])
    if m == n:
        return complex(tr.tent[0])
    return complex(-1j * T / (2.0 * np.pi * (m - n)) * (tr.signed[0] - tr.signed[1]))


def _support(T: float, family: str) -> Tuple[float, float]:
    if family == "X":
        return 0.0, T
    if family == "Y":
        return -T, 0.0
    raise ParameterError(f"basis family must be 'X' or 'Y', got {family!r}")


def inner_oracle(k: KernelSpec, T: float, f: BasisFunction, g: BasisFunction) -> complex:
    """Brute-force double integral of f(s) conj(g(t)) B(s - t); small indices only.

    The inner cross-correlation C(u) = int f(s) conj(g(s - u)) ds uses Gauss-Legendre,
    the outer lag integral of B(u)(C(u) + C(-u)) uses adaptive quadrature, in
    v = ln(1/u) on (0, eps_cut].
    """
    fa, fb = _support(T, f[0])
    ga, gb = _support(T, g[0])
    lam_f, lam_g = _frequencies(T, np.array([f[1], g[1]]))
    x, w = leggauss(ORACLE_NODES)

    def correlation(u: float) -> complex:
        lo, hi = max(fa, ga + u), min(fb, gb + u)
        if hi <= lo:
            return 0.0j
        s = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        values = np.exp(1j * lam_f * s) * np.exp(-1j * lam_g * (s - u))
        return complex(0.5 * (hi - lo) * np.dot(w, values))

    def h(u: float) -> complex:
        return correlation(u) + correlation(-u)

    def real_imag(func: Callable[[float], complex], a: float, b: float, points: List[float]) -> complex:
        inside = [p for p in points if a < p < b] or None
        opts: Dict[str, object] = {"limit": 400, "epsabs": 1e-13, "epsrel": 1e-10}
        re, _ = integrate.quad(lambda v: func(v).real, a, b, points=inside, **opts)
        im, _ = integrate.quad(lambda v: func(v).imag, a, b, points=inside, **opts)
        return complex(re, im)

    eps = k.eps_cut
    h0 = h(0.0)
    K_eps, _ = kernel_moments(k, np.array([eps]))
    v0 = -np.log(eps)
    kinks_u = [T, 2.0 * T]
    near = real_imag(
        lambda v: v ** (-k.alpha) * (h(np.exp(-v)) - h0),
        v0, v0 + ORACLE_WIDTH,
        [-np.log(p) for p in kinks_u if p < eps],
    )
    far = real_imag(
        lambda u: float(kernel_values(k, np.array([u]))[0]) * h(u),
        eps, k.t_zero,
        kinks_u,
    )
    return complex(h0 * float(K_eps[0]) + near + far)


def build_gram(k: KernelSpec, T: float, N: int) -> GramMatrix:
    """Normalized Gram matrix over X_{-N..N} followed by Y_{-N..N}."""
    if N < 1:
        raise ParameterError(f"N must be at least 1, got {N}")
    start = time.time()
    idx = np.arange(-N, N + 1)
    tr = _mirrored(k, T, N)
    if np.any(tr.diag <= 0):
        raise QuadratureError(
            "Non-positive basis norm encountered",
            details={"min_norm2": float(np.min(tr.diag))},
        )

    scale = 1.0 / np.sqrt(np.outer(tr.diag, tr.diag))
    xx = _xx_block(T, idx, tr) * scale
    xy = _xy_block(T, idx, tr) * scale
    np.fill_diagonal(xx, 1.0)
    # <Y_k, Y_l> = <X_k, X_l>
    matrix = np.block([[xx, xy], [xy.conj().T, xx]])

    logger.info(
        "Gram matrix assembled",
        alpha=k.alpha,
        N=N,
        size=matrix.shape[0],
        elapsed_s=round(time.time() - start, 3),
    )
    return GramMatrix(N=N, alpha=k.alpha, T=T, matrix=matrix, norms2=tr.diag)


def truncate_gram(g: GramMatrix, n: int) -> GramMatrix:
    """The Gram matrix of X_{-n..n}, Y_{-n..n} cut out of a larger one."""
    if not 1 <= n <= g.N:
        raise ParameterError(f"truncation must lie in [1, {g.N}], got {n}")
    return GramMatrix(
        N=n,
        alpha=g.alpha,
        T=g.T,
        matrix=g.truncated(n),
        norms2=g.norms2[g.N - n:g.N + n + 1],
    )


def hs_defect(g: GramMatrix) -> HSDefect:
    """||G - I||_F^2 with partial sums at N, N/2, N/4, ... and doubling increments."""
    truncations: List[int] = []
    n = g.N
    while n >= 1:
        truncations.append(n)
        n //= 2
    truncations.reverse()

    partial = []
    for n in truncations:
        sub = g.truncated(n)
        partial.append(float(np.sum(np.abs(sub - np.eye(sub.shape[0])) ** 2)))
    increments = [b - a for a, b in zip(partial[:-1], partial[1:])]
    return HSDefect(
        total=partial[-1],
        truncations=truncations,
        partial_sums=partial,
        increments=increments,
    )


def min_eigenvalue(g: GramMatrix) -> float:
    """Smallest eigenvalue of the Hermitian normalized Gram matrix."""
    try:
        eigenvalues = linalg.eigvalsh(g.matrix)
    except (linalg.LinAlgError, ValueError) as e:
        logger.error("Eigen solve failed", N=g.N, error=str(e), exc_info=True)
        raise EigenSolveError(f"Hermitian eigen solve failed for N={g.N}: {e}") from e
    return float(eigenvalues[0])


def diag_asymptotic(k: KernelSpec, T: float, k_list: Sequence[int]) -> DiagAsymptote:
    """Ratios ||X_k||^2 ln^(alpha-1)|k| (alpha-1)/(2T), which tend to 1."""
    ks = [int(j) for j in k_list]
    if not ks or any(abs(j) < 2 for j in ks):
        raise ParameterError("diag_asymptotic needs indices with |k| >= 2")
    tr = basis_transforms(k, T, ks)
    log_k = np.log(np.abs(np.asarray(ks, dtype=float)))
    ratios = tr.diag * log_k ** (k.alpha - 1.0) * (k.alpha - 1.0) / (2.0 * T)
    if len(ks) >= 2 and np.ptp(log_k) > 0:
        slope = float(np.polyfit(1.0 / log_k, ratios, 1)[0])
    else:
        slope = float("nan")
    return DiagAsymptote(alpha=k.alpha, T=T, k_list=ks, ratios=[float(r) for r in ratios], slope=slope)


def xy_diagonal_trend(k: KernelSpec, T: float, ns: Sequence[int]) -> np.ndarray:
    """|<X_n, Y_n>| * |n| on the given indices; bounded when the cross terms decay like 1/|n|."""
    tr = basis_transforms(k, T, list(ns))
    return np.abs(tr.tent) * np.abs(np.asarray(ns, dtype=float))
