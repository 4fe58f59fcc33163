"""Monte Carlo cross-check of Z_n statistics on bin-averaged noise."""

import time
from typing import Iterator, Tuple

import numpy as np
from scipy import linalg

from config.settings import settings
from noiselab.core.exceptions import EigenSolveError, ParameterError
from noiselab.models.schemas import BinCov, KernelSpec, ZnMonteCarlo
from noiselab.services.gspace import zn_stats
from noiselab.services.kernel import second_primitive
from noiselab.utils.logger import get_logger

logger = get_logger(__name__)

MAX_BINS_PER_CELL = 1000
CI_LEVEL = 0.95
# rows per Philox key; part of the stream definition, so never read from settings
SAMPLE_BLOCK_ROWS = 2048


def bin_cov(k: KernelSpec, n_bins: int) -> BinCov:
    """Covariance of the integrals of the noise over n_bins equal bins of (0, 1).

    Negative eigenvalues from rounding are clipped; their total mass is reported.
    """
    if not 2 <= n_bins <= settings.max_bins:
        raise ParameterError(f"n_bins must lie in [2, {settings.max_bins}], got {n_bins}")
    width = 1.0 / n_bins
    lags = np.arange(n_bins) * width
    column = (
        second_primitive(k, lags + width)
        - 2.0 * second_primitive(k, lags)
        + second_primitive(k, lags - width)
    )
    matrix = linalg.toeplitz(column)
    try:
        eigenvalues, vectors = linalg.eigh(matrix)
    except linalg.LinAlgError as e:
        logger.error("Bin covariance eigen solve failed", n_bins=n_bins, error=str(e), exc_info=True)
        raise EigenSolveError(f"Eigen decomposition of the {n_bins}-bin covariance failed: {e}") from e

    negative = eigenvalues < 0
    clip_mass = float(-np.sum(eigenvalues[negative]))
    factor = vectors * np.sqrt(np.where(negative, 0.0, eigenvalues))[None, :]
    trace = float(np.trace(matrix))
    if clip_mass > 1e-6 * trace:
        logger.warning("Large eigenvalue clipping", n_bins=n_bins, clip_ratio=clip_mass / trace)
    return BinCov(n_bins=n_bins, matrix=matrix, factor=factor, clip_mass=clip_mass, trace=trace)


def _normal_blocks(seed: int, n_samples: int, dim: int) -> Iterator[np.ndarray]:
    """Standard normals in SAMPLE_BLOCK_ROWS-row blocks, block b drawn from Philox keyed by (seed, b).

    The first m rows for a seed do not depend on n_samples.
    """
    block_size = SAMPLE_BLOCK_ROWS
    for block, start in enumerate(range(0, n_samples, block_size)):
        rows = min(block_size, n_samples - start)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))
        yield rng.standard_normal((rows, dim))


def sample(cov: BinCov, n_samples: int, seed: int) -> np.ndarray:
    """n_samples rows x = F w of bin integrals; bit-identical for equal seeds."""
    if n_samples < 1:
        raise ParameterError(f"n_samples must be positive, got {n_samples}")
    return np.vstack([w @ cov.factor.T for w in _normal_blocks(seed, n_samples, cov.n_bins)])


def _project(cov: BinCov, functionals: np.ndarray, n_samples: int, seed: int) -> np.ndarray:
    """Samples of the linear functionals only; shape (n_samples, len(functionals))."""
    projected = functionals @ cov.factor
    return np.vstack([w @ projected.T for w in _normal_blocks(seed, n_samples, cov.n_bins)])


def bins_per_cell(eps_n: float, n: int) -> int:
    """Smallest M <= 1000 with eps_n * M integral and n * M within max_bins."""
    for M in range(1, MAX_BINS_PER_CELL + 1):
        if abs(eps_n * M - round(eps_n * M)) <= 1e-9 and round(eps_n * M) >= 1:
            if n * M > settings.max_bins:
                break
            return M
    raise ParameterError(
        f"eps_n={eps_n!r} at n={n} cannot be resolved within {settings.max_bins} bins"
    )


def _stats(pairs: np.ndarray) -> Tuple[float, float]:
    z, zn = pairs[:, 0], pairs[:, 1]
    var_zn = float(np.var(zn, ddof=1))
    corr = float(np.corrcoef(z, zn)[0, 1])
    return var_zn, corr


def mc_zn(k: KernelSpec, n: int, eps_n: float, n_samples: int, seed: int) -> ZnMonteCarlo:
    """Sample (Z, Z_n) and compare with the exact bin-covariance values."""
    if not 0.0 < eps_n <= 1.0:
        raise ParameterError(f"eps_n must lie in (0, 1], got {eps_n}")
    if n_samples < 2:
        raise ParameterError(f"n_samples must be at least 2, got {n_samples}")
    start = time.time()
    M = bins_per_cell(eps_n, n)
    covered = int(round(eps_n * M))
    cov = bin_cov(k, n * M)

    in_set = (np.arange(n * M) % M) < covered
    functionals = np.vstack([np.ones(n * M), in_set / eps_n])
    pairs = _project(cov, functionals, n_samples, seed)
    var_hat, corr_hat = _stats(pairs)

    boot_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(1,))))
    boot_var = np.empty(settings.bootstrap_resamples)
    boot_corr = np.empty(settings.bootstrap_resamples)
    for b in range(settings.bootstrap_resamples):
        idx = boot_rng.integers(0, n_samples, size=n_samples)
        boot_var[b], boot_corr[b] = _stats(pairs[idx])
    tail = 50.0 * (1.0 - CI_LEVEL)
    var_ci = (float(np.percentile(boot_var, tail)), float(np.percentile(boot_var, 100.0 - tail)))
    corr_ci = (float(np.percentile(boot_corr, tail)), float(np.percentile(boot_corr, 100.0 - tail)))

    exact = functionals @ cov.matrix @ functionals.T
    corr_quadrature = float(exact[0, 1] / np.sqrt(exact[0, 0] * exact[1, 1]))
    lagsum = zn_stats(k, n, eps_n)

    logger.info(
        "Monte Carlo Z_n finished",
        n=n,
        eps_n=eps_n,
        bins=n * M,
        samples=n_samples,
        corr_hat=corr_hat,
        corr_quadrature=corr_quadrature,
        corr_lagsum=lagsum.corr,
        elapsed_s=round(time.time() - start, 3),
    )
    return ZnMonteCarlo(
        n=n,
        eps_n=eps_n,
        n_samples=n_samples,
        seed=seed,
        bins_per_cell=M,
        var_hat=var_hat,
        var_ci=var_ci,
        corr_hat=corr_hat,
        corr_ci=corr_ci,
        var_quadrature=float(exact[1, 1]),
        corr_quadrature=corr_quadrature,
        var_lagsum=lagsum.var_Zn,
        corr_lagsum=lagsum.corr,
        clip_ratio=cov.clip_ratio,
    )
