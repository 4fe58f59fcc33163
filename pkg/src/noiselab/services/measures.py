"""Closed-form identities for discrete and Gaussian product measures."""

from typing import List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from config.settings import settings
from noiselab.core.exceptions import ParameterError
from noiselab.models.schemas import (
    DiscreteMeasurePair,
    GaussianAffinity,
    KakutaniReport,
    KakutaniVerdict,
    SandwichCheck,
    SpectralRatios,
)
from noiselab.utils.logger import get_logger

logger = get_logger(__name__)

SANDWICH_SLACK = 1e-12
MIN_LEVEL = 4


def make_measure_pair(p: Sequence[float], q: Sequence[float]) -> DiscreteMeasurePair:
    """Validate two probability vectors on a common support."""
    try:
        return DiscreteMeasurePair(p=np.asarray(p, dtype=float), q=np.asarray(q, dtype=float))
    except ValidationError as e:
        raise ParameterError(f"Invalid measure pair: {e}") from e


def hellinger_affinity(pair: DiscreteMeasurePair) -> float:
    return float(np.sum(np.sqrt(pair.p * pair.q)))


def variation_distance(pair: DiscreteMeasurePair) -> float:
    return float(np.sum(np.abs(pair.p - pair.q)))


def sandwich_check(pair: DiscreteMeasurePair) -> SandwichCheck:
    """(d/2)^2 <= 1 - A <= d/2 for affinity A and total variation d."""
    A = hellinger_affinity(pair)
    d = variation_distance(pair)
    lower = (1.0 - A) - (0.5 * d) ** 2
    upper = 0.5 * d - (1.0 - A)
    return SandwichCheck(
        affinity=A,
        distance=d,
        lower_margin=lower,
        upper_margin=upper,
        holds=lower >= -SANDWICH_SLACK and upper >= -SANDWICH_SLACK,
    )


def make_ratios(lambdas: Sequence[float], means: Optional[Sequence[float]] = None) -> SpectralRatios:
    try:
        return SpectralRatios(
            lambdas=np.asarray(lambdas, dtype=float),
            means=None if means is None else np.asarray(means, dtype=float),
        )
    except ValidationError as e:
        raise ParameterError(f"Invalid spectral ratios: {e}") from e


def gaussian_affinity(r: SpectralRatios) -> GaussianAffinity:
    """prod ((lam^-1/2 + lam^1/2)/2)^-1/2, accumulated in log space."""
    lam = r.lambdas
    log_value = float(-0.5 * np.sum(np.log(0.5 * (lam ** -0.5 + lam ** 0.5))))
    if log_value < settings.log_underflow_floor:
        logger.debug("Gaussian affinity underflows", log_value=log_value)
        return GaussianAffinity(value=0.0, log_value=log_value, underflow=True)
    return GaussianAffinity(value=float(np.exp(log_value)), log_value=log_value, underflow=False)


def _levels(K: int) -> List[int]:
    levels = []
    while K >= MIN_LEVEL:
        levels.append(K)
        K //= 2
    return levels[::-1]


def kakutani_check(
    sigmas: Sequence[float],
    means: Optional[Sequence[float]] = None,
    K: Optional[int] = None
) -> KakutaniReport:
    """Doubling signature of sum (sigma_k - 1)^2 + sum m_k^2 up to K.

    The ratio of the last to the previous doubling increment decides: small
    ratios mean a convergent sum, ratios near one a divergent one.
    """
    sig = np.asarray(sigmas, dtype=float)
    mu = np.zeros_like(sig) if means is None else np.asarray(means, dtype=float)
    if mu.shape != sig.shape:
        raise ParameterError("means must match sigmas")
    if np.any(sig <= 0):
        raise ParameterError("sigmas must be positive")
    K = sig.size if K is None else int(K)
    if not 1 <= K <= sig.size:
        raise ParameterError(f"K must lie in [1, {sig.size}], got {K}")

    terms = (sig - 1.0) ** 2 + mu ** 2
    cumulative = np.cumsum(terms)
    levels = _levels(K)
    partial = [float(cumulative[L - 1]) for L in levels]
    increments = [b - a for a, b in zip(partial[:-1], partial[1:])]

    if partial and partial[-1] == 0.0:
        verdict = KakutaniVerdict.EQUIVALENT
    elif len(levels) < 3:
        verdict = KakutaniVerdict.INCONCLUSIVE
    elif increments[-2] == 0.0:
        verdict = KakutaniVerdict.EQUIVALENT if increments[-1] == 0.0 else KakutaniVerdict.SINGULAR
    else:
        ratio = increments[-1] / increments[-2]
        if ratio <= settings.kakutani_convergent_ratio:
            verdict = KakutaniVerdict.EQUIVALENT
        elif ratio >= settings.kakutani_divergent_ratio:
            verdict = KakutaniVerdict.SINGULAR
        else:
            verdict = KakutaniVerdict.INCONCLUSIVE

    return KakutaniReport(
        truncations=levels,
        sum_sq_sigma=float(np.sum((sig[:K] - 1.0) ** 2)),
        sum_sq_mean=float(np.sum(mu[:K] ** 2)),
        partial_sums=partial,
        increments=increments,
        verdict=verdict,
    )


def shift_affinity(x: float) -> float:
    """Affinity of a standard Gaussian and its shift by a vector of norm x."""
    if x < 0:
        raise ParameterError(f"norm must be non-negative, got {x}")
    return float(np.exp(-x * x / 8.0))


def coherent_overlap(y: float) -> float:
    if y < 0:
        raise ParameterError(f"norm must be non-negative, got {y}")
    return float(np.exp(-y * y / 2.0))


def random_pair(rng: np.random.Generator, size: int) -> DiscreteMeasurePair:
    """Two independent Dirichlet(1, ..., 1) vectors."""
    if size < 1:
        raise ParameterError(f"size must be positive, got {size}")
    p = rng.dirichlet(np.ones(size))
    q = rng.dirichlet(np.ones(size))
    return make_measure_pair(p / p.sum(), q / q.sum())
