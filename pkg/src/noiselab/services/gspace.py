"""The space G_{0,1}: step functions, elementary sets, Z_n statistics and separation."""

import time
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from config.settings import settings
from noiselab.core.exceptions import ParameterError
from noiselab.models.schemas import (
    ComplementDistance,
    ElementarySet,
    KernelSpec,
    ScheduleKind,
    SeparationReport,
    SeparationRow,
    SetStyle,
    SpectralNorm,
    StepFunction,
    ThresholdScan,
    TrendClass,
    ZnStats,
)
from noiselab.services.kernel import (
    interval_overlap,
    kernel_moments,
    second_primitive,
    spectrum_table,
)
from noiselab.utils.logger import get_logger

logger = get_logger(__name__)

TAIL_LOG_SPAN = 50.0
SCHEDULE_START = 64
SEPARATION_WINDOW = 5


def fourier_step(f: StepFunction, lams: np.ndarray) -> np.ndarray:
    """Exact f_hat(lam) = sum_j c_j int_{a_j}^{b_j} exp(i lam t) dt, vectorised over lam."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    mid = 0.5 * (f.starts + f.ends)
    length = f.ends - f.starts
    # np.sinc(x) = sin(pi x)/(pi x)
    phase = np.exp(1j * lams[:, None] * mid[None, :])
    shape = length[None, :] * np.sinc(lams[:, None] * length[None, :] / (2.0 * np.pi))
    return (phase * shape) @ f.values


def _common_jump_product(f: StepFunction, g: StepFunction) -> complex:
    xf, jf = f.jumps()
    xg, jg = g.jumps()
    match = np.isclose(xf[:, None], xg[None, :], rtol=0.0, atol=1e-14)
    return complex(np.sum(match * (jf[:, None] * np.conj(jg)[None, :])))


def g_inner_freq(k: KernelSpec, f: StepFunction, g: StepFunction) -> SpectralNorm:
    """(1/2pi) int B_hat f_hat conj(g_hat) d lam with an analytic tail beyond lambda_max."""
    table = spectrum_table(k)
    lam_max = settings.freq_lambda_max
    count = int(round(2.0 * lam_max / settings.freq_step)) + 1
    lams = np.linspace(-lam_max, lam_max, count)
    integrand = table.evaluate(lams) * fourier_step(f, lams) * np.conj(fourier_step(g, lams))
    head = complex(integrate.simpson(integrand, x=lams)) / (2.0 * np.pi)

    # beyond lambda_max |lam f_hat|^2 averages to the sum of squared jumps
    tail_integral, _ = integrate.quad(
        lambda s: float(table.evaluate(np.array([lam_max * np.exp(s)]))[0]) / (lam_max * np.exp(s)),
        0.0, TAIL_LOG_SPAN, limit=200,
    )
    tail = _common_jump_product(f, g) * tail_integral / np.pi
    _, jf = f.jumps()
    _, jg = g.jumps()
    bound = float(np.sum(np.abs(jf)) * np.sum(np.abs(jg)) * table.sup_beyond(lam_max) / (np.pi * lam_max))

    warning = bound > settings.tail_warn_fraction * abs(head)
    if warning:
        logger.warning("Frequency tail bound is large", head=abs(head), tail_bound=bound, lambda_max=lam_max)
    return SpectralNorm(
        value=head + tail,
        tail_estimate=float(abs(tail)),
        tail_bound=bound,
        lambda_max=lam_max,
        precision_warning=bool(warning),
    )


def g_norm2_freq(k: KernelSpec, f: StepFunction) -> SpectralNorm:
    return g_inner_freq(k, f, f)


def g_inner_time(k: KernelSpec, f: StepFunction, g: StepFunction) -> complex:
    """Exact <f, g> from the double integral of B over every pair of pieces."""
    overlap = interval_overlap(
        k,
        f.starts[:, None], f.ends[:, None],
        g.starts[None, :], g.ends[None, :],
    )
    return complex(np.sum(f.values[:, None] * np.conj(g.values)[None, :] * overlap))


def make_En(n: int, mes: float, style: SetStyle = SetStyle.CENTERED) -> ElementarySet:
    """n equal intervals of total length mes, one per cell ((k-1)/n, k/n).

    Raises:
        ParameterError: if n < 1, mes <= 0, mes > 1, or mes == 1 for centered sets
    """
    style = SetStyle(style)
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}")
    if not 0.0 < mes <= 1.0:
        raise ParameterError(f"mes must lie in (0, 1], got {mes}")
    if style is SetStyle.CENTERED and mes >= 1.0:
        raise ParameterError("centered elementary sets need mes < 1")

    cells = np.arange(n, dtype=float)
    if style is SetStyle.CENTERED:
        centers = (cells + 0.5) / n
        starts, ends = centers - mes / (2.0 * n), centers + mes / (2.0 * n)
    else:
        starts, ends = cells / n, (cells + mes) / n
    # keep the pieces inside [0, 1] despite rounding
    starts = np.clip(starts, 0.0, 1.0)
    ends = np.clip(ends, 0.0, 1.0)
    return ElementarySet(n=n, mes=mes, style=style, starts=starts, ends=ends)


def set_norm2(k: KernelSpec, E: ElementarySet) -> float:
    """||1_E||^2 as a Toeplitz sum over cell lags inside the kernel support."""
    n, length = E.n, E.length
    spacing = 1.0 / n
    max_lag = min(n - 1, int(np.ceil((k.t_zero + length) / spacing)))
    lags = np.arange(max_lag + 1) * spacing
    second_diff = (
        second_primitive(k, lags + length)
        - 2.0 * second_primitive(k, lags)
        + second_primitive(k, lags - length)
    )
    weights = 2.0 * (n - np.arange(max_lag + 1)).astype(float)
    weights[0] = n
    return float(np.dot(weights, second_diff))


def set_inner_unit(k: KernelSpec, E: ElementarySet) -> float:
    """<1_E, 1_(0,1)>."""
    return float(np.sum(interval_overlap(k, E.starts, E.ends, 0.0, 1.0)))


def unit_norm2(k: KernelSpec) -> float:
    """Var Z = ||1_(0,1)||^2 = 2 S00(1)."""
    return float(2.0 * second_primitive(k, np.array([1.0]))[0])


def zn_stats(k: KernelSpec, n: int, eps_n: float) -> ZnStats:
    """Variance of Z_n = <xi, 1_E/eps_n> and its correlation with Z = <xi, 1_(0,1)>."""
    if not 0.0 < eps_n <= 1.0:
        raise ParameterError(f"eps_n must lie in (0, 1], got {eps_n}")
    E = make_En(n, eps_n, SetStyle.LEFT)
    var_Z = unit_norm2(k)
    var_Zn = max(set_norm2(k, E), 0.0) / eps_n ** 2
    cov = set_inner_unit(k, E) / eps_n
    corr = cov / np.sqrt(var_Z * var_Zn)
    # rounding at eps_n = 1
    corr = float(min(corr, 1.0))
    return ZnStats(
        n=n,
        eps_n=eps_n,
        theta=float(eps_n * np.log(n) ** (k.alpha - 1.0)),
        var_Z=var_Z,
        var_Zn=var_Zn,
        cov=float(cov),
        corr=corr,
    )


def make_schedule(
    kind: ScheduleKind,
    alpha: float,
    n_max: int,
    n_min: int = SCHEDULE_START,
    constant: Optional[float] = None
) -> List[Tuple[int, float]]:
    """Dyadic n from n_min to n_max with eps_n = c/ln^p n, clipped to 1.

    p is alpha for the subcritical, alpha-1 for the critical and alpha-2 for the
    supercritical schedule.
    """
    kind = ScheduleKind(kind)
    if kind in (ScheduleKind.CUSTOM, ScheduleKind.STANDARD):
        raise ParameterError(f"{kind.value} schedules are explicit (n, eps_n) lists")
    if n_min < 2 or n_max < n_min:
        raise ParameterError(f"need 2 <= n_min <= n_max, got n_min={n_min}, n_max={n_max}")
    c = _schedule_constant(constant)
    power = {
        ScheduleKind.SUBCRITICAL: alpha,
        ScheduleKind.CRITICAL: alpha - 1.0,
        ScheduleKind.SUPERCRITICAL: alpha - 2.0,
    }[kind]
    schedule = []
    n = n_min
    while n <= n_max:
        schedule.append((n, float(min(c / np.log(n) ** power, 1.0))))
        n *= 2
    return schedule


def _schedule_constant(constant: Optional[float]) -> float:
    c = 1.0 if constant is None else float(constant)
    if not c > 0:
        raise ParameterError(f"schedule constant must be positive, got {c}")
    return c


def _relative_change(series: Sequence[float]) -> float:
    return abs(series[-1] / series[-2] - 1.0) if series[-2] != 0 else float("inf")


def classify_trend(rows: Sequence[ZnStats]) -> TrendClass:
    """Collapsing, diverging and stabilizing are tested in that order."""
    if len(rows) < 3:
        return TrendClass.INCONCLUSIVE
    var = np.array([r.var_Zn for r in rows])
    corr = np.array([r.corr for r in rows])

    if abs(1.0 - corr[-1]) <= settings.collapse_tolerance and np.all(np.diff(corr) >= -1e-12):
        return TrendClass.COLLAPSING
    if (
        np.all(np.diff(var) > 0)
        and np.all(np.diff(corr) < 0)
        and var[-1] / var[-2] - 1.0 > settings.diverging_threshold
    ):
        return TrendClass.DIVERGING
    if (
        _relative_change(var) < settings.stabilizing_threshold
        and _relative_change(corr) < settings.stabilizing_threshold
    ):
        return TrendClass.STABILIZING
    return TrendClass.INCONCLUSIVE


def threshold_scan(k: KernelSpec, schedule: Sequence[Tuple[int, float]]) -> ThresholdScan:
    """Z_n statistics along a schedule with strictly increasing n."""
    ns = [int(n) for n, _ in schedule]
    if not ns:
        raise ParameterError("schedule must not be empty")
    if any(b <= a for a, b in zip(ns[:-1], ns[1:])):
        raise ParameterError("schedule n must be strictly increasing")

    start = time.time()
    rows = [zn_stats(k, int(n), float(eps)) for n, eps in schedule]
    classification = classify_trend(rows)
    logger.info(
        "Threshold scan finished",
        alpha=k.alpha,
        points=len(rows),
        classification=classification.value,
        elapsed_s=round(time.time() - start, 3),
    )
    return ThresholdScan(alpha=k.alpha, rows=rows, classification=classification)


def _separation_row(k: KernelSpec, E: ElementarySet, system: str, var_Z: float) -> SeparationRow:
    mes = E.mes
    norm_gn = float(np.sqrt(max(set_norm2(k, E), 0.0))) / mes
    inner = set_inner_unit(k, E) / mes
    dist2 = norm_gn ** 2 - 2.0 * inner + var_Z
    return SeparationRow(
        n=E.n,
        mes=mes,
        system=system,
        alpha=k.alpha,
        norm_gn=norm_gn,
        inner_gn_g=inner,
        dist_gn_g=float(np.sqrt(max(dist2, 0.0))),
        overlap=float(inner / (norm_gn * np.sqrt(var_Z))),
    )


def separation_mes(alpha_b: float, n: int) -> float:
    return float(2.0 / np.log(n) ** (alpha_b - 1.0))


def separation_report(
    k_a: KernelSpec,
    k_b: KernelSpec,
    n_list: Sequence[int],
    mes: Optional[float] = None
) -> SeparationReport:
    """Overlaps of g_n = 1_{E_n}/mes with g = 1_(0,1) in two kernel systems.

    E_n is centered with mes = 2/ln^(alpha_B-1) n unless a constant mes is given.
    """
    if not k_a.alpha < k_b.alpha:
        raise ParameterError(f"need alpha_A < alpha_B, got {k_a.alpha} and {k_b.alpha}")
    ns = [int(n) for n in n_list]
    if not ns or any(b <= a for a, b in zip(ns[:-1], ns[1:])):
        raise ParameterError("n_list must be non-empty and strictly increasing")

    start = time.time()
    var_a, var_b = unit_norm2(k_a), unit_norm2(k_b)
    rows: List[SeparationRow] = []
    for n in ns:
        mes_n = separation_mes(k_b.alpha, n) if mes is None else mes
        E = make_En(n, mes_n, SetStyle.CENTERED)
        rows.append(_separation_row(k_a, E, "A", var_a))
        rows.append(_separation_row(k_b, E, "B", var_b))

    a_overlaps = [r.overlap for r in rows if r.system == "A"]
    b_overlaps = [r.overlap for r in rows if r.system == "B"]
    window = a_overlaps[-SEPARATION_WINDOW:]
    a_decreasing = len(window) >= 2 and all(y < x for x, y in zip(window[:-1], window[1:]))
    b_floor = float(min(b_overlaps))
    separated = a_decreasing and b_floor >= settings.separation_floor

    logger.info(
        "Separation report finished",
        alpha_a=k_a.alpha,
        alpha_b=k_b.alpha,
        separated=separated,
        b_floor=b_floor,
        elapsed_s=round(time.time() - start, 3),
    )
    return SeparationReport(
        alpha_a=k_a.alpha,
        alpha_b=k_b.alpha,
        rows=rows,
        separated=separated,
        b_floor=b_floor,
        a_final_over_initial=float(a_overlaps[-1] / a_overlaps[0]),
    )


def complement_distance(k: KernelSpec, E: ElementarySet) -> ComplementDistance:
    """||g - g 1_{(0,1) minus E}|| = ||1_E|| for g = 1_(0,1), with the bound sqrt(mes B_hat(0))."""
    K_total, _ = kernel_moments(k, np.array([k.t_zero]))
    bhat0 = 2.0 * float(K_total[0])
    return ComplementDistance(
        mes=E.mes,
        value=float(np.sqrt(max(set_norm2(k, E), 0.0))),
        bound=float(np.sqrt(E.mes * bhat0)),
    )
