"""Command-line front door: runs experiments and writes CSV/JSON reports."""

import argparse
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, NoReturn, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from config.settings import settings
from noiselab import __version__
from noiselab.core.exceptions import NoiseLabException, ParameterError, UsageError
from noiselab.models.schemas import (
    CheckResult,
    CommandReport,
    CorrectionKind,
    ExperimentConfig,
    KakutaniVerdict,
    ScheduleKind,
    TailContinuation,
    ThresholdScan,
    TrendClass,
)
from noiselab.services import fock, gram, gspace, kernel, measures, sim, spectral
from noiselab.utils.logger import get_logger, run_context
from noiselab.utils.reports import write_csv, write_json

logger = get_logger(__name__)

Table = Tuple[Sequence[str], List[Sequence[Any]]]

LIST_KEYS = {"lambda_decades", "k_list", "p", "q", "ratios", "scan_points"}
ACCEPTANCE_LAMBDAS = [1e3, 1e4, 1e5, 1e6]
FD_LAMBDAS = [1e3, 1e4]
XY_TREND_INDICES = [8, 16, 32, 64]
EIGEN_FLOOR = 0.02
KAKUTANI_K = 1024
MEASURE_SUPPORT_MAX = 20
# relative distance target for fixed-measure sets
RELATIVE_DISTANCE_TARGET = 0.05


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting on bad usage."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------- config


def _parse_value(key: str, raw: str) -> Any:
    raw = raw.strip()
    if key == "scan_points":
        points = []
        for item in raw.split(","):
            n, _, eps = item.partition(":")
            points.append((n.strip(), eps.strip()))
        return points
    if key in LIST_KEYS:
        return [v.strip() for v in raw.split(",") if v.strip()]
    return raw


def load_config_file(path: str) -> Dict[str, Any]:
    """Flat ``key = value`` lines; ``#`` starts a comment, lists are comma separated."""
    file_path = Path(path)
    try:
        text = file_path.read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"Cannot read config file {path}: {e}") from e

    values: Dict[str, Any] = {}
    known = set(ExperimentConfig.model_fields)
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{number}: expected 'key = value'")
        key = key.strip().replace("-", "_")
        if key not in known:
            raise UsageError(f"Unknown config key: {key}", details={"key": key, "line": number})
        values[key] = _parse_value(key, raw)
    return values


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults < config file < explicit flags."""
    values: Dict[str, Any] = {}
    if args.config:
        values.update(load_config_file(args.config))
    for key in ExperimentConfig.model_fields:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        raise UsageError(f"Invalid configuration: {e}") from e


def read_eps_file(path: str) -> List[Tuple[int, float]]:
    """Custom schedule: one ``n, eps_n`` pair per line."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise UsageError(f"Cannot read eps file {path}: {e}") from e
    schedule = []
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise UsageError(f"Malformed eps file line: {line!r}")
        try:
            schedule.append((int(parts[0]), float(parts[1])))
        except ValueError as e:
            raise UsageError(f"Malformed eps file line: {line!r}") from e
    return schedule


def read_weights_file(path: str) -> Tuple[List[float], List[float]]:
    """Two columns p, q per line."""
    try:
        rows = [line.split("#", 1)[0] for line in Path(path).read_text(encoding="utf-8").splitlines()]
    except OSError as e:
        raise UsageError(f"Cannot read weights file {path}: {e}") from e
    p, q = [], []
    for row in rows:
        if not row.strip():
            continue
        parts = row.replace(",", " ").split()
        if len(parts) != 2:
            raise UsageError(f"Malformed weights file line: {row!r}")
        try:
            p.append(float(parts[0]))
            q.append(float(parts[1]))
        except ValueError as e:
            raise UsageError(f"Malformed weights file line: {row!r}") from e
    return p, q


# --------------------------------------------------------------------------- output


def _check(name: str, passed: bool, margin: float) -> CheckResult:
    return CheckResult(name=name, passed=bool(passed), margin=float(margin))


def _finish(
    cfg: ExperimentConfig,
    command: str,
    start: float,
    results: Dict[str, Any],
    checks: List[CheckResult],
    tables: Dict[str, Table]
) -> CommandReport:
    report = CommandReport(
        command=command,
        version=__version__,
        config=cfg.model_dump(mode="json"),
        results=results,
        checks=checks,
        runtime_s=round(time.time() - start, 3),
    )
    out = Path(cfg.out)
    stem = command.replace("-", "_")
    if cfg.format in ("csv", "both"):
        for name, (header, rows) in tables.items():
            write_csv(out / f"{stem}_{name}.csv", header, rows)
    if cfg.format in ("json", "both"):
        write_json(out / f"{stem}.json", report)
    logger.info("Command finished", command=command, passed=report.passed, runtime_s=report.runtime_s)
    return report


def _strictly_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values[:-1], values[1:]))


# --------------------------------------------------------------------------- commands


def cmd_kernel(cfg: ExperimentConfig) -> CommandReport:
    start = time.time()
    k = kernel.make_kernel(cfg.alpha, T=cfg.T)
    shape = kernel.shape_report(k)
    hypotheses = spectral.hypothesis_report(k)
    table = kernel.spectrum_table(k)
    results = {
        "kernel": k.to_json_dict(),
        "shape": shape.model_dump(),
        "hypotheses": hypotheses.model_dump(),
        "tail_constant": table.tail_constant,
    }
    checks = [
        _check("kernel_shape", shape.positive and shape.decreasing and shape.convex, 0.0),
        _check("spectral_density_nonnegative", shape.min_bhat >= -1e-9, shape.min_bhat + 1e-9),
        _check("finite_variation_hypotheses", hypotheses.passed, 0.0),
    ]
    tables = {"spectrum": (("lambda", "Bhat"), table.csv_rows())}
    return _finish(cfg, "kernel", start, results, checks, tables)


def cmd_spectrum(cfg: ExperimentConfig) -> CommandReport:
    start = time.time()
    k = kernel.make_kernel(cfg.alpha, T=cfg.T)
    first, last = cfg.lambda_decades
    grid = spectral.lambda_grid(first, last, cfg.per_decade)
    report = spectral.asymptote_check(k, cfg.T, grid)
    acceptance = spectral.asymptote_check(k, cfg.T, ACCEPTANCE_LAMBDAS)

    b1 = spectral.make_corrected(k, cfg.T, CorrectionKind.B1)
    fd_gaps = [spectral.finite_difference_gap(b1, lam) for lam in FD_LAMBDAS]
    quadratic = kernel.make_kernel(
        cfg.alpha, eps_cut=k.eps_cut, T=cfg.T, continuation=TailContinuation.QUADRATIC
    )
    gaps = spectral.continuation_gap(k, quadratic, cfg.T, grid)
    gap_margin = float(np.min(1e-6 + 20.0 / grid - gaps))

    deviations = [abs(r - 1.0) for r in acceptance.ratio_value]
    results = {
        "report": report.model_dump(mode="json"),
        "acceptance_ratios": dict(zip([f"{lam:g}" for lam in ACCEPTANCE_LAMBDAS], acceptance.ratio_value)),
        "finite_difference_gaps": fd_gaps,
        "continuation_gap_max": float(np.max(gaps)),
    }
    checks = [
        _check("ratio_at_1e6_within_25pct", deviations[-1] <= 0.25, 0.25 - deviations[-1]),
        _check("deviation_decreasing", _strictly_decreasing(deviations), 0.0),
        _check("derivative_matches_finite_difference", max(fd_gaps) <= 1e-4, 1e-4 - max(fd_gaps)),
        _check("continuation_independent", gap_margin >= 0.0, gap_margin),
    ]
    tables = {"asymptote": (("lambda", "ratio_value", "ratio_derivative"), report.csv_rows())}
    return _finish(cfg, "spectrum", start, results, checks, tables)


def cmd_gram(cfg: ExperimentConfig) -> CommandReport:
    start = time.time()
    k = kernel.make_kernel(cfg.alpha, T=cfg.T)
    g = gram.build_gram(k, cfg.T, cfg.N)
    defect = gram.hs_defect(g)
    eigen = {n: gram.min_eigenvalue(gram.truncate_gram(g, n)) for n in defect.truncations}
    diag = gram.diag_asymptotic(k, cfg.T, cfg.k_list)
    xy_trend = gram.xy_diagonal_trend(k, cfg.T, XY_TREND_INDICES)

    late = [inc for n, inc in zip(defect.truncations[:-1], defect.increments) if n >= 16]
    floor_ns = [n for n in defect.truncations if n >= 16]
    floor = min((eigen[n] for n in floor_ns), default=float("nan"))
    decays = [
        (eigen[a] - eigen[b]) / eigen[a]
        for a, b in zip(defect.truncations[:-1], defect.truncations[1:])
        if a >= 32
    ]
    diag_dev = [abs(r - 1.0) for r in diag.ratios]

    results = {
        "N": cfg.N,
        "hs_defect": defect.model_dump(),
        "min_eigenvalues": {str(n): v for n, v in eigen.items()},
        "diag": diag.model_dump(),
        "xy_diagonal_times_n": dict(zip(map(str, XY_TREND_INDICES), xy_trend.tolist())),
    }
    checks = [
        _check("hs_increments_decreasing", _strictly_decreasing(late), 0.0),
        _check("min_eigenvalue_floor", floor > EIGEN_FLOOR, floor - EIGEN_FLOOR),
        _check("min_eigenvalue_decay_below_10pct", all(d < 0.1 for d in decays),
               0.1 - max(decays, default=0.0)),
        _check("diag_ratios_positive", all(r > 0 for r in diag.ratios), min(diag.ratios)),
        _check("diag_ratio_approaches_one", _strictly_decreasing(diag_dev), 0.0),
        _check("diag_ratio_within_35pct", diag_dev[-1] <= 0.35, 0.35 - diag_dev[-1]),
    ]
    tables: Dict[str, Table] = {
        "defect": (
            ("N", "partial_sum", "increment", "min_eigenvalue"),
            [
                (n, s, defect.increments[i - 1] if i else "", eigen[n])
                for i, (n, s) in enumerate(zip(defect.truncations, defect.partial_sums))
            ],
        ),
        "diag": (("k", "ratio"), list(zip(diag.k_list, diag.ratios))),
    }
    if cfg.dump_matrix:
        tables["matrix"] = (
            ("row", "col", "re", "im"),
            [(i, j, z.real, z.imag) for (i, j), z in np.ndenumerate(g.matrix)],
        )
    return _finish(cfg, "gram", start, results, checks, tables)


def _schedule(cfg: ExperimentConfig) -> List[Tuple[int, float]]:
    if cfg.schedule is ScheduleKind.CUSTOM:
        if not cfg.eps_file:
            raise UsageError("--schedule custom needs --eps-file")
        return read_eps_file(cfg.eps_file)
    if cfg.schedule is ScheduleKind.STANDARD:
        return sorted(cfg.scan_points)
    return gspace.make_schedule(
        cfg.schedule, cfg.alpha, cfg.n_max, n_min=cfg.n_min, constant=cfg.schedule_constant
    )


def cmd_zn_scan(cfg: ExperimentConfig) -> CommandReport:
    start = time.time()
    k = kernel.make_kernel(cfg.alpha, T=cfg.T)
    if cfg.schedule is ScheduleKind.STANDARD:
        # repeated n: reported point by point, no trend
        rows = [gspace.zn_stats(k, n, eps) for n, eps in _schedule(cfg)]
        scan = ThresholdScan(alpha=k.alpha, rows=rows, classification=TrendClass.INCONCLUSIVE)
    else:
        scan = gspace.threshold_scan(k, _schedule(cfg))
    var = [r.var_Zn for r in scan.rows]
    corr = [r.corr for r in scan.rows]

    checks = [_check("corr_in_range", all(-1e-9 <= c <= 1.0 for c in corr), min(corr) + 1e-9)]
    if cfg.schedule is ScheduleKind.SUBCRITICAL:
        checks.append(_check(
            "var_increasing_corr_decreasing",
            all(b > a for a, b in zip(var[:-1], var[1:])) and _strictly_decreasing(corr),
            0.0,
        ))
    elif cfg.schedule is ScheduleKind.SUPERCRITICAL:
        gap = abs(1.0 - corr[-1])
        checks.append(_check("corr_collapses_to_one", gap <= 0.02, 0.02 - gap))
    elif cfg.schedule is ScheduleKind.CRITICAL and len(corr) >= 2:
        change = abs(corr[-1] / corr[-2] - 1.0)
        checks.append(_check("corr_stabilized", change < 0.05, 0.05 - change))
        inside = min(corr[-1] - 0.05, 0.95 - corr[-1])
        checks.append(_check("corr_strictly_inside", inside > 0, inside))

    results = {"classification": scan.classification.value, "rows": len(scan.rows)}
    tables = {"rows": (("n", "eps_n", "theta", "var_Z", "var_Zn", "cov", "corr"), scan.csv_rows())}
    return _finish(cfg, "zn-scan", start, results, checks, tables)


def cmd_separation(cfg: ExperimentConfig) -> CommandReport:
    start = time.time()
    k_a = kernel.make_kernel(cfg.alpha_a, T=cfg.T)
    k_b = kernel.make_kernel(cfg.alpha_b, T=cfg.T)
    n_list = [n for n, _ in gspace.make_schedule(ScheduleKind.CRITICAL, cfg.alpha_b, cfg.n_max, n_min=cfg.n_min)]
    report = gspace.separation_report(k_a, k_b, n_list, mes=cfg.mes)

    results: Dict[str, Any] = {
        "separated": report.separated,
        "b_floor": report.b_floor,
        "a_final_over_initial": report.a_final_over_initial,
    }
    if cfg.mes is None:
        checks = [
            _check("b_overlap_above_floor", report.b_floor >= settings.separation_floor,
                   report.b_floor - settings.separation_floor),
            _check("a_overlap_decreasing", report.separated or _strictly_decreasing(
                [r.overlap for r in report.series("A")][-gspace.SEPARATION_WINDOW:]), 0.0),
        ]
    else:
        checks = []
        for system in ("A", "B"):
            rows = report.series(system)
            var_Z = gspace.unit_norm2(k_a if system == "A" else k_b)
            relative = [r.dist_gn_g / np.sqrt(var_Z) for r in rows]
            results[f"relative_distance_{system}"] = relative
            results[f"target_margin_{system}"] = float(relative[-1] - RELATIVE_DISTANCE_TARGET)
            checks.append(_check(f"relative_distance_decreasing_{system}", _strictly_decreasing(relative), 0.0))

    rows = [
        (r.n, r.mes, r.system, r.alpha, r.norm_gn, r.inner_gn_g, r.dist_gn_g, r.overlap)
        for r in report.rows
    ]
    tables = {"rows": (("n", "mes", "system", "alpha", "norm_gn", "inner_gn_g", "dist_gn_g", "overlap"), rows)}
    return _finish(cfg, "separation", start, results, checks, tables)


def cmd_measures(cfg: ExperimentConfig) -> CommandReport:
    start = time.time()
    seed = 0 if cfg.seed is None else cfg.seed
    rng = np.random.default_rng(seed)

    suite = []
    for trial in range(cfg.suite_size):
        result = measures.sandwich_check(measures.random_pair(rng, int(rng.integers(2, MEASURE_SUPPORT_MAX + 1))))
        suite.append((trial, result.affinity, result.distance, result.lower_margin, result.upper_margin))
    worst = min(min(row[3], row[4]) for row in suite)

    results: Dict[str, Any] = {"seed": seed, "suite_size": cfg.suite_size, "worst_sandwich_margin": worst}
    checks = [_check("sandwich_suite", worst >= -measures.SANDWICH_SLACK, worst)]

    p, q = cfg.p, cfg.q
    if cfg.weights_file:
        p, q = read_weights_file(cfg.weights_file)
    if p is not None or q is not None:
        if p is None or q is None:
            raise UsageError("--p and --q must be given together")
        given = measures.sandwich_check(measures.make_measure_pair(p, q))
        results["given_pair"] = given.model_dump()
        checks.append(_check("sandwich_given_pair", given.holds, min(given.lower_margin, given.upper_margin)))

    ratios = cfg.ratios if cfg.ratios is not None else list(rng.uniform(0.2, 5.0, size=16))
    r = measures.make_ratios(ratios)
    affinity = measures.gaussian_affinity(r)
    inverse = measures.gaussian_affinity(measures.make_ratios(1.0 / r.lambdas))
    half = len(ratios) // 2
    split = (
        measures.gaussian_affinity(measures.make_ratios(r.lambdas[:half])).log_value
        + measures.gaussian_affinity(measures.make_ratios(r.lambdas[half:])).log_value
        if 0 < half < len(ratios) else affinity.log_value
    )
    symmetry = abs(affinity.log_value - inverse.log_value)
    product = abs(affinity.log_value - split)
    results["gaussian_affinity"] = affinity.model_dump()
    checks.append(_check("affinity_inverse_symmetry", symmetry <= 1e-12, 1e-12 - symmetry))
    checks.append(_check("affinity_multiplicative", product <= 1e-12, 1e-12 - product))

    ks = np.arange(1, KAKUTANI_K + 1, dtype=float)
    convergent = measures.kakutani_check(1.0 + 1.0 / ks, None, KAKUTANI_K)
    divergent = measures.kakutani_check(1.0 + 1.0 / np.sqrt(ks), None, KAKUTANI_K)
    results["kakutani"] = {"convergent": convergent.verdict.value, "divergent": divergent.verdict.value}
    checks.append(_check("kakutani_convergent", convergent.verdict is KakutaniVerdict.EQUIVALENT, 0.0))
    checks.append(_check("kakutani_divergent", divergent.verdict is KakutaniVerdict.SINGULAR, 0.0))

    half_point = abs(measures.shift_affinity(np.sqrt(8.0 * np.log(2.0))) - 0.5)
    checks.append(_check("shift_affinity_half", half_point <= 1e-12, 1e-12 - half_point))

    tables = {"sandwich": (("trial", "affinity", "distance", "lower_margin", "upper_margin"), suite)}
    return _finish(cfg, "measures", start, results, checks, tables)


def cmd_fock(cfg: ExperimentConfig) -> CommandReport:
    start = time.time()
    seed = 0 if cfg.seed is None else cfg.seed
    suite = fock.run_fock_suite(seed, cfg.suite_size)
    moduli = np.linspace(fock.COHERENT_MAX / fock.COHERENT_GRID, fock.COHERENT_MAX, fock.COHERENT_GRID)
    coherent = [fock.coherent_bound_check(complex(m), cfg.fock_dim) for m in moduli]

    checks = [
        _check("lipschitz_bound", suite.lipschitz_worst_margin >= -1e-10, suite.lipschitz_worst_margin),
        _check("reduced_states_psd", suite.reduce_worst_eigenvalue >= -1e-10, suite.reduce_worst_eigenvalue),
        _check("reduced_trace_one", suite.reduce_worst_trace_error <= 1e-10,
               1e-10 - suite.reduce_worst_trace_error),
        _check("unitary_covariance", suite.covariance_worst_deviation <= 1e-10,
               1e-10 - suite.covariance_worst_deviation),
        _check("coherent_lower_bound", all(c.holds for c in coherent), min(c.margin for c in coherent)),
    ]
    results = {"suite": suite.model_dump(), "fock_dim": cfg.fock_dim}
    rows = [(abs(c.beta), c.lhs, c.lhs_closed_form, c.rhs, c.margin, c.tail_mass) for c in coherent]
    tables = {"coherent": (("beta_abs", "lhs", "lhs_closed_form", "rhs", "margin", "tail_mass"), rows)}
    return _finish(cfg, "fock", start, results, checks, tables)


def cmd_simulate(cfg: ExperimentConfig) -> CommandReport:
    if cfg.seed is None:
        raise UsageError("simulate requires --seed")
    start = time.time()
    k = kernel.make_kernel(cfg.alpha, T=cfg.T)
    runs = [sim.mc_zn(k, n, eps, cfg.samples, cfg.seed) for n, eps in cfg.scan_points]

    checks = []
    for run in runs:
        slack = run.corr_half_width + 1e-3 - abs(run.corr_quadrature - run.corr_hat)
        checks.append(_check(f"bracket_n{run.n}_eps{run.eps_n:g}", run.bracketed, slack))
    worst_clip = max(run.clip_ratio for run in runs)
    checks.append(_check("clip_ratio", worst_clip < 1e-6, 1e-6 - worst_clip))

    rows = [
        (r.n, r.eps_n, r.bins_per_cell, r.var_hat, r.var_ci[0], r.var_ci[1], r.var_quadrature, r.var_lagsum,
         r.corr_hat, r.corr_ci[0], r.corr_ci[1], r.corr_quadrature, r.corr_lagsum, r.clip_ratio)
        for r in runs
    ]
    header = ("n", "eps_n", "bins_per_cell", "var_hat", "var_lo", "var_hi", "var_quadrature", "var_lagsum",
              "corr_hat", "corr_lo", "corr_hi", "corr_quadrature", "corr_lagsum", "clip_ratio")
    results = {"seed": cfg.seed, "samples": cfg.samples, "points": len(runs)}
    return _finish(cfg, "simulate", start, results, checks, {"mc": (header, rows)})


COMMANDS: Dict[str, Callable[[ExperimentConfig], CommandReport]] = {
    "kernel": cmd_kernel,
    "spectrum": cmd_spectrum,
    "gram": cmd_gram,
    "zn-scan": cmd_zn_scan,
    "separation": cmd_separation,
    "measures": cmd_measures,
    "fock": cmd_fock,
    "simulate": cmd_simulate,
}


# --------------------------------------------------------------------------- entry point


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default=None, help="flat key = value config file")
    common.add_argument("--alpha", type=float, default=None)
    common.add_argument("--alpha-a", dest="alpha_a", type=float, default=None)
    common.add_argument("--alpha-b", dest="alpha_b", type=float, default=None)
    common.add_argument("--T", dest="T", type=float, default=None)
    common.add_argument("--N", dest="N", type=int, default=None)
    common.add_argument("--schedule", choices=[s.value for s in ScheduleKind], default=None)
    common.add_argument("--n-max", dest="n_max", type=int, default=None)
    common.add_argument("--eps-file", dest="eps_file", default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--samples", type=int, default=None)
    common.add_argument("--out", default=None)
    common.add_argument("--tol-quad", dest="tol_quad", type=float, default=None)
    common.add_argument("--format", choices=["csv", "json", "both"], default=None)
    common.add_argument("--mes", type=float, default=None)
    common.add_argument("--p", type=_float_list, default=None)
    common.add_argument("--q", type=_float_list, default=None)
    common.add_argument("--weights-file", dest="weights_file", default=None)
    common.add_argument("--suite-size", dest="suite_size", type=int, default=None)
    common.add_argument("--fock-dim", dest="fock_dim", type=int, default=None)
    common.add_argument("--dump-matrix", dest="dump_matrix", action="store_const", const=True, default=None)

    parser = _Parser(prog="noiselab", description="Numerical lab for slightly coloured noise.")
    parser.add_argument("--version", action="version", version=f"noiselab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, run one command and map the outcome to an exit code."""
    previous_rtol = settings.quad_rtol
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        if cfg.tol_quad is not None:
            settings.quad_rtol = cfg.tol_quad
        with run_context(command=args.command, seed=cfg.seed):
            report = COMMANDS[args.command](cfg)
    except (UsageError, ParameterError) as e:
        logger.warning("Usage error", error=str(e), error_code=e.error_code)
        print(f"error: {e.message}", file=sys.stderr)
        return 1
    except NoiseLabException as e:
        logger.error("Command failed", error=str(e), error_code=e.error_code, details=e.details)
        print(f"error: {e.message}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.error("Unexpected failure", error=str(e), exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1
    finally:
        settings.quad_rtol = previous_rtol
    if not report.passed:
        failed = [c.name for c in report.checks if not c.passed]
        print(f"checks failed: {', '.join(failed)}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
