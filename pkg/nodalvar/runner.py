"""
Batch experiments: dispatch a validated ExperimentConfig and render its rows.

Rows are plain dicts serialized through one DRF serializer per command, which
fixes the column order. CSV artifacts start with a `# schema=1` line; JSON
artifacts are one top-level array. With `timing` off the output only depends
on the config, so reruns are byte-identical.
"""
import csv
import io
import logging
import math
import time
from dataclasses import asdict, dataclass

from rest_framework.renderers import JSONRenderer

from nodalvar import chaos, field, kacrice, kernel, selfcheck
from nodalvar.config import CHAOS2, KACRICE_CURVE, KERNEL_CURVE, MC_NODAL, SELFCHECK, VARIANCE
from nodalvar.serializers import (
    ChaosRowSerializer,
    KacRiceCurveRowSerializer,
    KernelCurveRowSerializer,
    NodalStatsRowSerializer,
    SelfCheckRowSerializer,
    VarianceRowSerializer,
)

logger = logging.getLogger(__name__)

SCHEMA_LINE = "# schema=1\r\n"


@dataclass(frozen=True)
class RunResult:
    command: str
    rows: list
    content: bytes
    exit_code: int
    message: str


def _finite(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def _window(n, rule):
    if rule.kind == "single":
        return kernel.BandWindow.single(n)
    return kernel.make_window(n, rule.g_for(n))


def _windows(config):
    return [_window(n, config.g_rule) for n in config.n_list]


def kernel_curve(config, workers):
    rows = []
    psi = config.psi_range.values()
    for win in _windows(config):
        theta = win.theta(psi)
        exact = kernel.gamma_exact(win, theta)
        cd = kernel.gamma_cd(win, theta)
        asym = kernel.gamma_asym(win, psi) if win.g > 0.0 else [None] * len(psi)
        for k, value in enumerate(psi):
            asym_k = _finite(asym[k])
            rows.append({
                "n": win.n,
                "g": win.g,
                "psi": value,
                "theta": float(theta[k]),
                "gamma_exact": float(exact.gamma[k]),
                "gamma_cd": float(cd.gamma[k]),
                "gamma_asym": asym_k,
                "residual_cd": abs(float(exact.gamma[k]) - float(cd.gamma[k])),
                "residual_asym": None if asym_k is None else abs(float(exact.gamma[k]) - asym_k),
            })
    return rows


def kacrice_curve(config, workers):
    rows = []
    psi = config.psi_range.values()
    for win in _windows(config):
        series = kacrice.k_twopoint(win, psi, method=kacrice.SERIES)
        asym = kacrice.k_asymptotic(win, psi) if win.g > 0.0 else [None] * len(psi)
        if config.oracle == kacrice.QUADRATURE:
            estimates = [
                kacrice.OracleEstimate(float(v), 0.0, kacrice.QUADRATURE)
                for v in kacrice.k_twopoint(win, psi, method=kacrice.ORACLE)
            ]
        else:
            seeds = field.sample_seeds(config.seed, len(psi))
            estimates = [
                kacrice.k_oracle_estimate(win, value, config.oracle, config.oracle_samples, s, workers)
                for value, s in zip(psi, seeds)
            ]
        for k, value in enumerate(psi):
            oracle_k = estimates[k].value
            asym_k = _finite(asym[k])
            rows.append({
                "n": win.n,
                "g": win.g,
                "psi": value,
                "k_series": float(series[k]),
                "k_oracle": oracle_k,
                "k_asym": asym_k,
                "residual_series": abs(float(series[k]) - oracle_k),
                "residual_asym": None if asym_k is None else abs(asym_k - oracle_k),
                "oracle": estimates[k].method,
                "oracle_stderr": estimates[k].stderr,
                "seed": config.seed if config.oracle != kacrice.QUADRATURE else None,
            })
    return rows


def variance(config, workers):
    rows = []
    for win in _windows(config):
        report = kacrice.variance_integral(
            win, split_C=config.split_c, tol=config.tol, method=config.k_method, workers=workers
        )
        row = asdict(report)
        row["reliable"] = report.reliable
        row["spot_check"] = _finite(report.spot_check)
        row["series_from"] = _finite(report.series_from)
        rows.append(row)
    return rows


def mc_nodal(config, workers, progress=False):
    rows = []
    for win in _windows(config):
        started = time.perf_counter()
        dump = config.raw_dump.replace("{n}", str(win.n)) if config.raw_dump else None
        stats = field.mc_nodal_stats(
            win,
            config.samples,
            level=config.mesh_level,
            seed=config.seed,
            q=config.points_per_wavelength,
            workers=workers,
            raw_dump=dump,
            progress=progress,
            bootstrap=config.bootstrap,
        )
        rows.append({
            "n": win.n,
            "g": win.g,
            "seed": stats.seed,
            "n_samples": stats.n_samples,
            "level": stats.level,
            "mesh_resolution": stats.mesh_resolution,
            "mean_length": stats.mean_length,
            "expected_mean": win.mean_length,
            "stderr_mean": stats.stderr_mean,
            "var_length": stats.var_length,
            "stderr_var": stats.stderr_var,
            "leading": math.log(win.n) / 32.0,
            "discretization_note": stats.discretization_note,
            "wall_time": time.perf_counter() - started,
        })
    return rows


def chaos2(config, workers, progress=False):
    rows = []
    for win in _windows(config):
        report = chaos.chaos_report(
            win,
            samples=config.samples,
            seed=config.seed,
            level=config.mesh_level,
            workers=workers,
            progress=progress,
            bootstrap=config.bootstrap,
        )
        row = {key: _finite(value) for key, value in asdict(report).items()}
        row.update(n=report.n, samples=report.samples, seed=config.seed if config.samples else None)
        rows.append(row)
    return rows


def render(rows, serializer_class, fmt="csv", timing=False):
    """Serialize rows to the bytes of a CSV or JSON artifact."""
    serializer = serializer_class(rows, many=True, context={"timing": timing})
    data = serializer.data
    if fmt == "json":
        return JSONRenderer().render(data)
    columns = list(serializer.child.fields.keys())
    buffer = io.StringIO(newline="")
    buffer.write(SCHEMA_LINE)
    writer = csv.DictWriter(buffer, fieldnames=columns)
    writer.writeheader()
    writer.writerows(data)
    return buffer.getvalue().encode("utf-8")


DISPATCH = {
    KERNEL_CURVE: (kernel_curve, KernelCurveRowSerializer),
    KACRICE_CURVE: (kacrice_curve, KacRiceCurveRowSerializer),
    VARIANCE: (variance, VarianceRowSerializer),
    MC_NODAL: (mc_nodal, NodalStatsRowSerializer),
    CHAOS2: (chaos2, ChaosRowSerializer),
}


def run(config, workers=1, progress=False):
    """
    Run one experiment and render its artifact.

    Library errors propagate to the caller; the exit code is 1 only when a
    self-check fails.
    """
    started = time.perf_counter()
    if config.command == SELFCHECK:
        results = selfcheck.run_checks()
        rows = [asdict(result) for result in results]
        failed = [result.name for result in results if not result.passed]
        exit_code = 1 if failed else 0
        message = f"{len(failed)} of {len(results)} checks failed: {', '.join(failed)}" if failed \
            else f"all {len(results)} checks passed"
        content = render(rows, SelfCheckRowSerializer, config.format)
    else:
        compute, serializer_class = DISPATCH[config.command]
        if config.command in (MC_NODAL, CHAOS2):
            rows = compute(config, workers, progress=progress)
        else:
            rows = compute(config, workers)
        exit_code = 0
        message = f"{len(rows)} rows"
        content = render(rows, serializer_class, config.format, config.timing)
    logger.info("%s finished in %.2fs: %s", config.command, time.perf_counter() - started, message)
    return RunResult(config.command, rows, content, exit_code, message)
