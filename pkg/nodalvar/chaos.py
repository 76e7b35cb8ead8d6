"""
Second-chaos diagnostics of the nodal length.

The variance of the second chaotic component reduces to three integer power
sums S_k = Σ (2ℓ+1) λ^k over the window, λ = ℓ(ℓ+1):

    Var(L[2]) = π² (S0·S2 - S1²) / (S0²·S1)

The difference S0·S2 - S1² cancels through many orders of magnitude, so it is
formed in Python integers and only the final ratio is converted to float.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from nodalvar import field, kernel, quadrature, specfun
from nodalvar import mesh as meshes
from nodalvar.errors import DomainError
from nodalvar.pool import ordered_map

logger = logging.getLogger(__name__)

CLOSED_FORM = "closed_form"
QUADRATURE = "quadrature"


@dataclass(frozen=True)
class ChaosReport:
    n: int
    g: float
    var2_exact: float
    var2_asym: float
    ratio: float
    var2_printed: float
    h2_exact: float
    h2_mc: float | None = None
    h2_mc_stderr: float | None = None
    h4_mc: float | None = None
    h4_mc_stderr: float | None = None
    samples: int = 0


def power_sums_range(lo, hi):
    """(S0, S1, S2) summed over ℓ = lo..hi, as Python integers."""
    s0 = s1 = s2 = 0
    for ell in range(lo, hi + 1):
        weight = 2 * ell + 1
        lam = ell * (ell + 1)
        s0 += weight
        s1 += weight * lam
        s2 += weight * lam * lam
    return s0, s1, s2


def power_sums(win):
    return power_sums_range(win.L0, win.n)


def power_sum_closed_forms(n):
    """Σ_{ℓ=1}^n ℓ(ℓ+1)(2ℓ+1) and Σ_{ℓ=1}^n ℓ²(ℓ+1)²(2ℓ+1)."""
    return n * (n + 1) ** 2 * (n + 2) // 2, n**2 * (n + 1) ** 2 * (n + 2) ** 2 // 3


def chaos2_variance_exact(win):
    s0, s1, s2 = power_sums(win)
    return math.pi**2 * float(Fraction(s0 * s2 - s1 * s1, s0 * s0 * s1))


def chaos2_brace(win):
    """
    S2/C² - 16π·S1²/(64π²), the bracket of the variance formula in floats.

    Var(L[2]) = C⁶/(32D) times this bracket; it is assembled from the window's
    C² rather than from S0, so it cross-checks chaos2_variance_exact.
    """
    _, s1, s2 = power_sums(win)
    return s2 / win.Csq - 16.0 * math.pi * float(s1) ** 2 / (64.0 * math.pi**2)


def chaos2_variance_asym(win):
    """(π²/6)·g·(1 + g/2 + 1/(ng)); zero for g = 0."""
    g = win.g
    if g <= 0.0:
        return 0.0
    return math.pi**2 / 6.0 * g * (1.0 + g / 2.0 + 1.0 / (win.n * g))


def chaos2_variance_printed(win):
    """(2π²/3)·g·(1 + 2g - 2/(ng)), kept for comparison with the published constant."""
    g = win.g
    if g <= 0.0:
        return 0.0
    return 2.0 * math.pi**2 / 3.0 * g * (1.0 + 2.0 * g - 2.0 / (win.n * g))


def _gamma_power_integral(win, power, tol):
    def integrand(theta):
        return kernel.window_sums(win, theta).value ** power * np.sin(theta)

    edges = quadrature.panel_edges(0.0, math.pi, 4.0 / win.n)
    return quadrature.integrate_panels(integrand, edges, rel_tol=tol).value


def h2_variance(win, method=CLOSED_FORM, tol=1e-10):
    """Var(∫H2(T̄)) = 2∫∫Γ² = 8πC², or 16π²∫_0^π Γ² sin θ dθ by quadrature."""
    if method == CLOSED_FORM:
        return 8.0 * math.pi * win.Csq
    if method == QUADRATURE:
        return 16.0 * math.pi**2 * _gamma_power_integral(win, 2, tol)
    raise DomainError(f"unknown method {method!r}")


def h4_variance(win, tol=1e-10):
    """Var(∫H4(T̄)) = 24∫∫Γ⁴ = 192π²∫_0^π Γ⁴ sin θ dθ."""
    return 192.0 * math.pi**2 * _gamma_power_integral(win, 4, tol)


def _surface_integral(sample, grid, order, areas):
    meshes.check_resolution(grid, sample.window.n)
    values = field.evaluate_field(sample, grid.vertices)
    weights = grid.vertex_areas() if areas is None else areas
    return float(np.sum(weights * specfun.hermite_h(order, values)))


def sample_h2(sample, grid, areas=None):
    """∫ H2(T̄(x)) dx with Voronoi-area vertex weights."""
    return _surface_integral(sample, grid, 2, areas)


def sample_h4(sample, grid, areas=None):
    """∫ H4(T̄(x)) dx with Voronoi-area vertex weights."""
    return _surface_integral(sample, grid, 4, areas)


def chaos_moments(win, samples, seed, level=None, workers=1, progress=False):
    """Per-sample (∫H2, ∫H4) over seeded fields on one mesh, shape (samples, 2)."""
    if level is None:
        level = meshes.minimum_level(win.n)
    grid = meshes.build_mesh(level)
    meshes.check_resolution(grid, win.n)
    areas = grid.vertex_areas()
    basis = field.basis_matrix(win, grid.vertices)

    def moments(sample_seed):
        values = basis @ field.sample_field(win, sample_seed).coeffs
        return (
            float(np.sum(areas * specfun.hermite_h(2, values))),
            float(np.sum(areas * specfun.hermite_h(4, values))),
        )

    seeds = field.sample_seeds(seed, samples)
    return np.array(ordered_map(moments, seeds, workers, progress="chaos samples" if progress else None))


def chaos_report(win, samples=0, seed=None, level=None, workers=1, progress=False,
                 bootstrap=field.BOOTSTRAP_RESAMPLES):
    """Second-chaos variance with its asymptotics and, with samples > 0, the sampled H2/H4 variances."""
    exact = chaos2_variance_exact(win)
    asym = chaos2_variance_asym(win)
    mc = {}
    if samples:
        if samples < 2:
            raise DomainError("at least two samples are needed for a variance")
        if seed is None:
            raise DomainError("sampled chaos moments need an explicit seed")
        moments = chaos_moments(win, samples, seed, level=level, workers=workers, progress=progress)
        mc = {
            "h2_mc": float(np.var(moments[:, 0], ddof=1)),
            "h2_mc_stderr": field.bootstrap_var_stderr(moments[:, 0], seed, bootstrap),
            "h4_mc": float(np.var(moments[:, 1], ddof=1)),
            "h4_mc_stderr": field.bootstrap_var_stderr(moments[:, 1], seed, bootstrap),
        }
    report = ChaosReport(
        n=win.n,
        g=win.g,
        var2_exact=exact,
        var2_asym=asym,
        ratio=exact / asym if asym > 0.0 else math.nan,
        var2_printed=chaos2_variance_printed(win),
        h2_exact=h2_variance(win),
        samples=int(samples),
        **mc,
    )
    logger.info("second chaos n=%d g=%.4g: exact %.6g, asymptotic %.6g (ratio %.4f)",
                win.n, win.g, exact, asym, report.ratio)
    return report
