"""
Fast cross-module invariants, run by the `selfcheck` command.

Each check returns a short detail string and raises AssertionError when the
invariant does not hold. Everything here is deterministic and takes seconds.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from nodalvar import chaos, kacrice, kernel, mesh

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_cd_identity():
    worst = 0.0
    for n in (50, 200):
        for g in (0.05, 0.2, n**-0.5):
            win = kernel.make_window(n, g)
            theta = np.linspace(math.pi / 80, math.pi / 2, 40)
            exact = kernel.gamma_exact(win, theta)
            cd = kernel.gamma_cd(win, theta)
            scale = np.maximum(np.abs(exact.gamma), 1e-3)
            worst = max(worst, float(np.max(np.abs(exact.gamma - cd.gamma) / scale)))
    assert worst <= 1e-9, f"relative deviation {worst:.3g}"
    return f"max relative deviation {worst:.2e}"


def check_normalization():
    worst = 0.0
    for n, g in ((10, 0.2), (50, 0.05), (200, 200**-0.5)):
        win = kernel.make_window(n, g)
        worst = max(worst, abs(kernel.gamma_exact(win, 0.0).gamma - 1.0))
    assert worst <= 1e-13, f"|gamma(0) - 1| = {worst:.3g}"
    return f"|gamma(0) - 1| <= {worst:.1e}"


def check_window_constants():
    win = kernel.make_window(10, 0.2)
    assert (win.L0, win.D) == (8, 46.0), f"L0={win.L0}, D={win.D}"
    assert math.isclose(win.Csq, 4 * math.pi / 57, rel_tol=1e-15)
    return "n=10, g=0.2: L0=8, D=46, Csq=4pi/57"


def check_power_sums():
    closed = chaos.power_sum_closed_forms(10)
    _, s1, s2 = chaos.power_sums_range(1, 10)
    assert (s1, s2) == closed == (7260, 580800), f"{(s1, s2)} vs {closed}"
    return "sums to 10: 7260 and 580800"


def check_second_chaos():
    win = kernel.make_window(10_000, 0.01)
    ratio = chaos.chaos2_variance_exact(win) / chaos.chaos2_variance_asym(win)
    assert 0.9 <= ratio <= 1.1, f"exact/asymptotic = {ratio:.4f}"
    for n in (1_000, 10_000):
        w = kernel.make_window(n, n**-0.5)
        var2 = chaos.chaos2_variance_exact(w)
        assert var2 < 0.5 * math.log(n) / 32, f"n={n}: {var2:.4g} not subdominant"
    return f"exact/asymptotic {ratio:.4f} at n=1e4; subdominant at n=1e3, 1e4"


def check_norm_product_oracle():
    identity = kacrice.ConditionalCovariance.from_entries(0.0, 0.0, 0.0)
    value = kacrice.norm_product_oracle(identity).value
    assert abs(value - math.pi / 2) <= 1e-9, f"identity gives {value!r}"
    a, b, c = -0.1, 0.1, 0.05
    cov = kacrice.ConditionalCovariance.from_entries(a, b, c)
    gap = abs(kacrice.norm_product_series(a, b, c) - kacrice.norm_product_oracle(cov).value)
    budget = 10 * (abs(a) ** 3 + abs(b) ** 5 + c * c)
    assert gap <= budget, f"series gap {gap:.3g} > {budget:.3g}"
    return f"identity {value:.12f}; series gap {gap:.2e} within {budget:.2e}"


def check_b_tilde_forms():
    win = kernel.make_window(50, 0.2)
    theta = np.linspace(0.05, math.pi / 2, 12)
    first = kacrice.b_tilde(win, theta, form="derivative")
    second = kacrice.b_tilde(win, theta, form="legendre_sum")
    worst = float(np.max(np.abs(first - second))) / win.D
    assert worst <= 1e-9, f"forms differ by {worst:.3g} D"
    return f"forms agree to {worst:.1e} D"


def check_equator_length():
    grid = mesh.build_mesh(4)
    length = mesh.nodal_length(grid.vertices[:, 2], grid)
    gap = abs(length - 2 * math.pi) / (2 * math.pi)
    assert gap <= 0.01, f"equator length {length:.6f}"
    return f"equator length {length:.6f} (relative gap {gap:.1e})"


CHECKS = (
    ("cd_identity", check_cd_identity),
    ("normalization", check_normalization),
    ("window_constants", check_window_constants),
    ("power_sums", check_power_sums),
    ("second_chaos", check_second_chaos),
    ("norm_product_oracle", check_norm_product_oracle),
    ("b_tilde_forms", check_b_tilde_forms),
    ("equator_length", check_equator_length),
)


def run_checks(checks=CHECKS):
    results = []
    for name, check in checks:
        try:
            result = CheckResult(name, True, check())
        except AssertionError as exc:
            result = CheckResult(name, False, str(exc))
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(level, "%s %s: %s", "PASS" if result.passed else "FAIL", name, result.detail)
        results.append(result)
    return results
