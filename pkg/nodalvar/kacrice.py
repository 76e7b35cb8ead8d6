"""
Kac–Rice two-point correlation of the nodal length.

Conditioning the gradients at two points at angle θ on the field vanishing at
both leaves a centred Gaussian 4-vector (U, V) with covariance D·Δ, where

    Δ = [[1+2a, 0,    2b,   0 ],
         [0,    1,    0,    2c],
         [2b,   0,    1+2a, 0 ],
         [0,    2c,   0,    1 ]]

and a, b, c are ã, b̃, c̃ scaled by 2D. The two-point correlation is
K = E‖U‖‖V‖ / (2π√(1-Γ²)) and the nodal length variance is

    Var = 16π² D/(mα) ∫_0^{mαπ/2} (K(ψ) - 1/4) sin(ψ/(mα)) dψ.

E‖U‖‖V‖ comes either from its small-parameter series or from an oracle: a
one-dimensional exponential-tilt integral that is exact up to quadrature
error, or seeded Monte Carlo.
"""
import logging
import math
import time
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

from nodalvar import kernel, quadrature, specfun
from nodalvar.errors import (
    DegenerateCovarianceError,
    DomainError,
    FactorizationError,
    OracleDisagreementError,
    SeriesRegimeWarning,
)
from nodalvar.pool import ordered_map

logger = logging.getLogger(__name__)

SERIES = "series"
ORACLE = "oracle"
K_METHODS = (SERIES, ORACLE)

QUADRATURE = "quadrature"
MONTECARLO = "montecarlo"
BOTH = "both"
ORACLE_METHODS = (QUADRATURE, MONTECARLO, BOTH)

PSD_TOL = 1e-10
DEGENERATE_TOL = 1e-14
SERIES_RADIUS = 0.5

MC_SAMPLES = 10_000_000
MC_BATCH = 1_000_000

EPSILON_PSI = 1e-6
PANEL_WIDTH = math.pi / 4
SPOT_CHECKS = 5
# spot checks flag the series once |K_series - K_oracle| exceeds this many tol
SPOT_FACTOR = 10.0
SERIES_GRID_STEP = 0.25
# node-to-node noise of the oracle K; the panel error estimates cannot go below it
ORACLE_NOISE = 1e-12

# trapezoid grid in τ = log t for the tilt integral; the tails beyond both
# ends are closed geometrically (the integrand behaves like e^{±τ/2} there)
_TILT_STEP = 0.25
_TILT_TAU = np.arange(math.log(1e-10), 60.0 + _TILT_STEP / 2, _TILT_STEP)
_TILT_T = np.exp(_TILT_TAU)
_TILT_TAIL = math.exp(-_TILT_STEP / 2) / (1.0 - math.exp(-_TILT_STEP / 2))
_TILT_CHUNK = 2048


@dataclass(frozen=True)
class ConditionalCovariance:
    theta: float
    a: float
    b: float
    c: float
    delta: np.ndarray
    valid: bool

    @classmethod
    def from_entries(cls, a, b, c, theta=math.nan):
        delta = np.array([
            [1.0 + 2.0 * a, 0.0, 2.0 * b, 0.0],
            [0.0, 1.0, 0.0, 2.0 * c],
            [2.0 * b, 0.0, 1.0 + 2.0 * a, 0.0],
            [0.0, 2.0 * c, 0.0, 1.0],
        ])
        valid = bool(np.linalg.eigvalsh(delta).min() >= -PSD_TOL)
        return cls(theta=float(theta), a=float(a), b=float(b), c=float(c), delta=delta, valid=valid)

    def traces(self):
        """Traces of the U and V blocks, i.e. E‖U‖² and E‖V‖²."""
        return self.delta[0, 0] + self.delta[1, 1], self.delta[2, 2] + self.delta[3, 3]


@dataclass(frozen=True)
class OracleEstimate:
    value: float
    stderr: float
    method: str
    samples: int = 0


@dataclass(frozen=True)
class VarianceReport:
    n: int
    g: float
    I1: float
    I2: float
    total: float
    leading: float
    quad_error: float
    wall_time: float
    split_C: float
    tol: float
    method: str
    panels: int
    hemisphere: bool = False
    series_from: float | None = None
    spot_check: float | None = None
    spot_ok: bool = True

    @property
    def reliable(self):
        return self.spot_ok and self.quad_error < 0.01 * abs(self.total)


class Entries(NamedTuple):
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    gamma: np.ndarray
    one_minus: np.ndarray  # 1 - Γ²


def scaled_entries(win, theta):
    """Vectorised a, b, c together with Γ and 1 - Γ² at the angles theta."""
    theta = np.asarray(theta, dtype=float)
    sums = kernel.window_sums(win, theta)
    u = sums.complement
    one_minus = u * (2.0 - u)
    gamma = sums.value
    dgamma = -np.sin(theta) * sums.first
    ddgamma = np.cos(theta) * sums.first - sums.lam_value
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = dgamma**2 / one_minus
    two_d = 2.0 * win.D
    a = -ratio / two_d
    b = (-ddgamma - gamma * ratio) / two_d
    c = sums.first / two_d
    return Entries(a, b, c, gamma, one_minus)


def conditional_covariance(win, theta):
    """Scaled Kac–Rice entries and Δ at a single angle θ ∈ (0, π/2]."""
    t = float(theta)
    if not 0.0 < t <= math.pi / 2 + specfun.ENDPOINT_TOL:
        raise DomainError(f"theta must lie in (0, pi/2], got {theta!r}")
    entries = scaled_entries(win, t)
    if entries.one_minus <= DEGENERATE_TOL:
        raise DegenerateCovarianceError(
            f"1 - gamma^2 = {float(entries.one_minus):.3g} at theta={t:.3g}; angle too small"
        )
    return ConditionalCovariance.from_entries(entries.a, entries.b, entries.c, theta=t)


def b_tilde(win, theta, form="derivative"):
    """
    Unscaled b̃ in either of its two equivalent forms.

    "derivative":    -Γ'' - ΓΓ'²/(1-Γ²)
    "legendre_sum":  C²Σ w (P' cos θ - P'' sin²θ) - ΓΓ'²/(1-Γ²)
    """
    t = np.asarray(theta, dtype=float)
    sums = kernel.window_sums(win, t, second_derivative=(form == "legendre_sum"))
    u = sums.complement
    one_minus = u * (2.0 - u)
    dgamma = -np.sin(t) * sums.first
    correction = sums.value * dgamma**2 / one_minus
    if form == "derivative":
        ddgamma = np.cos(t) * sums.first - sums.lam_value
        value = -ddgamma - correction
    elif form == "legendre_sum":
        value = sums.first * np.cos(t) - sums.second * np.sin(t) ** 2 - correction
    else:
        raise DomainError(f"unknown b-tilde form {form!r}")
    return float(value) if np.ndim(theta) == 0 else value


def omega_matrix(win, theta, orientation=1):
    """
    Conditional covariance Ω = C - BᵀA⁻¹B of the two gradients.

    A is the covariance of (T(x), T(y)), B their covariance with the
    gradients in the frame (∂1 T(x), ∂2 T(x), ∂1 T(y), ∂2 T(y)), and C the
    gradient covariance. The frame orientation flips the sign of B and
    drops out of Ω. Δ = Ω / D.
    """
    if orientation not in (1, -1):
        raise DomainError("orientation must be +1 or -1")
    t = float(theta)
    sums = kernel.window_sums(win, t)
    u = float(sums.complement)
    det = u * (2.0 - u)
    gamma = float(sums.value)
    first = float(sums.first)
    dgamma = -math.sin(t) * first
    ddgamma = math.cos(t) * first - float(sums.lam_value)
    d = win.D
    a_inv = np.array([[1.0, -gamma], [-gamma, 1.0]]) / det
    b_mat = orientation * np.array([[0.0, 0.0, -dgamma, 0.0], [dgamma, 0.0, 0.0, 0.0]])
    c_mat = np.array([
        [d, 0.0, -ddgamma, 0.0],
        [0.0, d, 0.0, first],
        [-ddgamma, 0.0, d, 0.0],
        [0.0, first, 0.0, d],
    ])
    return c_mat - b_mat.T @ a_inv @ b_mat


def _warn_outside_series(*parts, what="|a|, |b|, |c|"):
    size = max(float(np.nanmax(np.abs(np.asarray(p, dtype=float)), initial=0.0)) for p in parts)
    if size > SERIES_RADIUS:
        warnings.warn(
            f"series used beyond {what} <= {SERIES_RADIUS} (largest {size:.3g})",
            SeriesRegimeWarning,
            stacklevel=3,
        )


def series_remainder(entries):
    """Size of the orders the K series leaves out, pointwise in the entries."""
    a, b, c = np.abs(entries.a), np.abs(entries.b), np.abs(entries.c)
    g2 = entries.gamma**2
    return a**3 + b**5 + c**2 + g2**3 + a * a * g2 + b**4 * g2


def norm_product_series(a, b, c):
    """
    Six-term series of E‖U‖‖V‖ in the scaled entries.

    The remainder is O(a³ + b⁵ + c²); c only enters at second order.
    """
    a_, b_, c_ = (np.asarray(v, dtype=float) for v in (a, b, c))
    _warn_outside_series(a_, b_, c_)
    pi = math.pi
    value = (
        pi / 2
        + pi / 2 * a_
        + pi / 4 * b_**2
        - pi / 16 * a_**2
        - 3 * pi / 8 * a_ * b_**2
        + 3 * pi / 64 * b_**4
    )
    return float(value) if np.ndim(a) == 0 and np.ndim(b) == 0 else value


def _norm_mean(s1, s2):
    """E√(s1 X² + s2 Y²) for independent standard normals X and Y."""
    hi = np.maximum(s1, s2)
    lo = np.minimum(s1, s2)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.where(hi > 0.0, 1.0 - lo / np.where(hi > 0.0, hi, 1.0), 0.0)
    return math.sqrt(2.0 / math.pi) * np.sqrt(hi) * special.ellipe(m)


def _tilt_chunk(p1, q1, p2, q2):
    base = _norm_mean(p1, p2)
    p1, q1, p2, q2 = (v[:, None] for v in (p1, q1, p2, q2))
    t = _TILT_T[None, :]
    d1 = 1.0 + 2.0 * p1 * t
    d2 = 1.0 + 2.0 * p2 * t
    s1 = np.maximum(p1 - 2.0 * q1 * q1 * t / d1, 0.0)
    s2 = np.maximum(p2 - 2.0 * q2 * q2 * t / d2, 0.0)
    tilted = _norm_mean(s1, s2)
    one_minus_phi = -np.expm1(-0.5 * (np.log1p(2.0 * p1 * t) + np.log1p(2.0 * p2 * t)))
    # base - φ·tilted, split so that small-t nodes keep their relative accuracy
    bracket = (base[:, None] - tilted) + one_minus_phi * tilted
    f = bracket / np.sqrt(t)
    h = _TILT_STEP
    integral = h * np.sum(f, axis=1) + h * _TILT_TAIL * (f[:, 0] + f[:, -1])
    return integral / (2.0 * math.sqrt(math.pi))


def norm_product_quadrature(p1, q1, p2, q2):
    """
    E‖U‖‖V‖ for two independent blocks with Var U_k = Var V_k = p_k, Cov = q_k.

    Uses r = (2√π)⁻¹ ∫_0^∞ (1 - e^{-t r²}) t^{-3/2} dt with r = ‖V‖. Under the
    weight e^{-t‖V‖²} the vector U stays Gaussian with variances
    p_k - 2q_k² t/(1 + 2p_k t), so every inner expectation is an elliptic
    integral. Vectorised over the block parameters.
    """
    arrays = np.broadcast_arrays(*(np.atleast_1d(np.asarray(v, dtype=float)) for v in (p1, q1, p2, q2)))
    p1_, q1_, p2_, q2_ = (np.ravel(v) for v in arrays)
    p1_ = np.maximum(p1_, 0.0)
    p2_ = np.maximum(p2_, 0.0)
    q1_ = np.clip(q1_, -p1_, p1_)
    q2_ = np.clip(q2_, -p2_, p2_)
    out = np.empty(p1_.size)
    for start in range(0, p1_.size, _TILT_CHUNK):
        stop = start + _TILT_CHUNK
        out[start:stop] = _tilt_chunk(p1_[start:stop], q1_[start:stop], p2_[start:stop], q2_[start:stop])
    if np.ndim(p1) == 0 and np.ndim(q1) == 0:
        return float(out[0])
    return out.reshape(arrays[0].shape)


def _psd_factor(delta):
    w, v = np.linalg.eigh(delta)
    if w.min() < -PSD_TOL:
        raise FactorizationError(f"covariance not positive semi-definite (min eigenvalue {w.min():.3g})")
    return v * np.sqrt(np.clip(w, 0.0, None))


def _norm_product_montecarlo(delta, samples, seed, workers):
    factor = _psd_factor(delta)
    sizes = [MC_BATCH] * (samples // MC_BATCH)
    if samples % MC_BATCH:
        sizes.append(samples % MC_BATCH)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def batch(job):
        size, stream = job
        rng = np.random.default_rng(stream)
        x = rng.standard_normal((size, 4)) @ factor.T
        product = np.hypot(x[:, 0], x[:, 1]) * np.hypot(x[:, 2], x[:, 3])
        return np.sum(product), np.sum(product * product)

    parts = ordered_map(batch, list(zip(sizes, streams)), workers)
    total = np.sum([part[0] for part in parts])
    total_sq = np.sum([part[1] for part in parts])
    mean = total / samples
    variance = max(total_sq / samples - mean * mean, 0.0) * samples / max(samples - 1, 1)
    return float(mean), math.sqrt(variance / samples)


def norm_product_oracle(cov, method=QUADRATURE, samples=MC_SAMPLES, seed=None, workers=1):
    """
    E‖U‖‖V‖ for the Gaussian 4-vector with covariance cov.delta.

    "quadrature" is deterministic (stderr 0); "montecarlo" needs a seed;
    "both" returns the quadrature value with the Monte Carlo standard error
    and raises OracleDisagreementError if they differ by more than 3 stderr.
    """
    if method not in ORACLE_METHODS:
        raise DomainError(f"unknown oracle method {method!r}")
    if not cov.valid:
        raise FactorizationError(f"conditional covariance at theta={cov.theta:.4g} is not PSD")
    delta = cov.delta
    exact = None
    if method in (QUADRATURE, BOTH):
        exact = norm_product_quadrature(delta[0, 0], delta[0, 2], delta[1, 1], delta[1, 3])
        if method == QUADRATURE:
            return OracleEstimate(exact, 0.0, QUADRATURE)
    if seed is None:
        raise DomainError("the Monte Carlo oracle needs an explicit seed")
    mean, stderr = _norm_product_montecarlo(delta, int(samples), seed, workers)
    if method == MONTECARLO:
        return OracleEstimate(mean, stderr, MONTECARLO, int(samples))
    if abs(mean - exact) > 3.0 * stderr + 1e-12:
        raise OracleDisagreementError(
            f"quadrature {exact:.10g} and Monte Carlo {mean:.10g} ± {stderr:.2g} disagree"
        )
    return OracleEstimate(exact, stderr, BOTH, int(samples))


def _k_series(entries):
    a, b, g2 = entries.a, entries.b, entries.gamma**2
    _warn_outside_series(a, b, entries.c, g2, what="|a|, |b|, |c|, gamma^2")
    return 0.25 * (
        1.0
        + a
        + b**2 / 2
        + g2 / 2
        - a**2 / 8
        - 0.75 * a * b**2
        + 3.0 / 32 * b**4
        + g2 * a / 2
        + g2 * b**2 / 4
        + 3.0 / 8 * g2**2
    )


def _k_oracle(entries):
    expectation = norm_product_quadrature(1.0 + 2.0 * entries.a, 2.0 * entries.b, 1.0, 2.0 * entries.c)
    return expectation / (2.0 * math.pi * np.sqrt(entries.one_minus))


def k_values(win, theta, method=ORACLE):
    """Vectorised K at the angles theta (no domain checks)."""
    theta = np.asarray(theta, dtype=float)
    if theta.size == 0:
        return np.zeros_like(theta)
    entries = scaled_entries(win, theta)
    if method == SERIES:
        return _k_series(entries)
    return _k_oracle(entries)


def _check_psi(win, psi):
    p = np.asarray(psi, dtype=float)
    if np.any(p <= 0.0) or np.any(p > win.psi_max):
        raise DomainError(f"psi must lie in (0, {win.psi_max:.6g}], got {psi!r}")
    return p


def k_oracle_estimate(win, psi, oracle=QUADRATURE, samples=MC_SAMPLES, seed=None, workers=1):
    """Oracle K at one ψ with the standard error carried over from E‖U‖‖V‖."""
    p = float(_check_psi(win, psi))
    theta = float(win.theta(p))
    cov = conditional_covariance(win, theta)
    estimate = norm_product_oracle(cov, method=oracle, samples=samples, seed=seed, workers=workers)
    scale = 2.0 * math.pi * math.sqrt(kernel.one_minus_gamma_sq(win, theta))
    return OracleEstimate(estimate.value / scale, estimate.stderr / scale, estimate.method, estimate.samples)


def k_twopoint(win, psi, method=SERIES, raw=False, oracle=QUADRATURE, samples=MC_SAMPLES,
               seed=None, workers=1):
    """
    Two-point correlation K(ψ), or K̃ = D·K when raw is set.

    method="series" truncates E‖U‖‖V‖ and (1-Γ²)^{-1/2} jointly; method="oracle"
    uses the exact denominator and the chosen norm-product oracle (the
    Monte Carlo oracle only takes a scalar ψ).
    """
    if method not in K_METHODS:
        raise DomainError(f"unknown K method {method!r}")
    p = _check_psi(win, psi)
    theta = win.theta(p)
    entries = scaled_entries(win, theta)
    if np.any(entries.one_minus <= DEGENERATE_TOL):
        raise DegenerateCovarianceError("1 - gamma^2 vanishes numerically; psi too small")
    if method == SERIES:
        value = _k_series(entries)
    elif oracle == QUADRATURE:
        value = _k_oracle(entries)
    else:
        if np.ndim(psi) != 0:
            raise DomainError("the Monte Carlo oracle evaluates one psi at a time")
        value = k_oracle_estimate(win, float(p), oracle, samples, seed, workers).value
    if raw:
        value = win.D * value
    return float(value) if np.ndim(psi) == 0 else value


def k_asymptotic(win, psi):
    """Large-ψ expansion of K with the exact phases A, B and S = (A+B)/2."""
    p = kernel.check_rescaled(win, psi)
    a, b, s = kernel.rescaled_phases(win, p)
    pi = math.pi
    phase = a + b
    inv, inv2 = 1.0 / p, 1.0 / p**2
    value = (
        0.25
        + inv2 / (256 * pi**2)
        + np.sin(phase) * inv / (2 * pi)
        - 75 * np.cos(2 * phase) * inv2 / (256 * pi**2)
        + 27 * np.sin(phase) * inv2 / (64 * pi**2)
        - np.cos(phase) * inv2 / (4 * pi)
        + np.sin(s) * np.cos(b) * inv2 / (4 * pi)
        - 3 * np.sin(s - pi / 4) * np.cos(b - 5 * pi / 4) * inv2 / (2 * pi)
    )
    return float(value) if np.ndim(psi) == 0 else value


def expansion_terms(win, psi):
    """
    Large-ψ main terms of a and b and the products built from them.

    Keys: a, b, gamma2 and the derived b2, a2, ab2, b4, a_gamma2,
    b2_gamma2, gamma4.
    """
    p = kernel.check_rescaled(win, psi)
    a_ph, b_ph, s = kernel.rescaled_phases(win, p)
    g, h, pi = win.g, win.h, math.pi
    phase = a_ph + b_ph
    a = -1.0 / (pi * p) * (
        1.0
        - np.sin(phase)
        + 6.0 * g / (p * h) * np.sin(s - pi / 4) * np.cos(b_ph - 5 * pi / 4)
        + 1.0 / (2 * pi * p)
        + np.cos(2 * phase) / (2 * pi * p)
    )
    b = np.sqrt(2.0 / (pi * p)) * (
        np.sin(s + pi / 4)
        - 5.0 * g / (2.0 * p * h) * np.cos(b_ph - 7 * pi / 4)
        + np.sin(s - pi / 4) / p
        - np.sin(s + pi / 4) / (pi * p)
        + np.sin(phase) * np.sin(s + pi / 4) / (pi * p)
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gamma2 = kernel.gamma_sq_asym(win, p)
    terms = {
        "a": a,
        "b": b,
        "gamma2": gamma2,
        "b2": b**2,
        "a2": a**2,
        "ab2": a * b**2,
        "b4": b**4,
        "a_gamma2": a * gamma2,
        "b2_gamma2": b**2 * gamma2,
        "gamma4": gamma2**2,
    }
    if np.ndim(psi) == 0:
        return {key: float(value) for key, value in terms.items()}
    return terms


def _variance_integrand(win, series_from=None):
    scale = win.alpha * win.m

    def integrand(psi):
        theta = psi / scale
        k = np.empty_like(psi)
        tail = psi >= series_from if series_from is not None else np.zeros(psi.shape, dtype=bool)
        k[~tail] = k_values(win, theta[~tail], ORACLE)
        k[tail] = k_values(win, theta[tail], SERIES)
        return (k - 0.25) * np.sin(theta)

    return integrand


def _leading(win):
    return math.log(win.n) / 32.0


def _use_hemisphere(win, hemisphere):
    if hemisphere is None:
        return win.is_single
    if not hemisphere and win.is_single:
        raise DomainError("full-sphere integration needs a window with mixed parities")
    return bool(hemisphere)


def _sphere_range(win, hemisphere):
    """Upper ψ limit and the prefactor 16π²D/(mα) or 8π²D/(mα)."""
    scale = win.alpha * win.m
    if hemisphere:
        return win.psi_max, 16.0 * math.pi**2 * win.D / scale
    return 2.0 * win.psi_max, 8.0 * math.pi**2 * win.D / scale


def _abs_floor(edges):
    return ORACLE_NOISE * (len(edges) - 1)


def _series_start(win, lower, upper, budget, prefactor):
    """
    Smallest ψ from which the series may replace the oracle up to `upper`.

    The remainder estimate times the sin θ weight is summed backwards from
    `upper`; the series takes over where that tail fits in `budget`. Returns
    None when it never does.
    """
    count = max(64, math.ceil((upper - lower) / SERIES_GRID_STEP))
    grid = np.linspace(lower, upper, count + 1)
    theta = win.theta(grid)
    with np.errstate(invalid="ignore"):
        weight = series_remainder(scaled_entries(win, theta)) * np.abs(np.sin(theta))
    weight = np.nan_to_num(weight, nan=np.inf)
    tail = prefactor * (grid[1] - grid[0]) * np.cumsum(weight[::-1])[::-1]
    inside = np.flatnonzero(tail <= budget)
    if inside.size < 2:
        return None
    return float(grid[inside[0]])


def variance_integral(win, split_C=1.0, tol=1e-6, method=ORACLE, workers=1, epsilon=EPSILON_PSI,
                      hemisphere=None):
    """
    Nodal length variance as I1 + I2, split at ψ = split_C.

    I1 always uses the oracle K. With method="series" I2 switches from the
    oracle to the series at the ψ where the omitted orders, integrated out to
    the far end, fit in tol·log(n)/32; spot checks along the series range
    clear the report as reliable or flag it. The integral covers the whole
    sphere unless the window holds a single frequency, where K̃(θ) = K̃(π-θ)
    and [0, π/2] is doubled; pass hemisphere to force either.

    Panels are at most π/4 wide in ψ. The [0, ε] piece is estimated from the
    bounded integrand and counted in quad_error. Raises QuadratureError when
    the tolerance is not met.
    """
    if method not in K_METHODS:
        raise DomainError(f"unknown K method {method!r}")
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    if not epsilon < split_C < win.psi_max:
        raise DomainError(f"split_C must lie in ({epsilon}, {win.psi_max:.6g})")
    hemisphere = _use_hemisphere(win, hemisphere)
    started = time.perf_counter()
    upper, prefactor = _sphere_range(win, hemisphere)
    series_from = None
    if method == SERIES:
        series_from = _series_start(win, split_C, upper, tol * _leading(win), prefactor)
    integrand = _variance_integrand(win, series_from)
    breakpoints = (split_C,) if series_from is None else (split_C, series_from)
    edges = quadrature.panel_edges(epsilon, upper, PANEL_WIDTH, breakpoints=breakpoints)
    result = quadrature.integrate_panels(
        integrand, edges, rel_tol=tol, abs_tol=max(1e-2 * tol / prefactor, _abs_floor(edges)),
        workers=workers,
    )
    remainder = epsilon * float(integrand(np.array([epsilon]))[0])
    near, near_error = result.partial(epsilon, split_C)
    bulk, bulk_error = result.partial(split_C, upper)
    spot_check = None
    spot_ok = True
    if series_from is not None:
        checks = win.theta(np.geomspace(series_from, upper, SPOT_CHECKS))
        spot_check = float(np.max(np.abs(k_values(win, checks, SERIES) - k_values(win, checks, ORACLE))))
        spot_ok = spot_check <= SPOT_FACTOR * tol
        if not spot_ok:
            warnings.warn(
                f"series and oracle K differ by {spot_check:.3g} beyond psi={series_from:.4g}",
                SeriesRegimeWarning,
                stacklevel=2,
            )
    elif method == SERIES:
        logger.info("series remainder never fits tol=%.3g for n=%d; I2 uses the oracle", tol, win.n)
    report = VarianceReport(
        n=win.n,
        g=win.g,
        I1=prefactor * (near + remainder),
        I2=prefactor * bulk,
        total=prefactor * (near + remainder + bulk),
        leading=_leading(win),
        quad_error=prefactor * (near_error + bulk_error + abs(remainder)),
        wall_time=time.perf_counter() - started,
        split_C=float(split_C),
        tol=float(tol),
        method=method,
        panels=result.panels,
        hemisphere=hemisphere,
        series_from=series_from,
        spot_check=spot_check,
        spot_ok=spot_ok,
    )
    logger.info(
        "variance n=%d g=%.4g: total %.6g (I1 %.4g, I2 %.4g) vs log(n)/32 %.4g; %d panels, %.2fs",
        report.n, report.g, report.total, report.I1, report.I2, report.leading,
        report.panels, report.wall_time,
    )
    return report


def near_diagonal_integral(win, split_C=1.0, tol=1e-8, workers=1, epsilon=EPSILON_PSI):
    """∫_0^C (K - 1/4) sin(ψ/(mα)) dψ with the oracle K, i.e. I1 without its prefactor."""
    integrand = _variance_integrand(win)
    edges = quadrature.panel_edges(epsilon, split_C, PANEL_WIDTH)
    result = quadrature.integrate_panels(integrand, edges, rel_tol=tol, abs_tol=_abs_floor(edges),
                                         workers=workers)
    return result.value + epsilon * float(integrand(np.array([epsilon]))[0])


def second_moment(win, tol=1e-8, hemisphere=None, workers=1, epsilon=EPSILON_PSI):
    """
    E[L²] = 8π² ∫_0^π K̃(θ) sin θ dθ from the oracle K.

    Like variance_integral this covers the whole sphere for band windows and
    doubles [0, π/2] for a single frequency, unless hemisphere says otherwise.
    """
    hemisphere = _use_hemisphere(win, hemisphere)
    scale = win.alpha * win.m

    def integrand(psi):
        theta = psi / scale
        return k_values(win, theta, ORACLE) * np.sin(theta)

    upper, prefactor = _sphere_range(win, hemisphere)
    edges = quadrature.panel_edges(epsilon, upper, PANEL_WIDTH)
    result = quadrature.integrate_panels(integrand, edges, rel_tol=tol, abs_tol=_abs_floor(edges),
                                         workers=workers)
    remainder = epsilon * float(integrand(np.array([epsilon]))[0])
    value = prefactor * (result.value + remainder)
    logger.info("second moment n=%d g=%.4g: %.10g (%d panels)", win.n, win.g, value, result.panels)
    return value
