"""
Band-limited covariance kernel Γ and its angular derivatives.

A BandWindow fixes the frequencies ℓ = L0..n of the field and every
normalization constant derived from them. Γ(θ) = C² Σ (2ℓ+1)/(4π) P_ℓ(cos θ)
and its θ-derivatives are available three ways: the direct Legendre sum
(gamma_exact), the Christoffel–Darboux two-term Jacobi form (gamma_cd) and the
large-ψ main terms (gamma_asym and friends), where ψ = θ(1-g)m is the
rescaled angle.
"""
import logging
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from nodalvar import specfun
from nodalvar.errors import AsymptoticRegimeWarning, DomainError, WindowError

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi

EXACT_SUM = "exact_sum"
CD_FORM = "cd_form"
ASYMPTOTIC = "asymptotic"

# asymptotic evaluators warn at or below this rescaled angle
ASYMPTOTIC_PSI_MIN = 1.0


@dataclass(frozen=True)
class BandWindow:
    """
    Frequency window [L0, n] of a band-limited field with its constants.

    Csq makes the field variance one, D is the variance of each gradient
    component and h = g/(1-g)·(1 + 1/(2n)) + 1/n is the phase constant of
    the asymptotic expansions.
    """

    n: int
    g: float
    L0: int
    m: float
    Csq: float
    D: float
    h: float

    @classmethod
    def single(cls, ell):
        """Window holding the single frequency ell (the classical harmonic)."""
        if isinstance(ell, bool) or int(ell) != ell or ell < 1:
            raise WindowError(f"single-frequency window needs an integer ell >= 1, got {ell!r}")
        ell = int(ell)
        return _build_window(ell, 0.0, ell)

    @property
    def alpha(self):
        return 1.0 - self.g

    @property
    def degrees(self):
        return range(self.L0, self.n + 1)

    @property
    def n_coefficients(self):
        return (self.n + 1) ** 2 - self.L0**2

    @property
    def is_single(self):
        return self.L0 == self.n

    @property
    def psi_max(self):
        return math.pi / 2.0 * self.alpha * self.m

    @property
    def mean_length(self):
        """Expected nodal length 2π√D."""
        return 2.0 * math.pi * math.sqrt(self.D)

    def weights(self):
        """Per-degree weights Csq·(2ℓ+1)/(4π) for ℓ = L0..n."""
        ell = np.arange(self.L0, self.n + 1, dtype=float)
        return self.Csq * (2.0 * ell + 1.0) / FOUR_PI

    def theta(self, psi):
        return np.asarray(psi, dtype=float) / (self.alpha * self.m)

    def psi(self, theta):
        return np.asarray(theta, dtype=float) * self.alpha * self.m

    def closed_form_csq(self):
        """4π / (n²(1-α²) + 2n + 1); exact only when αn is an integer."""
        n, alpha = self.n, self.alpha
        return FOUR_PI / (n * n * (1.0 - alpha * alpha) + 2 * n + 1)


def _build_window(n, g, L0):
    s0 = (n + 1) ** 2 - L0**2
    s1 = sum((2 * ell + 1) * ell * (ell + 1) for ell in range(L0, n + 1))
    if g > 0.0:
        h = g / (1.0 - g) * (1.0 + 1.0 / (2 * n)) + 1.0 / n
    else:
        h = 1.0 / n
    return BandWindow(
        n=n,
        g=float(g),
        L0=L0,
        m=n + 0.5,
        Csq=FOUR_PI / s0,
        D=float(Fraction(s1, 2 * s0)),
        h=h,
    )


def make_window(n, g):
    """
    Build the window [ceil((1-g)n), n].

    The normalization comes from the realized integer sums, never from the
    closed form, so the unit-variance identity is exact for any g.
    """
    if isinstance(n, bool) or int(n) != n or n < 4:
        raise WindowError(f"n must be an integer >= 4, got {n!r}")
    if not 0.0 < g < 1.0:
        raise WindowError(f"g must lie in (0, 1), got {g!r}")
    n = int(n)
    # rounding keeps (1 - 0.2)*10 = 8.000000000000002 from jumping to 9
    L0 = max(1, math.ceil(round((1.0 - g) * n, 9)))
    if L0 >= n:
        raise WindowError(f"window [{L0}, {n}] holds fewer than two frequencies (n={n}, g={g})")
    window = _build_window(n, g, L0)
    logger.debug("window n=%d g=%.6g: L0=%d D=%.6g", n, g, L0, window.D)
    return window


@dataclass(frozen=True)
class KernelValues:
    theta: float
    gamma: float
    dgamma: float
    ddgamma: float
    method: str


@dataclass(frozen=True)
class WindowSums:
    """Weighted Legendre sums Σ w_ℓ f_ℓ(cos θ) with w_ℓ = Csq(2ℓ+1)/(4π)."""

    value: np.ndarray  # Σ w P
    first: np.ndarray  # Σ w P'
    lam_value: np.ndarray  # Σ w ℓ(ℓ+1) P
    complement: np.ndarray  # Σ w (1 - P), free of cancellation near θ = 0
    second: np.ndarray | None  # Σ w P''


def window_sums(win, theta, second_derivative=False):
    """
    All the Legendre sums of a window at the angles theta, in one recurrence.

    The complement uses q_ℓ = 1 - P_ℓ(cos θ) with s = 1 - cos θ = 2 sin²(θ/2):

        q_{ℓ+1} = [(2ℓ+1)(s(1 - q_ℓ) + q_ℓ) - ℓ q_{ℓ-1}] / (ℓ+1)
    """
    theta = np.asarray(theta, dtype=float)
    x = np.cos(theta)
    s = 2.0 * np.sin(theta / 2.0) ** 2
    zeros = np.zeros_like(theta)
    value, first, lam_value, complement = zeros.copy(), zeros.copy(), zeros.copy(), zeros.copy()
    second = zeros.copy() if second_derivative else None
    q_prev, q = zeros, zeros
    derivatives = 2 if second_derivative else 1
    for ell, p, dp, d2p in specfun.legendre_iter(win.n, x, derivatives=derivatives):
        if ell >= win.L0:
            w = win.Csq * (2 * ell + 1) / FOUR_PI
            value += w * p
            first += w * dp
            lam_value += w * ell * (ell + 1) * p
            complement += w * q
            if second_derivative:
                second += w * d2p
        q_prev, q = q, ((2 * ell + 1) * (s * (1.0 - q) + q) - ell * q_prev) / (ell + 1)
    return WindowSums(value, first, lam_value, complement, second)


def _check_theta(theta):
    t = np.asarray(theta, dtype=float)
    if np.any(t < 0.0) or np.any(t >= math.pi):
        raise DomainError(f"theta must lie in [0, pi), got {theta!r}")
    return t


def _pack(theta, gamma, dgamma, ddgamma, method):
    if np.ndim(theta) == 0:
        return KernelValues(float(theta), float(gamma), float(dgamma), float(ddgamma), method)
    return KernelValues(theta, gamma, dgamma, ddgamma, method)


def gamma_exact(win, theta):
    """
    Γ, Γ' and Γ'' (θ-derivatives) by direct summation over the window.

    Γ'  = -sin θ · Σ w P'(cos θ)
    Γ'' = cos θ · Σ w P'(cos θ) - Σ w ℓ(ℓ+1) P(cos θ)

    The second form follows from the Legendre equation and equals
    Σ w [P'' sin²θ - P' cos θ] without dividing by sin²θ.
    """
    t = _check_theta(theta)
    sums = window_sums(win, t)
    dgamma = -np.sin(t) * sums.first
    ddgamma = np.cos(t) * sums.first - sums.lam_value
    return _pack(theta, sums.value, dgamma, ddgamma, EXACT_SUM)


def gamma_cd(win, theta):
    """
    Γ and its θ-derivatives from the Christoffel–Darboux two-term form.

    Γ = Csq/(4π) [(n+1) P_n^(1,0) - L0 P_{L0-1}^(1,0)], the x-derivatives
    following from d/dx P_k^(a,b) = (a+b+k+1)/2 · P_{k-1}^(a+1,b+1); the
    chain rule then gives Γ' = -sin θ·F' and Γ'' = sin²θ·F'' - cos θ·F'.
    """
    t = _check_theta(theta)
    x = np.cos(t)
    n, L0, c = win.n, win.L0, win.Csq
    jac = specfun.jacobi_array
    f0 = c / FOUR_PI * ((n + 1) * jac(n, 1, 0, x) - L0 * jac(L0 - 1, 1, 0, x))
    f1 = c / (2 * FOUR_PI) * (
        (n + 1) * (n + 2) * jac(n - 1, 2, 1, x) - L0 * (L0 + 1) * jac(L0 - 2, 2, 1, x)
    )
    f2 = c / (4 * FOUR_PI) * (
        (n + 1) * (n + 2) * (n + 3) * jac(n - 2, 3, 2, x)
        - L0 * (L0 + 1) * (L0 + 2) * jac(L0 - 3, 3, 2, x)
    )
    sin_t = np.sin(t)
    dgamma = -sin_t * f1
    ddgamma = sin_t**2 * f2 - x * f1
    return _pack(theta, f0, dgamma, ddgamma, CD_FORM)


def one_minus_gamma_sq(win, theta):
    """1 - Γ(θ)², accurate down to θ → 0 through the compensated complement."""
    t = _check_theta(theta)
    u = window_sums(win, t).complement
    value = u * (2.0 - u)
    return float(value) if np.ndim(theta) == 0 else value


def rescaled_phases(win, psi):
    """
    Exact phases A = (n+1)ψ/((1-g)m), B = nψ/m and S = (A+B)/2.

    A ≈ hψ + ψ - ψ/(2n) and B ≈ ψ - ψ/(2n); the expansions carry these
    phases instead of their truncated series in 1/n.
    """
    psi = np.asarray(psi, dtype=float)
    a = (win.n + 1) * psi / (win.alpha * win.m)
    b = win.n * psi / win.m
    return a, b, (a + b) / 2.0


def check_rescaled(win, psi, lower=ASYMPTOTIC_PSI_MIN):
    """Validate ψ for an asymptotic evaluator; warns inside the small-ψ regime."""
    if win.g <= 0.0:
        raise DomainError("asymptotic expansions need a window with g > 0")
    p = np.asarray(psi, dtype=float)
    if np.any(p <= 0.0) or np.any(p > win.psi_max):
        raise DomainError(f"psi must lie in (0, {win.psi_max:.6g}], got {psi!r}")
    if np.any(p <= lower):
        warnings.warn(
            f"asymptotic expansion evaluated at psi <= {lower:g}, outside its regime",
            AsymptoticRegimeWarning,
            stacklevel=3,
        )
    return p


def _out(value, like):
    return float(value) if np.ndim(like) == 0 else value


def gamma_asym(win, psi):
    """Main terms of Γ at the rescaled angle ψ."""
    p = check_rescaled(win, psi)
    _, b, s = rescaled_phases(win, p)
    value = np.sqrt(2.0 / (math.pi * p)) * (
        np.sin(s + math.pi / 4) + np.cos(b - 3 * math.pi / 4) / (2.0 * p)
    )
    return _out(value, psi)


def gamma_sq_asym(win, psi):
    """Main terms of Γ² at the rescaled angle ψ."""
    p = check_rescaled(win, psi)
    a, b, s = rescaled_phases(win, p)
    g, h = win.g, win.h
    value = 2.0 / (math.pi * p) * (
        0.5
        + 0.5 * np.sin(a + b)
        + g / (p * h) * np.sin(s + math.pi / 4) * np.cos(b - 3 * math.pi / 4)
    )
    return _out(value, psi)


def gamma_d1sq_asym(win, psi):
    """Main terms of (Γ')², Γ' being the θ-derivative."""
    p = check_rescaled(win, psi)
    a, b, s = rescaled_phases(win, p)
    g, h, n = win.g, win.h, win.n
    value = 2.0 * n * n / (math.pi * p) * (
        0.5
        - 0.5 * np.sin(a + b)
        + 3.0 * g / (p * h) * np.sin(s - math.pi / 4) * np.cos(b - 5 * math.pi / 4)
        - 3.0 * g * g / (4.0 * p * h) * np.sin(s - math.pi / 4) * np.cos(b - math.pi / 4)
    )
    return _out(value, psi)


def gamma_d2_asym(win, psi):
    """Main terms of Γ'', the second θ-derivative."""
    p = check_rescaled(win, psi)
    _, b, s = rescaled_phases(win, p)
    g, h, n = win.g, win.h, win.n
    value = np.sqrt(2.0 / (math.pi * p)) * n * n * (h / g) * (
        -np.sin(s + math.pi / 4)
        + 5.0 * g / (2.0 * h * p) * np.cos(b - 7 * math.pi / 4)
        - np.sin(s - math.pi / 4) / p
    )
    return _out(value, psi)
