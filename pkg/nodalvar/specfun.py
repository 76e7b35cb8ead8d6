"""
Special functions behind the kernel and chaos computations.

Legendre and Jacobi polynomials are evaluated by their three-term recurrences
(vectorised over the argument), Bessel J0/J1 come from scipy.special and the
probabilists' Hermite polynomials from numpy.polynomial.hermite_e. The Hilb
and Szegő main terms are kept as separate evaluators so their residuals can be
measured against the recurrences.

Scalar arguments give Python floats back, array arguments give arrays:

    >>> legendre_p(1, 0.5)
    0.5
    >>> legendre_d(2, 0.0, order=2)
    3.0
    >>> round(jacobi_p(4, 1, 0, 1.0), 12)
    5.0
    >>> hermite_h(4, 1.0)
    -2.0
    >>> bessel_j(0, 0.0)
    1.0
"""
import logging
import math
import numbers

import numpy as np
from numpy.polynomial import hermite_e
from scipy import special

from nodalvar.errors import DomainError

logger = logging.getLogger(__name__)

# absorbs round-off of cos() when angles are converted to arguments
ENDPOINT_TOL = 1e-12


def _check_degree(degree, name="degree"):
    if isinstance(degree, bool) or not isinstance(degree, numbers.Integral) or degree < 0:
        raise DomainError(f"{name} must be a non-negative integer, got {degree!r}")
    return int(degree)


def _as_argument(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > 1.0 + ENDPOINT_TOL):
        raise DomainError(f"argument outside [-1, 1]: {x!r}")
    return np.clip(arr, -1.0, 1.0)


def _scalar_or_array(value, like):
    if np.ndim(like) == 0:
        return float(value)
    return value


def legendre_iter(lmax, x, derivatives=0):
    """
    Walk the Legendre recurrence up to degree lmax.

    Yields (ell, P_ell(x), P'_ell(x), P''_ell(x)) for ell = 0..lmax. The
    derivative arrays are only advanced when requested through
    `derivatives` (0, 1 or 2); otherwise they stay at zero. Derivatives are
    taken with respect to x and follow

        P'_{l+1}  = P'_{l-1}  + (2l+1) P_l
        P''_{l+1} = P''_{l-1} + (2l+1) P'_l

    The yielded arrays are never modified afterwards, so callers may keep
    references to them.
    """
    x = np.asarray(x, dtype=float)
    zeros = np.zeros_like(x)
    p_prev, p = zeros, np.ones_like(x)
    dp_prev, dp = zeros, zeros
    d2p_prev, d2p = zeros, zeros
    for ell in range(lmax + 1):
        yield ell, p, dp, d2p
        if ell == lmax:
            break
        p_next = ((2 * ell + 1) * x * p - ell * p_prev) / (ell + 1)
        dp_next = dp_prev + (2 * ell + 1) * p if derivatives >= 1 else dp
        d2p_next = d2p_prev + (2 * ell + 1) * dp if derivatives >= 2 else d2p
        p_prev, p = p, p_next
        dp_prev, dp = dp, dp_next
        d2p_prev, d2p = d2p, d2p_next


def legendre_p(ell, x):
    """Legendre polynomial P_ell(x) by the three-term recurrence."""
    ell = _check_degree(ell)
    arg = _as_argument(x)
    for _, p, _, _ in legendre_iter(ell, arg):
        pass
    return _scalar_or_array(p, x)


def legendre_d(ell, x, order=1):
    """First or second derivative of P_ell with respect to x (not θ)."""
    ell = _check_degree(ell)
    if order not in (1, 2):
        raise DomainError(f"order must be 1 or 2, got {order!r}")
    if ell < order:
        raise DomainError(f"degree {ell} is below derivative order {order}")
    arg = _as_argument(x)
    for _, _, dp, d2p in legendre_iter(ell, arg, derivatives=order):
        pass
    return _scalar_or_array(dp if order == 1 else d2p, x)


def jacobi_array(n, alpha, beta, x):
    """
    Jacobi polynomial P_n^(alpha, beta) on an array, zero for n < 0.

    Used by the Christoffel–Darboux forms, where terms such as P_{L0-3}
    vanish for small windows. No domain checks are made here.
    """
    x = np.asarray(x, dtype=float)
    if n < 0:
        return np.zeros_like(x)
    a, b = float(alpha), float(beta)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev
    p = (a + 1.0) + (a + b + 2.0) * (x - 1.0) / 2.0
    for k in range(1, n):
        c = 2 * k + a + b
        a1 = 2.0 * (k + 1) * (k + a + b + 1) * c
        a2 = (c + 1) * (a * a - b * b)
        a3 = c * (c + 1) * (c + 2)
        a4 = 2.0 * (k + a) * (k + b) * (c + 2)
        p_prev, p = p, ((a2 + a3 * x) * p - a4 * p_prev) / a1
    return p


def jacobi_p(n, alpha, beta, x):
    """Jacobi polynomial P_n^(alpha, beta)(x) by the three-term recurrence."""
    n = _check_degree(n)
    if alpha < 0 or beta < 0:
        raise DomainError(f"alpha and beta must be non-negative, got ({alpha}, {beta})")
    arg = _as_argument(x)
    return _scalar_or_array(jacobi_array(n, alpha, beta, arg), x)


def jacobi_asymptotic(n, alpha, beta, theta):
    """
    Szegő main term n^{-1/2} k(θ) cos(Nθ + γ) of P_n^(alpha, beta)(cos θ).

    k(θ) = π^{-1/2} sin(θ/2)^{-alpha-1/2} cos(θ/2)^{-beta-1/2},
    N = n + (alpha + beta + 1)/2 and γ = -(alpha + 1/2)π/2.
    """
    n = _check_degree(n)
    if n < 1:
        raise DomainError("the Szegő main term needs n >= 1")
    t = np.asarray(theta, dtype=float)
    if np.any(t <= 0.0) or np.any(t >= math.pi):
        raise DomainError(f"theta must lie in (0, pi), got {theta!r}")
    k = (np.sin(t / 2.0) ** (-alpha - 0.5) * np.cos(t / 2.0) ** (-beta - 0.5)) / math.sqrt(math.pi)
    big_n = n + (alpha + beta + 1.0) / 2.0
    gamma = -(alpha + 0.5) * math.pi / 2.0
    return _scalar_or_array(k * np.cos(big_n * t + gamma) / math.sqrt(n), theta)


def bessel_j(order, x):
    """Bessel function J0 or J1 of a non-negative argument."""
    arg = np.asarray(x, dtype=float)
    if np.any(arg < 0.0):
        raise DomainError(f"Bessel argument must be non-negative, got {x!r}")
    if order == 0:
        value = special.j0(arg)
    elif order == 1:
        value = special.j1(arg)
    else:
        raise DomainError(f"only orders 0 and 1 are supported, got {order!r}")
    return _scalar_or_array(value, x)


def hilb_approx(ell, theta):
    """Hilb main term (θ/sin θ)^{1/2} J0((ell + 1/2)θ) of P_ell(cos θ)."""
    ell = _check_degree(ell)
    if ell < 1:
        raise DomainError("the Hilb main term needs ell >= 1")
    t = np.asarray(theta, dtype=float)
    if np.any(t < 0.0) or np.any(t > math.pi / 2 + ENDPOINT_TOL):
        raise DomainError(f"theta must lie in (0, pi/2], got {theta!r}")
    # np.sinc(t/pi) = sin(t)/t, equal to 1 at t = 0
    ratio = 1.0 / np.sqrt(np.sinc(t / math.pi))
    return _scalar_or_array(ratio * special.j0((ell + 0.5) * t), theta)


def hermite_h(q, x):
    """Probabilists' Hermite polynomial He_q(x): He_2 = x² - 1, He_4 = x⁴ - 6x² + 3."""
    q = _check_degree(q, "order")
    coefficients = np.zeros(q + 1)
    coefficients[q] = 1.0
    value = hermite_e.hermeval(np.asarray(x, dtype=float), coefficients)
    return _scalar_or_array(value, x)
