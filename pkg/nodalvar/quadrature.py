"""
Adaptive Gauss–Kronrod panel quadrature.

Long oscillatory integrals are cut into panels no wider than a fixed width,
each panel is integrated with the 7/15-point Gauss–Kronrod pair, and the
panels with the largest |K15 - G7| estimates are bisected until the summed
estimate meets the tolerance. The integrand is called on whole node arrays,
so vectorised integrands evaluate every panel in one go.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from nodalvar.errors import QuadratureError
from nodalvar.pool import chunked, ordered_map

logger = logging.getLogger(__name__)

# QUADPACK qk15 abscissae (descending, last one is the centre) and weights
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 13]] = _WG[0]
GAUSS_WEIGHTS[[3, 11]] = _WG[1]
GAUSS_WEIGHTS[[5, 9]] = _WG[2]
GAUSS_WEIGHTS[7] = _WG[3]

MAX_ROUNDS = 60
NODES_PER_CALL = 15 * 256


@dataclass(frozen=True)
class PanelIntegral:
    value: float
    error: float
    panels: int
    lower: np.ndarray
    upper: np.ndarray
    values: np.ndarray
    errors: np.ndarray

    def partial(self, a, b):
        """Sum over the panels lying inside [a, b] (a and b must be panel edges)."""
        mask = (self.lower >= a) & (self.upper <= b)
        return float(np.sum(self.values[mask])), float(np.sum(self.errors[mask]))


def panel_edges(a, b, max_width, breakpoints=()):
    """Edges of equal panels of width <= max_width, honouring breakpoints."""
    stops = [a] + sorted({p for p in breakpoints if a < p < b}) + [b]
    edges = [np.array([a])]
    for left, right in zip(stops[:-1], stops[1:]):
        count = max(1, math.ceil((right - left) / max_width))
        edges.append(np.linspace(left, right, count + 1)[1:])
    return np.concatenate(edges)


def _evaluate(func, lower, upper, workers):
    half = (upper - lower) / 2.0
    centre = (upper + lower) / 2.0
    nodes = (centre[:, None] + half[:, None] * NODES[None, :]).ravel()
    pieces = chunked(nodes, NODES_PER_CALL)
    samples = np.concatenate(ordered_map(func, pieces, workers)).reshape(-1, 15)
    kronrod = half * (samples @ KRONROD_WEIGHTS)
    gauss = half * (samples @ GAUSS_WEIGHTS)
    if not np.all(np.isfinite(kronrod)):
        raise QuadratureError("integrand returned non-finite values")
    return kronrod, np.abs(kronrod - gauss)


def integrate_panels(func, edges, rel_tol=1e-6, abs_tol=0.0, max_panels=200_000, workers=1):
    """
    Integrate func over the panels defined by `edges`.

    Converges when Σ|K15 - G7| <= max(rel_tol·|value|, abs_tol); raises
    QuadratureError with the partial result otherwise. Panel edges passed in
    stay edges, so sums over sub-ranges bounded by them are exact partials.
    """
    edges = np.asarray(edges, dtype=float)
    lower, upper = edges[:-1].copy(), edges[1:].copy()
    values, errors = _evaluate(func, lower, upper, workers)
    for round_number in range(MAX_ROUNDS):
        value = float(np.sum(values))
        error = float(np.sum(errors))
        target = max(rel_tol * abs(value), abs_tol)
        if error <= target:
            logger.debug("quadrature converged: %d panels, error %.3g after %d rounds",
                         lower.size, error, round_number)
            return PanelIntegral(value, error, lower.size, lower, upper, values, errors)
        if lower.size >= max_panels:
            break
        order = np.argsort(-errors, kind="stable")
        excess = np.cumsum(errors[order])
        count = int(np.searchsorted(excess, error - 0.5 * target)) + 1
        count = min(count, order.size, max_panels - lower.size)
        split = np.sort(order[:count])
        keep = np.ones(lower.size, dtype=bool)
        keep[split] = False
        middle = (lower[split] + upper[split]) / 2.0
        new_lower = np.concatenate([lower[split], middle])
        new_upper = np.concatenate([middle, upper[split]])
        new_values, new_errors = _evaluate(func, new_lower, new_upper, workers)
        lower = np.concatenate([lower[keep], new_lower])
        upper = np.concatenate([upper[keep], new_upper])
        values = np.concatenate([values[keep], new_values])
        errors = np.concatenate([errors[keep], new_errors])
        order = np.argsort(lower, kind="stable")
        lower, upper, values, errors = lower[order], upper[order], values[order], errors[order]
    value = float(np.sum(values))
    error = float(np.sum(errors))
    raise QuadratureError(
        f"quadrature did not converge: value {value:.6g}, error estimate {error:.3g}, "
        f"{lower.size} panels",
        value=value,
        error=error,
        panels=lower.size,
    )
