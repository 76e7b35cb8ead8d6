"""
Monte Carlo ground truth for the nodal length.

Fields are synthesised in the real spherical-harmonic basis,

    Y_ℓ0 = P̄_ℓ^0,  Y_ℓm = √2 P̄_ℓ^m cos(mφ),  Y_ℓ,-m = √2 P̄_ℓ^m sin(mφ),

with P̄ the fully normalised associated Legendre functions, so i.i.d.
N(0, Csq) coefficients give a field of unit variance whose covariance is Γ.
Coefficients of degree ℓ sit in the columns ℓ² - L0² + (m + ℓ).
"""
import csv
import logging
import math
import numbers
from dataclasses import dataclass, field

import numpy as np

from nodalvar import mesh as meshes
from nodalvar.errors import DomainError
from nodalvar.pool import chunked, ordered_map

logger = logging.getLogger(__name__)

UNIT_TOL = 1e-12
SAMPLE_CHUNK = 32
BOOTSTRAP_RESAMPLES = 200


@dataclass(frozen=True)
class FieldSample:
    window: object
    coeffs: np.ndarray
    seed: int


@dataclass(frozen=True)
class NodalStats:
    n_samples: int
    mean_length: float
    var_length: float
    stderr_mean: float
    stderr_var: float
    mesh_resolution: int
    discretization_note: str
    seed: int
    level: int
    seeds: tuple = field(repr=False, default=())
    lengths: np.ndarray = field(repr=False, compare=False, default=None)


def coefficient_index(win, ell, m):
    if not win.L0 <= ell <= win.n or abs(m) > ell:
        raise DomainError(f"(ell, m) = ({ell}, {m}) outside the window [{win.L0}, {win.n}]")
    return ell * ell - win.L0 * win.L0 + m + ell


def _check_points(points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DomainError(f"points must have shape (k, 3), got {pts.shape}")
    norms = np.linalg.norm(pts, axis=1)
    if not np.all(np.abs(norms - 1.0) <= UNIT_TOL):
        raise DomainError("points must be unit vectors to within 1e-12")
    return pts


def basis_matrix(win, points):
    """Real spherical harmonics of the window evaluated at unit points, shape (k, N)."""
    pts = _check_points(points)
    x = pts[:, 2]
    sin_t = np.hypot(pts[:, 0], pts[:, 1])
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    out = np.zeros((pts.shape[0], win.n_coefficients))
    root2 = math.sqrt(2.0)
    pmm = np.full(pts.shape[0], 1.0 / math.sqrt(4.0 * math.pi))
    for m in range(win.n + 1):
        if m > 0:
            pmm = pmm * math.sqrt((2 * m + 1) / (2 * m)) * sin_t
        cos_m = np.cos(m * phi)
        sin_m = np.sin(m * phi)
        p_prev, p = None, pmm
        for ell in range(m, win.n + 1):
            if ell == m + 1:
                p_prev, p = p, math.sqrt(2 * m + 3) * x * p
            elif ell > m + 1:
                a = math.sqrt((4 * ell * ell - 1) / (ell * ell - m * m))
                b = -math.sqrt(
                    (2 * ell + 1) * ((ell - 1) ** 2 - m * m) / ((2 * ell - 3) * (ell * ell - m * m))
                )
                p_prev, p = p, a * x * p + b * p_prev
            if ell < win.L0:
                continue
            base = ell * ell - win.L0 * win.L0 + ell
            if m == 0:
                out[:, base] = p
            else:
                out[:, base + m] = root2 * p * cos_m
                out[:, base - m] = root2 * p * sin_m
    return out


def _check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral) or not 0 <= seed < 2**64:
        raise DomainError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


def sample_field(win, seed):
    seed = _check_seed(seed)
    rng = np.random.default_rng(seed)
    coeffs = math.sqrt(win.Csq) * rng.standard_normal(win.n_coefficients)
    return FieldSample(win, coeffs, seed)


def evaluate_field(sample, points):
    return basis_matrix(sample.window, points) @ sample.coeffs


def sample_seeds(seed, n_samples):
    """Per-sample seeds derived from one master seed."""
    state = np.random.SeedSequence(_check_seed(seed)).generate_state(n_samples, dtype=np.uint64)
    return tuple(int(s) for s in state)


def bootstrap_var_stderr(values, seed, resamples=BOOTSTRAP_RESAMPLES):
    """Bootstrap standard error of the sample variance, seeded from `seed`."""
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    values = np.asarray(values, dtype=float)
    count = values.size
    variances = np.empty(resamples)
    for start in range(0, resamples, 100):
        stop = min(start + 100, resamples)
        picks = values[rng.integers(0, count, size=(stop - start, count))]
        variances[start:stop] = np.var(picks, axis=1, ddof=1)
    return float(np.std(variances, ddof=1))


def mc_nodal_stats(win, n_samples, level=None, seed=0, q=meshes.POINTS_PER_WAVELENGTH,
                   workers=1, raw_dump=None, progress=False, bootstrap=BOOTSTRAP_RESAMPLES,
                   rotation=None):
    """
    Nodal length statistics over n_samples seeded fields on one geodesic mesh.

    Sample i uses the i-th seed from sample_seeds(seed, n_samples), so results
    do not depend on the chunking or on the number of workers. A rotation
    matrix turns the mesh before the fields are evaluated on it.
    """
    if n_samples < 2:
        raise DomainError("at least two samples are needed for a variance")
    if level is None:
        level = meshes.minimum_level(win.n, q)
    grid = meshes.build_mesh(level)
    if rotation is not None:
        grid = grid.rotated(rotation)
    meshes.check_resolution(grid, win.n, q)
    basis = basis_matrix(win, grid.vertices)
    seeds = sample_seeds(seed, n_samples)

    def lengths_for(chunk):
        coeffs = np.stack([sample_field(win, s).coeffs for s in chunk])
        values = basis @ coeffs.T
        return [meshes.nodal_length(values[:, k], grid) for k in range(len(chunk))]

    parts = ordered_map(lengths_for, chunked(seeds, SAMPLE_CHUNK), workers,
                        progress="nodal samples" if progress else None)
    lengths = np.array([length for part in parts for length in part])
    if raw_dump is not None:
        with open(raw_dump, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerows(zip(seeds, (repr(float(x)) for x in lengths)))
    points_per_wavelength = 2.0 * math.pi / (win.n * grid.max_edge)
    stats = NodalStats(
        n_samples=int(n_samples),
        mean_length=float(np.mean(lengths)),
        var_length=float(np.var(lengths, ddof=1)),
        stderr_mean=float(np.std(lengths, ddof=1) / math.sqrt(n_samples)),
        stderr_var=bootstrap_var_stderr(lengths, seed, bootstrap),
        mesh_resolution=grid.n_vertices,
        discretization_note=(
            f"linear edge interpolation on a level {level} geodesic mesh, "
            f"max edge {grid.max_edge:.4g} rad ({points_per_wavelength:.1f} points per wavelength)"
        ),
        seed=int(seed),
        level=int(level),
        seeds=seeds,
        lengths=lengths,
    )
    logger.info(
        "nodal length n=%d g=%.4g over %d samples: mean %.6g ± %.2g, variance %.6g ± %.2g",
        win.n, win.g, n_samples, stats.mean_length, stats.stderr_mean,
        stats.var_length, stats.stderr_var,
    )
    return stats
