"""
Icosahedral geodesic meshes of the unit sphere and zero-level extraction.

Level L has 10·4^L + 2 vertices. Nodal lines are extracted by marching
triangles: in every triangle whose vertices change sign the zero set is
approximated by one segment whose end points are linear interpolations along
the two crossing edges, pushed back onto the sphere.
"""
import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, SphericalVoronoi

from nodalvar.errors import DomainError, MeshResolutionError

logger = logging.getLogger(__name__)

MAX_LEVEL = 8
POINTS_PER_WAVELENGTH = 8
ZERO_NUDGE = 1e-14


@dataclass(frozen=True)
class GeodesicMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    level: int

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @functools.cached_property
    def edges(self):
        t = self.triangles
        pairs = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(pairs, axis=1), axis=0)

    @functools.cached_property
    def max_edge(self):
        """Longest edge as a great-circle arc."""
        e = self.edges
        chord = np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)
        return float(np.max(_arc(chord)))

    def vertex_areas(self):
        """Spherical Voronoi cell areas of the vertices; they sum to 4π."""
        voronoi = SphericalVoronoi(self.vertices, radius=1.0)
        return voronoi.calculate_areas()

    def rotated(self, rotation):
        r = np.asarray(rotation, dtype=float)
        if r.shape != (3, 3) or not np.allclose(r @ r.T, np.eye(3), atol=1e-12):
            raise DomainError("rotation must be an orthogonal 3x3 matrix")
        vertices = self.vertices @ r.T
        vertices /= np.linalg.norm(vertices, axis=1)[:, None]
        return GeodesicMesh(vertices, self.triangles, self.level)


def _arc(chord):
    return 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))


def _icosahedron():
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    vertices = []
    for s1 in (-1.0, 1.0):
        for s2 in (-1.0, 1.0):
            vertices += [(0.0, s1, s2 * phi), (s1, s2 * phi, 0.0), (s2 * phi, 0.0, s1)]
    vertices = np.array(vertices)
    vertices /= np.linalg.norm(vertices, axis=1)[:, None]
    triangles = ConvexHull(vertices).simplices
    return vertices, _orient(vertices, triangles)


def _orient(vertices, triangles):
    """Order every triangle counter-clockwise seen from outside the sphere."""
    a, b, c = (vertices[triangles[:, k]] for k in range(3))
    outward = np.einsum("ij,ij->i", np.cross(b - a, c - a), a) > 0.0
    oriented = triangles.copy()
    oriented[~outward] = triangles[~outward][:, [0, 2, 1]]
    return oriented


def _subdivide(vertices, triangles):
    count = triangles.shape[0]
    pairs = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    unique, inverse = np.unique(np.sort(pairs, axis=1), axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    midpoints = vertices[unique[:, 0]] + vertices[unique[:, 1]]
    midpoints /= np.linalg.norm(midpoints, axis=1)[:, None]
    index = vertices.shape[0] + inverse
    m01, m12, m20 = index[:count], index[count:2 * count], index[2 * count:]
    a, b, c = triangles.T
    children = np.concatenate([
        np.stack([a, m01, m20], axis=1),
        np.stack([m01, b, m12], axis=1),
        np.stack([m20, m12, c], axis=1),
        np.stack([m01, m12, m20], axis=1),
    ])
    return np.concatenate([vertices, midpoints]), children


@functools.cache
def build_mesh(level):
    """Geodesic mesh at a subdivision level; cached, arrays are read-only."""
    if isinstance(level, bool) or int(level) != level or not 0 <= level <= MAX_LEVEL:
        raise DomainError(f"mesh level must be an integer in [0, {MAX_LEVEL}], got {level!r}")
    vertices, triangles = _icosahedron()
    for _ in range(int(level)):
        vertices, triangles = _subdivide(vertices, triangles)
    vertices.setflags(write=False)
    triangles.setflags(write=False)
    logger.debug("mesh level %d: %d vertices, %d triangles", level, len(vertices), len(triangles))
    return GeodesicMesh(vertices, triangles, int(level))


def required_edge(n, q=POINTS_PER_WAVELENGTH):
    return 2.0 * math.pi / (q * n)


def minimum_level(n, q=POINTS_PER_WAVELENGTH):
    """Smallest level whose longest edge resolves degree n with q points per wavelength."""
    target = required_edge(n, q)
    for level in range(MAX_LEVEL + 1):
        if build_mesh(level).max_edge <= target:
            return level
    raise MeshResolutionError(
        f"degree {n} needs edges below {target:.3g} rad, beyond mesh level {MAX_LEVEL}",
        minimum_level=None,
    )


def check_resolution(mesh, n, q=POINTS_PER_WAVELENGTH):
    if mesh.max_edge > required_edge(n, q):
        level = minimum_level(n, q)
        raise MeshResolutionError(
            f"mesh level {mesh.level} (max edge {mesh.max_edge:.3g} rad) under-resolves degree {n}; "
            f"use level {level} or more",
            minimum_level=level,
        )


def nodal_length(values, mesh):
    """Length of the zero set of the piecewise-linear interpolant of `values`."""
    v = np.asarray(values, dtype=float)
    if v.shape != (mesh.n_vertices,):
        raise DomainError(f"expected {mesh.n_vertices} vertex values, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DomainError("vertex values must be finite")
    v = np.where(v == 0.0, ZERO_NUDGE, v)
    f = v[mesh.triangles]
    positive = f > 0.0
    count = positive.sum(axis=1)
    crossing = (count == 1) | (count == 2)
    tri = mesh.triangles[crossing]
    f = f[crossing]
    positive = positive[crossing]
    # the odd vertex is the one whose sign differs from the other two
    odd = np.where(count[crossing] == 1, np.argmax(positive, axis=1), np.argmin(positive, axis=1))
    rows = np.arange(tri.shape[0])
    i, j, k = odd, (odd + 1) % 3, (odd + 2) % 3
    fi, fj, fk = f[rows, i], f[rows, j], f[rows, k]
    vi = mesh.vertices[tri[rows, i]]
    vj = mesh.vertices[tri[rows, j]]
    vk = mesh.vertices[tri[rows, k]]
    p = vi + (fi / (fi - fj))[:, None] * (vj - vi)
    q = vi + (fi / (fi - fk))[:, None] * (vk - vi)
    p /= np.linalg.norm(p, axis=1)[:, None]
    q /= np.linalg.norm(q, axis=1)[:, None]
    return float(np.sum(_arc(np.linalg.norm(p - q, axis=1))))
