"""Principal curvatures from local quadric fits."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .mesh import Mesh

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """Per-vertex principal curvatures (k1 >= k2) and unit tangent directions.

    Curvature is positive where the surface bends away from its normal, so a
    sphere with outward normals has k1 = k2 = 1/r. ``umbilic`` marks vertices
    whose directions carry no information: rank-deficient fits and points
    where ``k1 - k2`` is below the isotropy tolerance. ``flagged`` marks
    vertices with too few neighbours for a fit.
    """

    k1: np.ndarray
    k2: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    umbilic: np.ndarray
    flagged: np.ndarray


def tangent_frame(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """An orthonormal tangent pair for unit normal ``n``."""
    ref = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = ref - (ref @ n) * n
    u /= np.linalg.norm(u)
    return u, np.cross(n, u)


def two_ring(mesh: Mesh, i: int) -> np.ndarray:
    nb = mesh.vertex_neighbors
    ring1 = nb[i]
    if len(ring1) == 0:
        return ring1
    ring2 = np.unique(np.concatenate([ring1] + [nb[j] for j in ring1]))
    return ring2[ring2 != i]


def estimate_curvature(mesh: Mesh, min_neighbors: int = 5, isotropy_tol: float = 0.1) -> CurvatureField:
    """Fit ``h = a x^2 + b xy + c y^2 + d x + e y`` over each vertex's 2-ring.

    ``(x, y, h)`` are neighbour offsets in the vertex tangent frame. The
    shape operator is ``-[[2a, b], [b, 2c]]``; its eigenpairs give the
    principal curvatures and directions.
    """
    nv = mesh.n_vertices
    k1 = np.zeros(nv)
    k2 = np.zeros(nv)
    d1 = np.zeros((nv, 3))
    d2 = np.zeros((nv, 3))
    umbilic = np.zeros(nv, bool)
    flagged = np.zeros(nv, bool)
    verts, normals = mesh.vertices, mesh.normals
    for i in range(nv):
        n = normals[i]
        u, v = tangent_frame(n)
        ring = two_ring(mesh, i)
        if len(ring) < min_neighbors:
            flagged[i] = umbilic[i] = True
            d1[i], d2[i] = u, v
            continue
        off = verts[ring] - verts[i]
        x, y, h = off @ u, off @ v, off @ n
        A = np.stack([x * x, x * y, y * y, x, y], axis=1)
        coef, _, rank, _ = np.linalg.lstsq(A, h, rcond=None)
        if rank < 5:
            umbilic[i] = True
            d1[i], d2[i] = u, v
            continue
        a, b, c = coef[:3]
        shape = -np.array([[2 * a, b], [b, 2 * c]])
        w, vec = np.linalg.eigh(shape)
        k1[i], k2[i] = w[1], w[0]
        d1[i] = vec[0, 1] * u + vec[1, 1] * v
        d2[i] = vec[0, 0] * u + vec[1, 0] * v
        scale = max(abs(w[0]), abs(w[1]))
        if w[1] - w[0] <= isotropy_tol * scale or scale == 0:
            umbilic[i] = True
    if flagged.any():
        log.warning("%d vertices have fewer than %d 2-ring neighbours", int(flagged.sum()), min_neighbors)
    return CurvatureField(k1, k2, d1, d2, umbilic, flagged)
