"""Procedural test meshes."""

from __future__ import annotations

import numpy as np

from .mesh import Mesh, make_mesh


def icosphere(subdivisions: int = 4, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> Mesh:
    """Subdivided icosahedron; ``10 * 4**s + 2`` vertices, ``20 * 4**s`` faces.

    Normals are the analytic sphere normals.
    """
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    unit = np.array(verts)
    return make_mesh(unit * radius + np.asarray(center, float), faces, unit)


def torus(
    major: float = 1.0,
    minor: float = 0.4,
    n_major: int = 96,
    n_minor: int = 48,
    center=(0.0, 0.0, 0.0),
) -> Mesh:
    """Torus around the z axis with analytic normals."""
    u = np.arange(n_major) * (2 * np.pi / n_major)
    v = np.arange(n_minor) * (2 * np.pi / n_minor)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ring = major + minor * np.cos(vv)
    pts = np.stack([ring * np.cos(uu), ring * np.sin(uu), minor * np.sin(vv)], axis=-1)
    nrm = np.stack([np.cos(vv) * np.cos(uu), np.cos(vv) * np.sin(uu), np.sin(vv)], axis=-1)
    faces = _grid_faces(n_major, n_minor, wrap_i=True, wrap_j=True)
    return make_mesh(pts.reshape(-1, 3) + np.asarray(center, float), faces, nrm.reshape(-1, 3))


def cylinder(
    radius: float = 1.0,
    height: float = 2.0,
    n_around: int = 96,
    n_along: int = 32,
    center=(0.0, 0.0, 0.0),
) -> Mesh:
    """Open tube around the z axis (no caps), analytic outward normals."""
    u = np.arange(n_around) * (2 * np.pi / n_around)
    z = np.linspace(-height / 2, height / 2, n_along + 1)
    uu, zz = np.meshgrid(u, z, indexing="ij")
    pts = np.stack([radius * np.cos(uu), radius * np.sin(uu), zz], axis=-1)
    nrm = np.stack([np.cos(uu), np.sin(uu), np.zeros_like(uu)], axis=-1)
    faces = _grid_faces(n_around, n_along + 1, wrap_i=True, wrap_j=False)
    return make_mesh(pts.reshape(-1, 3) + np.asarray(center, float), faces, nrm.reshape(-1, 3))


def cube(size: float = 2.0, center=(0.0, 0.0, 0.0), split: bool = True) -> Mesh:
    """Axis-aligned cube, two triangles per side.

    With ``split`` each side has its own four vertices carrying the side's
    normal (flat shading, 24 vertices). Otherwise the 8 corners are shared
    and normals are area-weighted averages.
    """
    h = size / 2.0
    corners = np.array([[x, y, z] for x in (-h, h) for y in (-h, h) for z in (-h, h)])
    # quads listed counter-clockwise seen from outside
    quads = [
        ((1, 0, 0), (4, 6, 7, 5)),
        ((-1, 0, 0), (0, 1, 3, 2)),
        ((0, 1, 0), (2, 3, 7, 6)),
        ((0, -1, 0), (0, 4, 5, 1)),
        ((0, 0, 1), (1, 5, 7, 3)),
        ((0, 0, -1), (0, 2, 6, 4)),
    ]
    c = np.asarray(center, float)
    if not split:
        faces = []
        for _, (a, b, cc, d) in quads:
            faces += [(a, b, cc), (a, cc, d)]
        return make_mesh(corners + c, faces)
    verts, normals, faces = [], [], []
    for n, q in quads:
        base = len(verts)
        verts += [corners[i] for i in q]
        normals += [n] * 4
        faces += [(base, base + 1, base + 2), (base, base + 2, base + 3)]
    return make_mesh(np.array(verts) + c, faces, np.array(normals, float))


def square(size: float = 2.0, z: float = 0.0) -> Mesh:
    """Flat square in a plane of constant z, facing +z."""
    h = size / 2.0
    v = [(-h, -h, z), (h, -h, z), (h, h, z), (-h, h, z)]
    return make_mesh(v, [(0, 1, 2), (0, 2, 3)])


def plane_grid(size: float = 2.0, n: int = 16) -> Mesh:
    """Regular triangulated grid in the z = 0 plane, facing +z."""
    s = np.linspace(-size / 2, size / 2, n + 1)
    xx, yy = np.meshgrid(s, s, indexing="ij")
    pts = np.stack([xx, yy, np.zeros_like(xx)], axis=-1).reshape(-1, 3)
    return make_mesh(pts, _grid_faces(n + 1, n + 1, wrap_i=False, wrap_j=False))


def merge(*meshes: Mesh) -> Mesh:
    verts, norms, faces = [], [], []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        norms.append(m.normals)
        faces.append(m.faces + offset)
        offset += m.n_vertices
    return Mesh(np.concatenate(verts), np.concatenate(faces), np.concatenate(norms))


def _grid_faces(ni: int, nj: int, wrap_i: bool, wrap_j: bool) -> np.ndarray:
    """Two CCW triangles per cell of an (i, j) parameter grid.

    Winding is chosen so the face normal follows d/di x d/dj, which points
    outward for the surfaces built above.
    """
    iu = ni if wrap_i else ni - 1
    ju = nj if wrap_j else nj - 1
    i, j = np.meshgrid(np.arange(iu), np.arange(ju), indexing="ij")
    i, j = i.ravel(), j.ravel()
    i1 = (i + 1) % ni
    j1 = (j + 1) % nj
    a = i * nj + j
    b = i1 * nj + j
    c = i1 * nj + j1
    d = i * nj + j1
    return np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
