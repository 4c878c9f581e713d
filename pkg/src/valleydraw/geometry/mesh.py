"""Indexed triangle meshes and a small OBJ reader."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


class MeshError(ValueError):
    """Raised for malformed or degenerate mesh input."""


class ObjParseError(MeshError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class DegenerateFaceError(MeshError):
    def __init__(self, face_indices):
        self.face_indices = list(face_indices)
        super().__init__(f"degenerate (zero-area) faces: {self.face_indices[:20]}")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh with per-vertex unit normals.

    ``faces`` use counter-clockwise winding for the outward side. Arrays are
    read-only; derived connectivity is computed lazily and cached.
    """

    vertices: np.ndarray
    faces: np.ndarray
    normals: np.ndarray
    isolated: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "vertices", _frozen(self.vertices, np.float64).reshape(-1, 3))
        object.__setattr__(self, "faces", _frozen(self.faces, np.int64).reshape(-1, 3))
        object.__setattr__(self, "normals", _frozen(self.normals, np.float64).reshape(-1, 3))
        if self.isolated is None:
            object.__setattr__(self, "isolated", _frozen(np.zeros(len(self.vertices), bool), bool))
        else:
            object.__setattr__(self, "isolated", _frozen(self.isolated, bool))
        if len(self.normals) != len(self.vertices):
            raise MeshError("normals and vertices differ in length")
        if len(self.faces) and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise MeshError("face index out of range")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @cached_property
    def bbox_diagonal(self) -> float:
        lo, hi = self.bbox
        return float(np.linalg.norm(hi - lo))

    @cached_property
    def centroid(self) -> np.ndarray:
        lo, hi = self.bbox
        return 0.5 * (lo + hi)

    @cached_property
    def face_normals(self) -> np.ndarray:
        """Unit face normals (zero rows only for degenerate faces)."""
        cross = self._face_cross
        length = np.linalg.norm(cross, axis=1, keepdims=True)
        return np.divide(cross, length, out=np.zeros_like(cross), where=length > 0)

    @cached_property
    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._face_cross, axis=1)

    @cached_property
    def _face_cross(self) -> np.ndarray:
        v = self.vertices[self.faces]
        return np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted vertex pairs, shape (E, 2)."""
        return self._edge_data[0]

    @cached_property
    def edge_faces(self) -> list[list[int]]:
        """Incident face indices per edge (same order as ``edges``)."""
        return self._edge_data[1]

    @cached_property
    def face_edges(self) -> np.ndarray:
        """Edge index of each face side (v0v1, v1v2, v2v0), shape (F, 3)."""
        return self._edge_data[2]

    @cached_property
    def _edge_data(self):
        f = self.faces
        half = np.stack([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=1).reshape(-1, 2)
        key = np.sort(half, axis=1)
        edges, inverse = np.unique(key, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        face_of_half = np.repeat(np.arange(len(f)), 3)
        edge_faces: list[list[int]] = [[] for _ in range(len(edges))]
        for e, fi in zip(inverse.tolist(), face_of_half.tolist()):
            edge_faces[e].append(fi)
        return edges, edge_faces, inverse.reshape(-1, 3)

    @cached_property
    def edge_face_count(self) -> np.ndarray:
        return np.array([len(x) for x in self.edge_faces], dtype=np.int64)

    @cached_property
    def is_edge_manifold(self) -> bool:
        return bool(np.all(self.edge_face_count <= 2))

    @cached_property
    def vertex_neighbors(self) -> list[np.ndarray]:
        """Sorted one-ring vertex neighbours of each vertex."""
        nbrs: list[set[int]] = [set() for _ in range(self.n_vertices)]
        for a, b in self.edges.tolist():
            nbrs[a].add(b)
            nbrs[b].add(a)
        return [np.array(sorted(s), dtype=np.int64) for s in nbrs]

    def welded(self, tol: float = 1e-9) -> tuple["Mesh", np.ndarray]:
        """Merge vertices with coincident positions.

        Returns the welded mesh (normals recomputed) and the map from the
        original vertex index to the welded index. Used for topology queries
        on meshes whose vertices are split to carry crease normals.
        """
        q = np.round(self.vertices / max(tol * self.bbox_diagonal, 1e-300)).astype(np.int64)
        _, first, inverse = np.unique(q, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
        # keep first-occurrence order so welding an unsplit mesh is the identity
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        vmap = rank[inverse]
        verts = self.vertices[first[order]]
        faces = vmap[self.faces]
        m = Mesh(verts, faces, np.zeros_like(verts))
        return compute_normals(m), vmap

    def with_normals(self, normals, isolated=None) -> "Mesh":
        return Mesh(self.vertices, self.faces, normals, self.isolated if isolated is None else isolated)

    def transformed(self, scale: float = 1.0, offset=(0.0, 0.0, 0.0)) -> "Mesh":
        """Uniformly scaled and translated copy (normals unchanged)."""
        v = self.vertices * scale + np.asarray(offset, dtype=float)
        return Mesh(v, self.faces, self.normals, self.isolated)


def compute_normals(mesh: Mesh) -> Mesh:
    """Area-weighted vertex normals.

    Vertices with no incident face get +z and are flagged in ``isolated``.
    """
    n = np.zeros((mesh.n_vertices, 3))
    # un-normalised cross product is twice the area times the unit normal
    cross = mesh._face_cross
    for k in range(3):
        np.add.at(n, mesh.faces[:, k], cross)
    length = np.linalg.norm(n, axis=1)
    isolated = length == 0
    if isolated.any():
        log.warning("%d isolated vertices; normal set to +z", int(isolated.sum()))
    n[isolated] = (0.0, 0.0, 1.0)
    length[isolated] = 1.0
    n /= length[:, None]
    return mesh.with_normals(n, isolated)


def make_mesh(vertices, faces, normals=None) -> Mesh:
    """Validate raw arrays and build a :class:`Mesh`, computing normals if absent."""
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(vertices) == 0 or len(faces) == 0:
        raise MeshError("empty mesh")
    if faces.min() < 0 or faces.max() >= len(vertices):
        raise MeshError("face index out of range")
    v = vertices[faces]
    area2 = np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)
    scale = np.ptp(vertices, axis=0).max()
    bad = np.flatnonzero(area2 <= (1e-14 * scale * scale))
    if len(bad):
        raise DegenerateFaceError(bad)
    if normals is None:
        return compute_normals(Mesh(vertices, faces, np.zeros_like(vertices)))
    normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    length = np.linalg.norm(normals, axis=1, keepdims=True)
    if np.any(length == 0):
        raise MeshError("zero-length normal")
    return Mesh(vertices, faces, normals / length)


def load_mesh(path) -> Mesh:
    """Read the ``v``/``vn``/``f`` subset of Wavefront OBJ.

    Polygons are fan-triangulated. When every face corner references a
    normal, each distinct (position, normal) pair becomes a vertex, so
    creased models keep their face-constant shading; otherwise normals are
    recomputed. Other directives are ignored and counted.
    """
    path = Path(path)
    verts: list[tuple[float, float, float]] = []
    vnorms: list[tuple[float, float, float]] = []
    corners: list[tuple[tuple[int, int], ...]] = []
    ignored = 0
    with path.open("r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            kind = tok[0]
            try:
                if kind == "v":
                    if len(tok) < 4:
                        raise ValueError("vertex needs 3 coordinates")
                    verts.append((float(tok[1]), float(tok[2]), float(tok[3])))
                elif kind == "vn":
                    if len(tok) < 4:
                        raise ValueError("normal needs 3 components")
                    vnorms.append((float(tok[1]), float(tok[2]), float(tok[3])))
                elif kind == "f":
                    if len(tok) < 4:
                        raise ValueError("face needs at least 3 vertices")
                    poly = []
                    for t in tok[1:]:
                        parts = t.split("/")
                        vi = _resolve_index(int(parts[0]), len(verts))
                        if not 0 <= vi < len(verts):
                            raise ValueError(f"vertex index {parts[0]} out of range")
                        ni = -1
                        if len(parts) == 3 and parts[2]:
                            ni = _resolve_index(int(parts[2]), len(vnorms))
                            if not 0 <= ni < len(vnorms):
                                raise ValueError(f"normal index {parts[2]} out of range")
                        poly.append((vi, ni))
                    corners.append(tuple(poly))
                else:
                    ignored += 1
            except ValueError as exc:
                raise ObjParseError(lineno, str(exc)) from None
    if ignored:
        log.warning("%s: ignored %d unsupported OBJ directives", path, ignored)
    if not verts or not corners:
        raise MeshError(f"{path}: empty mesh")
    use_normals = all(ni >= 0 for poly in corners for _, ni in poly)
    if not use_normals:
        faces = [(p[0][0], p[k][0], p[k + 1][0]) for p in corners for k in range(1, len(p) - 1)]
        return make_mesh(np.array(verts), faces)
    per_vertex: dict[int, set[int]] = {}
    for poly in corners:
        for vi, ni in poly:
            per_vertex.setdefault(vi, set()).add(ni)
    if len(per_vertex) == len(verts) and all(len(v) == 1 for v in per_vertex.values()):
        faces = [(p[0][0], p[k][0], p[k + 1][0]) for p in corners for k in range(1, len(p) - 1)]
        normals = np.array([vnorms[next(iter(per_vertex[i]))] for i in range(len(verts))])
        return make_mesh(np.array(verts), faces, normals)
    # distinct (position, normal) pairs become vertices, in first-use order
    slot: dict[tuple[int, int], int] = {}
    faces = []
    for poly in corners:
        ids = [slot.setdefault(c, len(slot)) for c in poly]
        faces.extend((ids[0], ids[k], ids[k + 1]) for k in range(1, len(ids) - 1))
    keys = sorted(slot, key=slot.get)
    return make_mesh(
        np.array([verts[vi] for vi, _ in keys]),
        faces,
        np.array([vnorms[ni] for _, ni in keys]),
    )


def _resolve_index(i: int, count: int) -> int:
    if i > 0:
        return i - 1
    if i < 0:
        return count + i
    raise ValueError("OBJ indices are 1-based; got 0")


def save_obj(mesh: Mesh, path, with_normals: bool = True) -> None:
    with Path(path).open("w") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {x:.9g} {y:.9g} {z:.9g}\n")
        if with_normals:
            for x, y, z in mesh.normals:
                fh.write(f"vn {x:.9g} {y:.9g} {z:.9g}\n")
        for a, b, c in mesh.faces + 1:
            if with_normals:
                fh.write(f"f {a}//{a} {b}//{b} {c}//{c}\n")
            else:
                fh.write(f"f {a} {b} {c}\n")
