"""Object-space line extraction: smooth occluding contours and polyhedral feature edges."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .camera import Camera
from .mesh import Mesh

log = logging.getLogger(__name__)

CONTOUR = "contour"
SILHOUETTE = "silhouette"
CREASE = "crease"


@dataclass
class ContourSet:
    """3D polylines with source tags.

    Closed loops repeat their first point at the end. ``visible`` is None
    until :func:`~valleydraw.geometry.visibility.clip_visible` has run, after
    which every polyline is uniformly visible or hidden and ``visible``
    holds one boolean per polyline.
    """

    polylines: list[np.ndarray] = field(default_factory=list)
    tags: list[str] = field(default_factory=list)
    closed: list[bool] = field(default_factory=list)
    labels: list[frozenset] = field(default_factory=list)
    visible: list[bool] | None = None
    stats: Counter = field(default_factory=Counter)

    def __post_init__(self):
        if not self.labels:
            self.labels = [frozenset([t]) for t in self.tags]
        if not self.closed:
            self.closed = [False] * len(self.polylines)

    def __len__(self) -> int:
        return len(self.polylines)

    def append(self, pts, tag: str, closed: bool = False, labels=None, visible=None) -> None:
        self.polylines.append(np.asarray(pts, dtype=float))
        self.tags.append(tag)
        self.closed.append(closed)
        self.labels.append(frozenset(labels) if labels else frozenset([tag]))
        if visible is not None:
            if self.visible is None:
                self.visible = [True] * (len(self.polylines) - 1)
            self.visible.append(bool(visible))

    def select(self, tag: str | None = None, visible_only: bool = False) -> "ContourSet":
        out = ContourSet(stats=Counter(self.stats))
        for i, pts in enumerate(self.polylines):
            if tag is not None and tag not in self.labels[i]:
                continue
            vis = True if self.visible is None else self.visible[i]
            if visible_only and not vis:
                continue
            out.append(pts, self.tags[i], self.closed[i], self.labels[i],
                       None if self.visible is None else vis)
        return out

    def extend(self, other: "ContourSet") -> "ContourSet":
        out = ContourSet(stats=self.stats + other.stats)
        for cs in (self, other):
            for i, pts in enumerate(cs.polylines):
                vis = None if cs.visible is None else cs.visible[i]
                out.append(pts, cs.tags[i], cs.closed[i], cs.labels[i], vis)
        if out.visible is not None and len(out.visible) < len(out.polylines):
            out.visible = None
        return out

    @property
    def points(self) -> np.ndarray:
        if not self.polylines:
            return np.zeros((0, 3))
        return np.concatenate(self.polylines)


def g_field(mesh: Mesh, camera: Camera) -> np.ndarray:
    """Per-vertex ``n . (c - p)``; positive on the side facing the camera."""
    return np.einsum("ij,ij->i", mesh.normals, camera.position - mesh.vertices)


def interpolated_g(mesh: Mesh, camera: Camera, face: int, bary) -> float:
    """g at a point given by barycentric coordinates with the normal renormalised."""
    bary = np.asarray(bary, dtype=float)
    idx = mesh.faces[face]
    p = bary @ mesh.vertices[idx]
    n = bary @ mesh.normals[idx]
    n = n / np.linalg.norm(n)
    return float(n @ (camera.position - p))


def edge_crossing(g_a: float, g_b: float) -> float:
    """Linear zero crossing of g along an edge, ``t = g_a / (g_a - g_b)``."""
    return g_a / (g_a - g_b)


def _edge_roots(mesh: Mesh, camera: Camera, a: np.ndarray, b: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Zero of g along each edge with the normal interpolated linearly.

    The un-normalised numerator ``((1-t) n_a + t n_b) . (c - p(t))`` is a
    quadratic in t with values g_a, g_b at the ends; its unique root in
    [0, 1] is solved in closed form. Normalisation does not move the root.
    """
    ga, gb = g[a], g[b]
    c = camera.position
    cross = (np.einsum("ij,ij->i", mesh.normals[a], c - mesh.vertices[b])
             + np.einsum("ij,ij->i", mesh.normals[b], c - mesh.vertices[a]))
    q2 = ga + gb - cross
    q1 = cross - 2 * ga
    q0 = ga
    t = edge_crossing(ga, gb)
    scale = np.maximum(np.abs(ga), np.abs(gb))
    quad = np.abs(q2) > 1e-12 * scale
    if quad.any():
        disc = np.maximum(q1[quad] ** 2 - 4 * q2[quad] * q0[quad], 0.0)
        sq = np.sqrt(disc)
        # stable pair of roots
        qq = -0.5 * (q1[quad] + np.copysign(sq, q1[quad]))
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = qq / q2[quad]
            r2 = np.where(qq != 0, q0[quad] / qq, np.nan)
        tl = t[quad]
        in1 = (r1 >= 0) & (r1 <= 1)
        in2 = (r2 >= 0) & (r2 <= 1)
        pick = np.where(in1 & in2, np.where(np.abs(r1 - tl) < np.abs(r2 - tl), r1, r2),
                        np.where(in1, r1, np.where(in2, r2, tl)))
        t = t.copy()
        t[quad] = pick
    return np.clip(t, 0.0, 1.0)


def extract_smooth_contours(mesh: Mesh, camera: Camera, g: np.ndarray | None = None) -> ContourSet:
    """Zero set of the interpolated-normal g field, chained into polylines.

    Zero values count as positive so every triangle has zero or two crossing
    edges; the three-crossing tie-break is kept for externally supplied g.
    """
    if g is None:
        g = g_field(mesh, camera)
    pos = g >= 0
    edges = mesh.edges
    crossing = pos[edges[:, 0]] != pos[edges[:, 1]]
    cset = ContourSet()
    if not crossing.any():
        return cset
    ce = np.flatnonzero(crossing)
    a, b = edges[ce, 0], edges[ce, 1]
    t = _edge_roots(mesh, camera, a, b, g)
    pts = (1 - t)[:, None] * mesh.vertices[a] + t[:, None] * mesh.vertices[b]
    node_of_edge = np.full(len(edges), -1, dtype=np.int64)
    node_of_edge[ce] = np.arange(len(ce))

    # one segment per face between its two crossing edges
    fe = node_of_edge[mesh.face_edges]
    counts = (fe >= 0).sum(axis=1)
    segs = []
    for f in np.flatnonzero(counts >= 2):
        nodes = fe[f][fe[f] >= 0]
        if len(nodes) == 3:
            d = [np.linalg.norm(pts[nodes[i]] - pts[nodes[j]]) for i, j in ((0, 1), (1, 2), (0, 2))]
            i, j = ((0, 1), (1, 2), (0, 2))[int(np.argmax(d))]
            nodes = nodes[[i, j]]
            cset.stats["dropped_crossings"] += 1
        segs.append((int(nodes[0]), int(nodes[1])))

    adj: dict[int, list[int]] = {}
    for s, (u, v) in enumerate(segs):
        adj.setdefault(u, []).append(s)
        adj.setdefault(v, []).append(s)
    bad_nodes = {n for n, ss in adj.items() if len(ss) > 2}
    used = np.zeros(len(segs), bool)
    for s, (u, v) in enumerate(segs):
        if u in bad_nodes or v in bad_nodes:
            used[s] = True
            cset.stats["nonmanifold_segments"] += 1
            cset.append(pts[[u, v]], CONTOUR)
    if bad_nodes:
        log.warning("%d contour segments touch non-manifold edges", cset.stats["nonmanifold_segments"])

    def walk(start_node: int, first_seg: int) -> list[int]:
        chain = [start_node]
        node, seg = start_node, first_seg
        while True:
            used[seg] = True
            u, v = segs[seg]
            node = v if u == node else u
            chain.append(node)
            nxt = [s for s in adj[node] if not used[s]]
            if not nxt or node in bad_nodes:
                return chain
            seg = nxt[0]

    # open chains start at degree-one nodes, in node order for determinism
    for n in sorted(adj):
        if len(adj[n]) == 1 and not used[adj[n][0]] and n not in bad_nodes:
            chain = walk(n, adj[n][0])
            cset.append(pts[chain], CONTOUR, closed=False)
    for s in range(len(segs)):
        if not used[s]:
            start = segs[s][0]
            chain = walk(start, s)
            cset.append(pts[chain], CONTOUR, closed=chain[0] == chain[-1])
    cset.stats["crossings"] = len(ce)
    return cset


def extract_feature_edges(mesh: Mesh, camera: Camera, crease_angle: float = 30.0,
                          smooth_silhouettes: bool = True) -> ContourSet:
    """Polyhedral silhouette, crease and boundary edges, one polyline per edge.

    Split vertices that share a position are welded first so that flat-shaded
    meshes keep their topology. An edge that is both a silhouette and a crease
    carries both labels; its primary tag is ``silhouette``.

    With ``smooth_silhouettes=False``, silhouette edges whose two faces share
    both vertex normals are skipped: there the interpolated-normal contour
    already describes the outline.
    """
    topo, _ = mesh.welded()
    fn = topo.face_normals
    v0 = topo.vertices[topo.faces[:, 0]]
    front = np.einsum("ij,ij->i", fn, camera.position - v0) > 0
    cos_crease = math.cos(math.radians(crease_angle))
    cset = ContourSet()
    for e, faces in enumerate(topo.edge_faces):
        labels = set()
        if len(faces) == 1:
            labels.add(SILHOUETTE)
            cset.stats["boundary_edges"] += 1
        elif len(faces) == 2:
            f1, f2 = faces
            if front[f1] != front[f2] and (smooth_silhouettes or _split_edge(mesh, topo, e, f1, f2)):
                labels.add(SILHOUETTE)
            if float(fn[f1] @ fn[f2]) < cos_crease:
                labels.add(CREASE)
        else:
            cset.stats["nonmanifold_edges"] += 1
            continue
        if labels:
            tag = SILHOUETTE if SILHOUETTE in labels else CREASE
            cset.append(topo.vertices[topo.edges[e]], tag, labels=labels)
    if cset.stats["nonmanifold_edges"]:
        log.warning("skipped %d non-manifold edges", cset.stats["nonmanifold_edges"])
    return cset


def _split_edge(mesh: Mesh, topo: Mesh, e: int, f1: int, f2: int) -> bool:
    """True when the faces meet along edge ``e`` through different original vertices."""
    for w in topo.edges[e]:
        a = mesh.faces[f1][topo.faces[f1] == w][0]
        b = mesh.faces[f2][topo.faces[f2] == w][0]
        if a != b and not np.array_equal(mesh.normals[a], mesh.normals[b]):
            return True
    return False


def contour_residuals(mesh: Mesh, camera: Camera, cset: ContourSet) -> np.ndarray:
    """|g| at each smooth-contour point, using the interpolated normal.

    Points are located on mesh edges, so the normal is blended from the two
    nearest vertices along the edge containing the point.
    """
    pts = cset.select(CONTOUR).points
    if len(pts) == 0:
        return np.zeros(0)
    edges = mesh.edges
    mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    tree = cKDTree(mid)
    _, cand = tree.query(pts, k=min(8, len(edges)))
    cand = np.atleast_2d(cand)
    out = np.empty(len(pts))
    for i, p in enumerate(pts):
        best = None
        for e in cand[i]:
            a, b = edges[e]
            pa, pb = mesh.vertices[a], mesh.vertices[b]
            d = pb - pa
            t = float(np.clip((p - pa) @ d / (d @ d), 0, 1))
            dist = np.linalg.norm(pa + t * d - p)
            if best is None or dist < best[0]:
                best = (dist, a, b, t)
        _, a, b, t = best
        n = (1 - t) * mesh.normals[a] + t * mesh.normals[b]
        n /= np.linalg.norm(n)
        out[i] = abs(n @ (camera.position - p))
    return out


def write_contours(cset: ContourSet, path) -> None:
    """Line-oriented polyline text: ``tag npoints x y z ...`` per record.

    Hidden polylines (after clipping) are written with a ``/hidden`` tag suffix.
    """
    Path(path).write_text(format_contours(cset))


def format_contours(cset: ContourSet) -> str:
    lines = []
    for i, pts in enumerate(cset.polylines):
        tag = "+".join(sorted(cset.labels[i], key=lambda s: s != cset.tags[i]))
        if cset.visible is not None and not cset.visible[i]:
            tag += "/hidden"
        coords = " ".join(f"{v:.6f}" for v in np.asarray(pts).ravel())
        lines.append(f"{tag} {len(pts)} {coords}")
    return "\n".join(lines) + ("\n" if lines else "")


def read_contours(path) -> ContourSet:
    cset = ContourSet()
    any_hidden = False
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        tag, n = tok[0], int(tok[1])
        vals = np.array([float(x) for x in tok[2:]])
        if len(vals) != 3 * n:
            raise ValueError(f"line {lineno}: expected {3 * n} coordinates, got {len(vals)}")
        hidden = tag.endswith("/hidden")
        any_hidden |= hidden
        labels = tag.removesuffix("/hidden").split("+")
        pts = vals.reshape(n, 3)
        closed = n > 2 and np.array_equal(pts[0], pts[-1])
        cset.append(pts, labels[0], closed, labels, visible=not hidden)
    if not any_hidden:
        cset.visible = None
    return cset


def project_contours(cset: ContourSet, camera: Camera, visible_only: bool = True) -> list[tuple[str, np.ndarray]]:
    """Image-plane ``(tag, (N, 2) points)`` pairs; points behind the camera are dropped."""
    src = cset.select(visible_only=visible_only) if visible_only else cset
    out = []
    for pts, tag in zip(src.polylines, src.tags):
        xy, _ = camera.project(pts)
        xy = xy[np.all(np.isfinite(xy), axis=1)]
        if len(xy) >= 2:
            out.append((tag, xy))
    return out
