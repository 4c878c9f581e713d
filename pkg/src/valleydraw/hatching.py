"""Tone-matching hatching along projected principal curvature directions."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry.camera import Camera
from .geometry.curvature import CurvatureField
from .geometry.mesh import Mesh
from .render import Fragments, rasterize
from .strokes import Stroke


@dataclass(frozen=True)
class HatchParams:
    spacing: float = 6.0
    levels: int = 1
    t1: float = 0.6
    t2: float = 0.3
    step: float = 1.0
    max_len: float = 400.0
    thickness: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.t2 < self.t1 < 1:
            raise ValueError("tone thresholds need 0 < t2 < t1 < 1")
        if self.spacing < 2:
            raise ValueError("spacing must be at least 2 px")
        if self.levels not in (1, 2):
            raise ValueError("levels must be 1 or 2")
        if self.step <= 0 or self.max_len <= 0:
            raise ValueError("step and max_len must be positive")

    @property
    def line_width(self) -> float:
        """Chosen so a single-hatched band averages to the middle of its tone band."""
        if self.thickness is not None:
            return self.thickness
        return self.spacing * (1.0 - 0.5 * (self.t1 + self.t2))


@dataclass(frozen=True, eq=False)
class DirectionField:
    orientation: np.ndarray  # radians in [0, pi)
    mask: np.ndarray
    flagged: np.ndarray


def project_direction_field(
    mesh: Mesh,
    camera: Camera,
    curvature: CurvatureField,
    depth: np.ndarray | None = None,
    use_d2: bool = False,
    fragments: Fragments | None = None,
    diffusion_steps: int = 10,
    min_projected: float = 0.05,
) -> DirectionField:
    """Image-plane orientation of the chosen principal direction at each covered pixel.

    Vertex directions are sign-aligned within each face before barycentric
    blending. Pixels whose direction is undefined (umbilic vertices, or a
    projected length below ``min_projected`` of the unprojected one) are
    flagged and filled by averaging doubled angles of valid neighbours.
    """
    frags = fragments if fragments is not None else rasterize(mesh, camera)
    mask = frags.face >= 0
    if depth is not None:
        mask &= np.isfinite(depth)
    h, w = mask.shape
    dirs = curvature.d2 if use_d2 else curvature.d1
    valid_v = ~curvature.umbilic

    ys, xs = np.nonzero(mask)
    face = frags.face[ys, xs]
    bary = frags.bary[ys, xs]
    tri = mesh.faces[face]
    d = dirs[tri]  # (n, 3, 3)
    ok = valid_v[tri]
    # use the first non-umbilic corner as the sign reference
    first = np.argmax(ok, axis=1)
    ref = d[np.arange(len(d)), first]
    sign = np.where(np.einsum("nkj,nj->nk", d, ref) < 0, -1.0, 1.0)
    wts = bary * ok
    blend = np.einsum("nk,nkj->nj", wts * sign, d)
    pos = np.einsum("nk,nkj->nj", bary, mesh.vertices[tri])

    r, u, f = camera.basis
    rel = pos - np.asarray(camera.center, float)
    X, Y, Z = rel @ r, -(rel @ u), rel @ f
    dX, dY, dZ = blend @ r, -(blend @ u), blend @ f
    fl = camera.focal
    px = fl * (dX * Z - X * dZ) / Z ** 2
    py = fl * (dY * Z - Y * dZ) / Z ** 2
    plen = np.hypot(px, py)
    ref_len = fl * np.linalg.norm(blend, axis=1) / Z
    good = (wts.sum(axis=1) > 0) & (plen > min_projected * np.maximum(ref_len, 1e-300)) & (ref_len > 0)

    theta = np.zeros((h, w))
    flagged = np.zeros((h, w), bool)
    theta[ys, xs] = np.mod(np.arctan2(py, px), np.pi)
    flagged[ys, xs] = ~good
    theta = _diffuse(theta, flagged, mask, diffusion_steps)
    return DirectionField(theta, mask, flagged)


def _diffuse(theta, flagged, mask, steps):
    c = np.where(mask & ~flagged, np.cos(2 * theta), 0.0)
    s = np.where(mask & ~flagged, np.sin(2 * theta), 0.0)
    known = (mask & ~flagged).astype(float)
    todo = mask & flagged
    k = np.ones((3, 3))
    for _ in range(steps):
        if not todo.any():
            break
        cnt = ndimage.convolve(known, k, mode="constant")
        cs = ndimage.convolve(c, k, mode="constant")
        ss = ndimage.convolve(s, k, mode="constant")
        fill = todo & (cnt > 0) & (np.hypot(cs, ss) > 1e-12)
        if not fill.any():
            break
        norm = np.hypot(cs[fill], ss[fill])
        c[fill] = cs[fill] / norm
        s[fill] = ss[fill] / norm
        known[fill] = 1.0
        todo &= ~fill
    out = np.where(mask, np.mod(0.5 * np.arctan2(s, c), np.pi), 0.0)
    out[todo] = 0.0
    return out


class _Occupancy:
    """Points of finished strokes bucketed into square cells."""

    def __init__(self, cell: float):
        self.cell = cell
        self.buckets: dict[tuple[int, int], list[tuple[float, float]]] = {}

    def add(self, pts):
        c = self.cell
        for x, y in pts:
            self.buckets.setdefault((int(math.floor(x / c)), int(math.floor(y / c))), []).append((x, y))

    def near(self, x: float, y: float, radius: float) -> bool:
        c = self.cell
        r2 = radius * radius
        reach = int(math.ceil(radius / c))
        cx, cy = int(math.floor(x / c)), int(math.floor(y / c))
        for i in range(cx - reach, cx + reach + 1):
            for j in range(cy - reach, cy + reach + 1):
                for qx, qy in self.buckets.get((i, j), ()):
                    if (qx - x) ** 2 + (qy - y) ** 2 < r2:
                        return True
        return False


class _Field:
    def __init__(self, theta: np.ndarray, region: np.ndarray):
        self.c = np.cos(2 * theta)
        self.s = np.sin(2 * theta)
        self.region = region
        self.h, self.w = region.shape

    def inside(self, x: float, y: float) -> bool:
        i, j = int(round(y)), int(round(x))
        return 0 <= i < self.h and 0 <= j < self.w and bool(self.region[i, j])

    def direction(self, x: float, y: float):
        x0 = min(max(int(math.floor(x)), 0), self.w - 2)
        y0 = min(max(int(math.floor(y)), 0), self.h - 2)
        fx = min(max(x - x0, 0.0), 1.0)
        fy = min(max(y - y0, 0.0), 1.0)
        c, s = self.c, self.s
        cc = ((1 - fx) * (1 - fy) * c[y0, x0] + fx * (1 - fy) * c[y0, x0 + 1]
              + (1 - fx) * fy * c[y0 + 1, x0] + fx * fy * c[y0 + 1, x0 + 1])
        sc = ((1 - fx) * (1 - fy) * s[y0, x0] + fx * (1 - fy) * s[y0, x0 + 1]
              + (1 - fx) * fy * s[y0 + 1, x0] + fx * fy * s[y0 + 1, x0 + 1])
        if cc * cc + sc * sc < 1e-12:
            return None
        a = 0.5 * math.atan2(sc, cc)
        return math.cos(a), math.sin(a)


def _trace(field: _Field, occ: _Occupancy, x, y, sign, p: HatchParams):
    pts = []
    d0 = field.direction(x, y)
    if d0 is None:
        return pts
    prev = (sign * d0[0], sign * d0[1])
    stop = 0.5 * p.spacing
    length = 0.0
    h = p.step
    while length + h <= p.max_len / 2:
        d = field.direction(x, y)
        if d is None:
            break
        if d[0] * prev[0] + d[1] * prev[1] < 0:
            d = (-d[0], -d[1])
        mx, my = x + 0.5 * h * d[0], y + 0.5 * h * d[1]
        dm = field.direction(mx, my)
        if dm is None:
            break
        if dm[0] * d[0] + dm[1] * d[1] < 0:
            dm = (-dm[0], -dm[1])
        nx, ny = x + h * dm[0], y + h * dm[1]
        if not field.inside(nx, ny) or occ.near(nx, ny, stop):
            break
        pts.append((nx, ny))
        prev = dm
        x, y = nx, ny
        length += h
    return pts


def _seeds(shape, spacing: float, rng: np.random.Generator) -> np.ndarray:
    h, w = shape
    gx = np.arange(-0.5, w - 0.5, spacing)
    gy = np.arange(-0.5, h - 0.5, spacing)
    X, Y = np.meshgrid(gx, gy)
    jit = rng.uniform(0.0, spacing, size=(2,) + X.shape)
    return np.column_stack([(X + jit[0]).ravel(), (Y + jit[1]).ravel()])


def generate_hatching(render: np.ndarray, orient, params: HatchParams = HatchParams(),
                      mask: np.ndarray | None = None) -> list[Stroke]:
    """Evenly spaced streamlines where the render is darker than the tone thresholds.

    ``orient`` is an orientation image in radians or a :class:`DirectionField`.
    Level 1 follows the field where ``I < t1``; level 2 runs perpendicular
    where ``I < t2``.
    """
    return [s for level in hatch_levels(render, orient, params, mask) for s in level]


def hatch_levels(render: np.ndarray, orient, params: HatchParams = HatchParams(),
                 mask: np.ndarray | None = None) -> list[list[Stroke]]:
    """Hatch strokes grouped by level (one list per level in ``params``).

    Each level starts streamlines from a jittered grid and, Jobard-Lefer
    style, from candidates one spacing to either side of every finished
    streamline. A seed is used only if no same-level stroke lies within
    ``seed_ratio * spacing``; tracing stops half a spacing from other strokes.
    """
    if isinstance(orient, DirectionField):
        mask = orient.mask if mask is None else mask & orient.mask
        orient = orient.orientation
    render = np.asarray(render, float)
    if mask is None:
        mask = np.ones(render.shape, bool)
    rng = np.random.default_rng(params.seed)
    tiers = [(params.t1, 0.0)]
    if params.levels == 2:
        tiers.append((params.t2, 0.5 * np.pi))
    out: list[list[Stroke]] = []
    for thresh, turn in tiers:
        level: list[Stroke] = []
        out.append(level)
        region = mask & (render < thresh)
        if not region.any():
            continue
        field = _Field(np.mod(orient + turn, np.pi), region)
        occ = _Occupancy(params.spacing / 2)
        seed_gap = _SEED_RATIO * params.spacing
        queue: deque = deque()
        for grid_seed in _seeds(render.shape, params.spacing, rng):
            queue.append(tuple(grid_seed))
            while queue:
                sx, sy = queue.popleft()
                if not field.inside(sx, sy) or occ.near(sx, sy, seed_gap):
                    continue
                back = _trace(field, occ, sx, sy, -1.0, params)
                fwd = _trace(field, occ, sx, sy, 1.0, params)
                pts = back[::-1] + [(sx, sy)] + fwd
                if len(pts) < 2:
                    continue
                occ.add(pts)
                arr = np.array(pts)
                level.append(Stroke(arr, params.line_width, "hatch"))
                queue.extend(_side_seeds(arr, params.spacing))
    return out


_SEED_RATIO = 0.95


def _side_seeds(pts: np.ndarray, spacing: float) -> list[tuple[float, float]]:
    """Candidates one spacing to the left and right, about every half spacing along the stroke."""
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    picks = np.searchsorted(arc, np.arange(0.0, arc[-1] + 1e-9, 0.5 * spacing))
    picks = np.clip(picks, 0, len(pts) - 1)
    out = []
    for k in picks:
        a, b = pts[max(k - 1, 0)], pts[min(k + 1, len(pts) - 1)]
        t = b - a
        n = np.hypot(t[0], t[1])
        if n == 0:
            continue
        nx, ny = -t[1] / n, t[0] / n
        x, y = pts[k]
        out.append((x + spacing * nx, y + spacing * ny))
        out.append((x - spacing * nx, y - spacing * ny))
    return out
