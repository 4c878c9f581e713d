"""Stroked drawings: thickness from shading, page composition, SVG and raster output.

A stroke's shape is the union of a disc of radius ``thickness / 2`` at each
point and a trapezoid joining consecutive discs' diameters. The SVG writer
and the rasterizer both use exactly this shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

DARK_ON_LIGHT = "dark-on-light"
LIGHT_ON_DARK = "light-on-dark"

# draw order on the page
TAG_ORDER = {"silhouette": 0, "contour": 0, "suggestive": 1, "crease": 2, "hatch": 3}


@dataclass
class Stroke:
    points: np.ndarray
    thickness: np.ndarray
    tag: str = "contour"

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        t = np.asarray(self.thickness, dtype=float)
        self.thickness = np.broadcast_to(t, (len(self.points),)).copy()
        if len(self.points) < 2:
            raise ValueError("a stroke needs at least 2 points")
        if not np.all(np.isfinite(self.thickness)) or np.any(self.thickness < 0):
            raise ValueError("stroke thickness must be finite and >= 0")


@dataclass
class DrawingDocument:
    width: int
    height: int
    strokes: list[Stroke] = field(default_factory=list)
    polarity: str = DARK_ON_LIGHT
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.polarity not in (DARK_ON_LIGHT, LIGHT_ON_DARK):
            raise ValueError(f"unknown polarity {self.polarity!r}")

    @property
    def ink(self) -> float:
        return 0.0 if self.polarity == DARK_ON_LIGHT else 1.0

    @property
    def paper(self) -> float:
        return 1.0 - self.ink


def _tangents(p: np.ndarray) -> np.ndarray:
    t = np.empty_like(p)
    t[1:-1] = p[2:] - p[:-2]
    t[0] = p[1] - p[0]
    t[-1] = p[-1] - p[-2]
    n = np.linalg.norm(t, axis=1, keepdims=True)
    return np.divide(t, n, out=np.zeros_like(t), where=n > 0)


def dark_band_width(render: np.ndarray, points: np.ndarray, normals: np.ndarray, tau: float,
                    reach: float, step: float = 0.25, snap: float = 1.0) -> np.ndarray:
    """Length of the run of ``I < tau`` under each point, measured along its normal.

    The render is sampled bilinearly (outside the image counts as light). The
    run containing the point is used, or failing that the nearest run starting
    within ``snap`` px, so strokes lying on an object's outline pick up the
    dark band just inside it. Run ends are located by linear interpolation
    of the threshold crossing; each side is cut off at ``reach + snap``.
    Points with no dark run nearby get 0.
    """
    half = reach + snap
    s = np.arange(-half, half + step / 2, step)
    n = len(points)
    q = points[:, None, :] + s[None, :, None] * normals[:, None, :]
    vals = ndimage.map_coordinates(render, [q[..., 1].ravel(), q[..., 0].ravel()], order=1,
                                   mode="constant", cval=1.0).reshape(n, len(s))
    dark = vals < tau
    mid = len(s) // 2
    width = np.zeros(n)
    near = np.abs(s) <= snap + 1e-9
    for i in range(n):
        cand = np.flatnonzero(dark[i] & near)
        if len(cand) == 0:
            continue
        k = cand[np.argmin(np.abs(cand - mid))]
        lo = k
        while lo > 0 and dark[i, lo - 1]:
            lo -= 1
        hi = k
        while hi < len(s) - 1 and dark[i, hi + 1]:
            hi += 1
        v = vals[i]
        a = s[lo] if lo == 0 else s[lo] - step * _frac(v[lo], v[lo - 1], tau)
        b = s[hi] if hi == len(s) - 1 else s[hi] + step * _frac(v[hi], v[hi + 1], tau)
        width[i] = b - a
    return width


def _frac(v_dark: float, v_light: float, tau: float) -> float:
    return float(np.clip((tau - v_dark) / max(v_light - v_dark, 1e-12), 0.0, 1.0))


def assign_thickness(
    polylines,
    render: np.ndarray,
    t_min: float = 0.75,
    t_max: float = 6.0,
    tau: float = 0.25,
    tags=None,
    multipliers: dict | None = None,
) -> list[Stroke]:
    """Per-point thickness from the width of the dark pool under the stroke.

    ``polylines`` is a sequence of (N, 2) arrays or objects with ``points``
    and ``tag`` attributes. The dark-band width across the stroke is clamped
    to ``[t_min, t_max]`` and scaled by the per-tag ``multipliers``.
    """
    multipliers = multipliers or {}
    out = []
    for i, pl in enumerate(polylines):
        pts = np.asarray(getattr(pl, "points", pl), dtype=float)
        tag = getattr(pl, "tag", None) or (tags[i] if tags is not None else "contour")
        if len(pts) < 2:
            continue
        tan = _tangents(pts)
        nrm = np.stack([-tan[:, 1], tan[:, 0]], axis=1)
        width = dark_band_width(render, pts, nrm, tau, reach=t_max)
        thick = np.clip(width, t_min, t_max)
        h, w = render.shape
        off = (pts[:, 0] < -0.5) | (pts[:, 0] > w - 0.5) | (pts[:, 1] < -0.5) | (pts[:, 1] > h - 0.5)
        thick[off] = t_min
        thick = np.minimum(thick * multipliers.get(tag, 1.0), t_max)
        out.append(Stroke(pts, thick, tag))
    return out


def _clip_segment(p0, p1, lo, hi):
    """Liang-Barsky; returns parameter interval (t0, t1) or None."""
    d = p1 - p0
    t0, t1 = 0.0, 1.0
    for k in range(2):
        for pk, qk in ((-d[k], p0[k] - lo[k]), (d[k], hi[k] - p0[k])):
            if pk == 0:
                if qk < 0:
                    return None
                continue
            r = qk / pk
            if pk < 0:
                t0 = max(t0, r)
            else:
                t1 = min(t1, r)
            if t0 > t1:
                return None
    return t0, t1


def clip_stroke(stroke: Stroke, width: int, height: int) -> list[Stroke]:
    """Pieces of ``stroke`` inside the page ``[-0.5, W-0.5] x [-0.5, H-0.5]``."""
    lo = np.array([-0.5, -0.5])
    hi = np.array([width - 0.5, height - 0.5])
    p, t = stroke.points, stroke.thickness
    inside = np.all((p >= lo) & (p <= hi), axis=1)
    if inside.all():
        return [stroke]
    pieces: list[Stroke] = []
    cur_p: list[np.ndarray] = []
    cur_t: list[float] = []

    def flush():
        if len(cur_p) >= 2:
            pieces.append(Stroke(np.array(cur_p), np.array(cur_t), stroke.tag))
        cur_p.clear()
        cur_t.clear()

    for i in range(len(p) - 1):
        iv = _clip_segment(p[i], p[i + 1], lo, hi)
        if iv is None:
            flush()
            continue
        a, b = iv
        pa = p[i] + a * (p[i + 1] - p[i])
        pb = p[i] + b * (p[i + 1] - p[i])
        ta = t[i] + a * (t[i + 1] - t[i])
        tb = t[i] + b * (t[i + 1] - t[i])
        if not cur_p or a > 0:
            flush()
            cur_p.append(pa)
            cur_t.append(ta)
        cur_p.append(pb)
        cur_t.append(tb)
        if b < 1:
            flush()
    flush()
    return pieces


def compose(*strokesets, width: int, height: int, polarity: str = DARK_ON_LIGHT,
            metadata: dict | None = None) -> DrawingDocument:
    """Clip strokes to the page and order them contours first, then suggestive, crease, hatch."""
    strokes = []
    for ss in strokesets:
        for s in ss:
            strokes.extend(clip_stroke(s, width, height))
    strokes.sort(key=lambda s: TAG_ORDER.get(s.tag, len(TAG_ORDER)))
    return DrawingDocument(width, height, strokes, polarity, dict(metadata or {}))


def invert_tone(doc: DrawingDocument) -> DrawingDocument:
    flipped = LIGHT_ON_DARK if doc.polarity == DARK_ON_LIGHT else DARK_ON_LIGHT
    return replace(doc, polarity=flipped, strokes=list(doc.strokes), metadata=dict(doc.metadata))


def _fmt(v: float) -> str:
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


def _stroke_path(stroke: Stroke) -> str:
    # SVG user space puts pixel (0, 0) at [0, 1] x [0, 1]
    p = stroke.points + 0.5
    r = stroke.thickness / 2.0
    parts = []
    for (x, y), rad in zip(p, r):
        if rad <= 0:
            continue
        a, b = _fmt(x + rad), _fmt(x - rad)
        ys, rs = _fmt(y), _fmt(rad)
        parts.append(f"M{a} {ys}A{rs} {rs} 0 1 1 {b} {ys}A{rs} {rs} 0 1 1 {a} {ys}Z")
    for i in range(len(p) - 1):
        quad = _segment_quad(p[i], p[i + 1], r[i], r[i + 1])
        if quad is None:
            continue
        parts.append("M" + "L".join(f"{_fmt(x)} {_fmt(y)}" for x, y in quad) + "Z")
    return "".join(parts)


def _segment_quad(p0, p1, r0, r1):
    d = p1 - p0
    length = math.hypot(d[0], d[1])
    if length == 0 or (r0 <= 0 and r1 <= 0):
        return None
    n = np.array([-d[1], d[0]]) / length
    quad = [p0 + r0 * n, p1 + r1 * n, p1 - r1 * n, p0 - r0 * n]
    # same winding as the arcs (positive shoelace area in y-down coordinates)
    area = sum(a[0] * b[1] - b[0] * a[1] for a, b in zip(quad, quad[1:] + quad[:1]))
    return quad if area >= 0 else quad[::-1]


def to_svg(doc: DrawingDocument) -> str:
    """SVG 1.1 text: one background rect and one filled path per stroke."""
    bg = "#ffffff" if doc.polarity == DARK_ON_LIGHT else "#000000"
    fg = "#000000" if doc.polarity == DARK_ON_LIGHT else "#ffffff"
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{doc.width}" '
        f'height="{doc.height}" viewBox="0 0 {doc.width} {doc.height}">',
        f'<rect x="0" y="0" width="{doc.width}" height="{doc.height}" fill="{bg}"/>',
    ]
    for s in doc.strokes:
        d = _stroke_path(s)
        if d:
            lines.append(f'<path class="{s.tag}" fill="{fg}" fill-rule="nonzero" d="{d}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def rasterize_drawing(doc: DrawingDocument, supersample: int = 1) -> np.ndarray:
    """Scan-convert strokes into an image with box-filtered supersampling."""
    if supersample not in (1, 2, 4):
        raise ValueError("supersample must be 1, 2 or 4")
    s = supersample
    ink = _ink_mask([(st.points, st.thickness) for st in doc.strokes], doc.width, doc.height, s)
    cover = ink.reshape(doc.height, s, doc.width, s).mean(axis=(1, 3)) if s > 1 else ink.astype(float)
    return doc.paper + (doc.ink - doc.paper) * cover


_BATCH = 1 << 21


def _ink_mask(strokes, width: int, height: int, s: int) -> np.ndarray:
    """Boolean ink at the ``s``-times supersampled grid."""
    hw, hh = width * s, height * s
    ink = np.zeros((hh, hw), bool)
    discs = []
    segs = []
    for pts, th in strokes:
        r = th / 2.0
        discs.append(np.column_stack([pts, r]))
        segs.append(np.column_stack([pts[:-1], pts[1:], r[:-1], r[1:]]))
    if not discs:
        return ink
    discs = np.concatenate(discs)
    segs = np.concatenate(segs)
    discs = discs[discs[:, 2] > 0]
    # segment primitives: p0, p1, r0, r1 ; discs as degenerate segments
    prims = np.concatenate([segs, np.column_stack([discs[:, :2], discs[:, :2], discs[:, 2], discs[:, 2]])])
    prims = prims[np.maximum(prims[:, 4], prims[:, 5]) > 0]
    if len(prims) == 0:
        return ink
    rmax = np.maximum(prims[:, 4], prims[:, 5])
    lo = np.minimum(prims[:, 0:2], prims[:, 2:4]) - rmax[:, None]
    hi = np.maximum(prims[:, 0:2], prims[:, 2:4]) + rmax[:, None]
    # low-res coordinate x maps to hi-res index X = s * (x + 0.5) - 0.5
    x0 = np.clip(np.ceil(s * (lo[:, 0] + 0.5) - 0.5), 0, hw)
    x1 = np.clip(np.floor(s * (hi[:, 0] + 0.5) - 0.5), -1, hw - 1)
    y0 = np.clip(np.ceil(s * (lo[:, 1] + 0.5) - 0.5), 0, hh)
    y1 = np.clip(np.floor(s * (hi[:, 1] + 0.5) - 0.5), -1, hh - 1)
    keep = (x1 >= x0) & (y1 >= y0)
    prims, x0, x1, y0, y1 = prims[keep], x0[keep], x1[keep], y0[keep], y1[keep]
    nx = (x1 - x0 + 1).astype(np.int64)
    ny = (y1 - y0 + 1).astype(np.int64)
    counts = nx * ny
    start = 0
    while start < len(prims):
        csum = np.cumsum(counts[start:])
        stop = start + max(1, int(np.searchsorted(csum, _BATCH, side="right")))
        sl = slice(start, stop)
        total = int(counts[sl].sum())
        owner = np.repeat(np.arange(stop - start), counts[sl])
        local = np.arange(total) - np.repeat(np.cumsum(counts[sl]) - counts[sl], counts[sl])
        X = x0[sl][owner] + local % nx[sl][owner]
        Y = y0[sl][owner] + local // nx[sl][owner]
        qx = (X + 0.5) / s - 0.5
        qy = (Y + 0.5) / s - 0.5
        pr = prims[sl][owner]
        inside = _inside(qx, qy, pr)
        ink[Y[inside].astype(np.int64), X[inside].astype(np.int64)] = True
        start = stop
    return ink


def _inside(qx, qy, pr):
    """Point inside a disc-ended tapered segment (trapezoid plus end discs)."""
    ax, ay, bx, by, r0, r1 = pr.T
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    ex, ey = qx - ax, qy - ay
    in0 = ex * ex + ey * ey <= r0 * r0
    fx, fy = qx - bx, qy - by
    in1 = fx * fx + fy * fy <= r1 * r1
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (ex * dx + ey * dy) / L2
        L = np.sqrt(L2)
        perp = np.abs(ex * dy - ey * dx) / L
    trap = (L2 > 0) & (u >= 0) & (u <= 1) & (perp <= r0 + u * (r1 - r0))
    return in0 | in1 | trap


def format_drawing(doc: DrawingDocument) -> str:
    """Line-oriented text: a header, then ``tag npoints x y thickness ...`` per stroke."""
    lines = [f"# drawing {doc.width} {doc.height} {doc.polarity}"]
    for s in doc.strokes:
        vals = np.column_stack([s.points, s.thickness]).ravel()
        lines.append(f"{s.tag} {len(s.points)} " + " ".join(_fmt(v) for v in vals))
    return "\n".join(lines) + "\n"


def parse_drawing(text: str) -> DrawingDocument:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if head[:2] != ["#", "drawing"]:
        raise ValueError("missing drawing header")
    doc = DrawingDocument(int(head[2]), int(head[3]), [], head[4])
    for ln in lines[1:]:
        if ln.startswith("#"):
            continue
        tok = ln.split()
        n = int(tok[1])
        vals = np.array([float(v) for v in tok[2:]]).reshape(n, 3)
        doc.strokes.append(Stroke(vals[:, :2], vals[:, 2], tok[0]))
    return doc


def write_drawing(doc: DrawingDocument, path) -> None:
    Path(path).write_text(format_drawing(doc))


def read_drawing(path) -> DrawingDocument:
    return parse_drawing(Path(path).read_text())
