"""Image valleys: curves of local luminance minima.

One detector serves rendered images (yielding contours and suggestive
contours) and photographs (yielding traced drawings). Ridges are found by
running it on the complemented image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .raster_io import write_pgm

REC709 = (0.2126, 0.7152, 0.0722)

# (dx, dy) neighbour step for each quantised cross-valley direction
_STEPS = np.array([(1, 0), (1, 1), (0, 1), (-1, 1)])


class ValleyError(ValueError):
    pass


def luminance(image: np.ndarray) -> np.ndarray:
    """Rec. 709 luma of an 8-bit RGB (or gray) image, scaled to [0, 1]."""
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise ValleyError(f"expected 8-bit input, got {image.dtype}")
    if image.ndim == 2:
        return image.astype(np.float64) / 255.0
    if image.ndim != 3 or image.shape[2] not in (3, 4):
        raise ValleyError(f"expected (H, W, 3) RGB, got shape {image.shape}")
    rgb = image[..., :3].astype(np.float64) / 255.0
    return rgb @ np.array(REC709)


@dataclass
class ValleyMap:
    """Per-pixel valley response.

    ``orientation`` is the valley tangent angle in [0, pi) in image
    coordinates (x right, y down). ``offset`` holds the sub-pixel (dx, dy)
    from each mask pixel center to the valley bottom.
    """

    strength: np.ndarray
    orientation: np.ndarray
    mask: np.ndarray
    offset: np.ndarray
    smoothed: np.ndarray

    def points(self) -> np.ndarray:
        """Sub-pixel (x, y) valley points of all mask pixels, row-major order."""
        rows, cols = np.nonzero(self.mask)
        return np.stack([cols, rows], axis=1) + self.offset[rows, cols]

    def dump(self, prefix) -> list[str]:
        """Write ``prefix.strength.pgm``, ``prefix.orientation.pgm`` and ``prefix.mask.pgm``.

        Strength is scaled by its maximum and orientation by pi, both 16-bit.
        """
        peak = float(self.strength.max())
        planes = {
            "strength": (self.strength / peak if peak > 0 else self.strength, 16),
            "orientation": (self.orientation / np.pi, 16),
            "mask": (self.mask.astype(float), 8),
        }
        paths = []
        for name, (img, bits) in planes.items():
            path = f"{prefix}.{name}.pgm"
            write_pgm(path, img, bits)
            paths.append(path)
        return paths


def _kernels(sigma: float):
    radius = int(math.ceil(4 * sigma))
    j = np.arange(1, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (j / sigma) ** 2)
    norm = 1.0 + 2.0 * g.sum()
    g0 = 1.0 / norm
    g = g / norm
    d1 = j * g
    d1 = d1 / (2.0 * (j * d1).sum())  # responds with slope 1 to x
    d2 = (j * j / sigma ** 2 - 1.0) * g
    d2 = d2 / (j * j * d2).sum()  # responds with 2 to x^2 ...
    d2_0 = -2.0 * d2.sum()  # ... and 0 to constants
    return radius, g0, g, d1, d2_0, d2


def _filter1d(a: np.ndarray, axis: int, center: float, side: np.ndarray, odd: bool) -> np.ndarray:
    """Symmetric (or antisymmetric) correlation with half-sample reflection.

    Written as ``center*x[i] + sum_j side[j] * (x[i+j] +/- x[i-j])`` so that
    reversing the input reverses (or negates) the output bit for bit.
    """
    r = len(side)
    a = np.moveaxis(a, axis, -1)
    n = a.shape[-1]
    pad = np.pad(a, [(0, 0)] * (a.ndim - 1) + [(r, r)], mode="symmetric")
    out = center * a if center != 0 else np.zeros_like(a)
    for k in range(1, r + 1):
        plus = pad[..., r + k : r + k + n]
        minus = pad[..., r - k : r - k + n]
        out = out + side[k - 1] * ((plus - minus) if odd else (plus + minus))
    return np.moveaxis(out, -1, axis)


def hessian(img: np.ndarray, sigma: float):
    """Smoothed image, gradient and Hessian at scale ``sigma``.

    Returns ``(smooth, ix, iy, ixx, ixy, iyy)`` with x along columns and y
    along rows.
    """
    radius, g0, g, d1, d2_0, d2 = _kernels(sigma)
    if radius >= min(img.shape):
        raise ValleyError(f"sigma={sigma} needs a {2 * radius + 1}px kernel; image is {img.shape}")

    def smooth(a, ax):
        return _filter1d(a, ax, g0, g, odd=False)

    def deriv(a, ax):
        return _filter1d(a, ax, 0.0, d1, odd=True)

    def deriv2(a, ax):
        return _filter1d(a, ax, d2_0, d2, odd=False)

    sy = smooth(img, 0)
    sx = smooth(img, 1)
    smooth_img = 0.5 * (smooth(sy, 1) + smooth(sx, 0))
    ix = deriv(sy, 1)
    iy = deriv(sx, 0)
    ixx = deriv2(sy, 1)
    iyy = deriv2(sx, 0)
    # average both orders so the mixed term is exactly symmetric under transposition
    ixy = 0.5 * (deriv(deriv(img, 0), 1) + deriv(deriv(img, 1), 0))
    return smooth_img, ix, iy, ixx, ixy, iyy


def detect_valleys(
    img: np.ndarray,
    sigma: float = 0.75,
    tau: float = 0.25,
    min_strength: float = 0.002,
) -> ValleyMap:
    """Hessian valley detector with non-maximum suppression.

    Strength is the positive part of the larger Hessian eigenvalue, whose
    eigenvector points across the valley. Candidates need luminance below
    ``tau`` and strength above ``min_strength``; survivors of NMS along the
    quantised cross direction form the mask. Offsets come from the local
    quadratic model of the smoothed image along that direction, clipped to
    half a pixel.
    """
    if sigma < 0.5:
        raise ValleyError("sigma must be >= 0.5")
    if not 0 < tau <= 1:
        raise ValleyError("tau must be in (0, 1]")
    img = np.asarray(img, dtype=np.float64)
    smooth_img, ix, iy, ixx, ixy, iyy = hessian(img, sigma)
    half_tr = 0.5 * (ixx + iyy)
    half_diff = 0.5 * (ixx - iyy)
    root = np.sqrt(half_diff * half_diff + ixy * ixy)
    lam = half_tr + root
    strength = np.maximum(lam, 0.0)
    cross = 0.5 * np.arctan2(2.0 * ixy, ixx - iyy)
    orientation = np.mod(cross + 0.5 * np.pi, np.pi)

    h, w = img.shape
    # quantise the cross direction (an undirected angle) into 4 bins
    b = np.mod(np.rint(np.mod(cross, np.pi) / (np.pi / 4)).astype(np.int64), 4)
    padded = np.pad(strength, 1, mode="constant", constant_values=0.0)
    rows, cols = np.mgrid[0:h, 0:w]
    dx = _STEPS[b, 0]
    dy = _STEPS[b, 1]
    s_plus = padded[rows + 1 + dy, cols + 1 + dx]
    s_minus = padded[rows + 1 - dy, cols + 1 - dx]
    peak = (strength >= np.maximum(s_plus, s_minus)) & (strength > np.minimum(s_plus, s_minus))
    mask = peak & (strength > min_strength) & (img < tau)
    border = int(math.ceil(sigma))
    mask[:border] = mask[-border:] = False
    mask[:, :border] = mask[:, -border:] = False

    nx, ny = np.cos(cross), np.sin(cross)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -(ix * nx + iy * ny) / lam
    t = np.where(np.isfinite(t), t, 0.0)
    offset = np.stack([np.clip(t * nx, -0.5, 0.5), np.clip(t * ny, -0.5, 0.5)], axis=-1)
    offset[~mask] = 0.0
    return ValleyMap(strength, orientation, mask, offset, smooth_img)


def _angle_diff(a, b):
    """Difference of undirected angles, in [0, pi/2]."""
    d = np.mod(np.abs(a - b), np.pi)
    return np.minimum(d, np.pi - d)


def link_valleys(
    vmap: ValleyMap,
    min_length: float = 8.0,
    merge_radius: float = 2.0,
    max_turn: float = 45.0,
) -> list[np.ndarray]:
    """Chain mask pixels into sub-pixel polylines.

    Tracing starts from the strongest unvisited pixel and walks both ways,
    stepping to the 8-neighbour best aligned with the current tangent whose
    orientation differs by at most ``max_turn``. Chain ends closer than
    ``merge_radius`` with compatible directions are joined; chains shorter
    than ``min_length`` pixels are dropped. Closed loops repeat their first
    point.
    """
    mask = vmap.mask
    h, w = mask.shape
    theta = vmap.orientation
    turn = math.radians(max_turn)
    visited = ~mask.copy()
    rows, cols = np.nonzero(mask)
    order = np.lexsort((cols, rows, -vmap.strength[rows, cols]))
    nbr = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]
    cos_cone = math.cos(math.radians(67.5))

    def tangent(r, c, ref):
        t = np.array([math.cos(theta[r, c]), math.sin(theta[r, c])])
        return t if t @ ref >= 0 else -t

    def trace(r0, c0, d, seed):
        chain = []
        r, c = r0, c0
        while True:
            best = None
            closing = False
            for dc, dr in nbr:
                rr, cc = r + dr, c + dc
                if not (0 <= rr < h and 0 <= cc < w) or not mask[rr, cc]:
                    continue
                is_seed = (rr, cc) == seed and len(chain) >= 3
                if visited[rr, cc] and not is_seed:
                    continue
                step = np.array([dc, dr], float) / math.hypot(dc, dr)
                align = step @ d
                if align < cos_cone or _angle_diff(theta[rr, cc], theta[r, c]) > turn:
                    continue
                if best is None or align > best[0] + 1e-12:
                    best = (align, rr, cc, step)
                    closing = is_seed
            if best is None:
                return chain, False
            _, rr, cc, step = best
            if closing:
                return chain, True
            # pixels flanking the step belong to the same valley
            for dc, dr in nbr:
                fr, fc = r + dr, c + dc
                if max(abs(fr - rr), abs(fc - cc)) <= 1 and 0 <= fr < h and 0 <= fc < w:
                    visited[fr, fc] = True
            visited[rr, cc] = True
            chain.append((rr, cc))
            d = tangent(rr, cc, step)
            r, c = rr, cc

    chains: list[tuple[list[tuple[int, int]], bool]] = []
    for k in order:
        r, c = int(rows[k]), int(cols[k])
        if visited[r, c]:
            continue
        visited[r, c] = True
        t0 = np.array([math.cos(theta[r, c]), math.sin(theta[r, c])])
        fwd, closed = trace(r, c, t0, (r, c))
        if closed:
            chains.append(([(r, c)] + fwd, True))
            continue
        back, _ = trace(r, c, -t0, (r, c))
        chains.append((back[::-1] + [(r, c)] + fwd, False))

    polylines = []
    for pix, closed in chains:
        p = np.array([(c, r) for r, c in pix], float)
        p += vmap.offset[[r for r, _ in pix], [c for _, c in pix]]
        polylines.append((p, closed))
    polylines = _merge_ends(polylines, merge_radius, turn)
    out = []
    for p, closed in polylines:
        if closed:
            p = np.vstack([p, p[:1]])
        if len(p) >= 2 and polyline_length(p) >= min_length:
            out.append(p)
    return out


def polyline_length(p: np.ndarray) -> float:
    return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())


def _end_tangent(p: np.ndarray, at_end: bool) -> np.ndarray:
    """Outward unit direction at one end of an open polyline."""
    k = min(3, len(p) - 1)
    v = (p[-1] - p[-1 - k]) if at_end else (p[0] - p[k])
    n = np.linalg.norm(v)
    return v / n if n > 0 else v


def _merge_ends(polylines, radius: float, turn: float):
    """Join open-chain endpoints that nearly meet with compatible direction."""
    open_idx = [i for i, (p, closed) in enumerate(polylines) if not closed and len(p) >= 2]
    if not open_idx:
        return polylines
    ends = []  # (chain, at_end)
    pos = []
    tan = []
    for i in open_idx:
        p = polylines[i][0]
        for at_end in (False, True):
            ends.append((i, at_end))
            pos.append(p[-1] if at_end else p[0])
            tan.append(_end_tangent(p, at_end))
    pos = np.array(pos)
    tan = np.array(tan)
    pairs = sorted(cKDTree(pos).query_pairs(radius, output_type="ndarray").tolist(),
                   key=lambda ij: (np.linalg.norm(pos[ij[0]] - pos[ij[1]]), ij[0], ij[1]))
    cos_turn = math.cos(turn)
    link: dict[int, int] = {}
    parent = {i: i for i in open_idx}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    closes: set[int] = set()
    for a, b in pairs:
        if a in link or b in link:
            continue
        ca, cb = ends[a][0], ends[b][0]
        if -(tan[a] @ tan[b]) < cos_turn:
            continue
        gap = pos[b] - pos[a]
        g = np.linalg.norm(gap)
        if g > 0.5 and ((gap / g) @ tan[a] < cos_turn or -(gap / g) @ tan[b] < cos_turn):
            continue
        if ca == cb:
            if len(polylines[ca][0]) < 4:
                continue
            closes.add(find(ca))
        elif find(ca) == find(cb):
            closes.add(find(ca))
        else:
            parent[find(ca)] = find(cb)
        link[a] = b
        link[b] = a

    out = [pl for i, pl in enumerate(polylines) if i not in parent]
    end_of = {(c, e): k for k, (c, e) in enumerate(ends)}
    done: set[int] = set()

    def assemble(start_end: int):
        pts = []
        k = start_end
        while True:
            chain, at_end = ends[k]
            done.add(chain)
            p = polylines[chain][0]
            seg = p[::-1] if at_end else p
            pts.append(seg)
            other = end_of[(chain, not at_end)]
            nxt = link.get(other)
            if nxt is None or ends[nxt][0] in done:
                return np.concatenate(pts), nxt is not None
            k = nxt

    # open assemblies start at free ends; what remains are cycles
    for k, (chain, at_end) in enumerate(ends):
        if chain not in done and k not in link:
            pts, _ = assemble(k)
            out.append((pts, False))
    for k, (chain, at_end) in enumerate(ends):
        if chain not in done:
            pts, _ = assemble(k)
            out.append((pts, True))
    return out


def sample_nearest(img: np.ndarray, pts: np.ndarray, fill: float = np.nan) -> np.ndarray:
    """Image values at the pixels nearest to (x, y) points."""
    pts = np.asarray(pts, float).reshape(-1, 2)
    h, w = img.shape
    c = np.rint(pts[:, 0])
    r = np.rint(pts[:, 1])
    ok = (c >= 0) & (c < w) & (r >= 0) & (r < h)
    out = np.full(len(pts), fill, dtype=float)
    out[ok] = img[r[ok].astype(np.int64), c[ok].astype(np.int64)]
    return out


def densify(polylines, per_pixel: float = 4.0) -> np.ndarray:
    """Points along 2D polylines at ``per_pixel`` samples per pixel of arclength."""
    out = []
    for p in polylines:
        p = np.asarray(p, float)
        if len(p) == 1:
            out.append(p)
            continue
        out.append(p[:1])
        for a, b in zip(p[:-1], p[1:]):
            n = max(1, int(math.ceil(per_pixel * np.linalg.norm(b - a))))
            t = np.arange(1, n + 1)[:, None] / n
            out.append(a + t * (b - a))
    if not out:
        return np.zeros((0, 2))
    return np.concatenate(out)


@dataclass
class TaggedPolyline:
    points: np.ndarray
    tag: str


def suggestive_strokes(
    render: np.ndarray,
    contours_2d,
    tau: float = 0.25,
    sigma: float = 0.75,
    min_strength: float = 0.002,
    contour_radius: float = 2.0,
    min_length: float = 8.0,
    vmap: ValleyMap | None = None,
) -> list[TaggedPolyline]:
    """Valley polylines of a headlight render, tagged contour or suggestive.

    A point within ``contour_radius`` of a projected occluding contour is
    tagged ``contour``; otherwise it is ``suggestive`` when ``0 < I < tau``
    at its pixel and trimmed when not. Each output polyline is a run of
    consecutive points sharing one tag.
    """
    if vmap is None:
        vmap = detect_valleys(render, sigma, tau, min_strength)
    lines = link_valleys(vmap, min_length=min_length)
    dense = densify(contours_2d)
    tree = cKDTree(dense) if len(dense) else None
    out: list[TaggedPolyline] = []
    for p in lines:
        if tree is not None:
            dist, _ = tree.query(p)
        else:
            dist = np.full(len(p), np.inf)
        lum = sample_nearest(render, p)
        tags = np.where(dist <= contour_radius, "contour",
                        np.where((lum > 0) & (lum < tau), "suggestive", ""))
        start = 0
        for k in range(1, len(p) + 1):
            if k == len(p) or tags[k] != tags[start]:
                if tags[start] and k - start >= 2:
                    out.append(TaggedPolyline(p[start:k], str(tags[start])))
                start = k
    return out
