"""Depth-buffer visibility for object-space polylines."""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .camera import Camera
from .contours import ContourSet


def depth_range(depth: np.ndarray) -> float:
    finite = depth[np.isfinite(depth)]
    if finite.size == 0:
        return 0.0
    return float(finite.max() - finite.min())


def resample_polyline(pts: np.ndarray, camera: Camera, per_pixel: float = 4.0):
    """Densify a 3D polyline to ``per_pixel`` samples per pixel of projected length.

    Returns ``(samples, is_vertex)``.
    """
    pts = np.asarray(pts, dtype=float)
    xy, _ = camera.project(pts)
    out = [pts[:1]]
    flags = [np.array([True])]
    for i in range(len(pts) - 1):
        seglen = np.linalg.norm(xy[i + 1] - xy[i])
        n = max(1, int(math.ceil(per_pixel * seglen))) if np.isfinite(seglen) else 1
        t = np.arange(1, n + 1) / n
        out.append(pts[i] + t[:, None] * (pts[i + 1] - pts[i]))
        f = np.zeros(n, bool)
        f[-1] = True
        flags.append(f)
    return np.concatenate(out), np.concatenate(flags)


def sample_visibility(points: np.ndarray, depth: np.ndarray, camera: Camera, bias: float | None = None) -> np.ndarray:
    """Visibility of 3D points against a depth buffer.

    A point is visible when its depth does not exceed the farthest depth in
    the 3x3 pixel neighbourhood it projects into (plus ``bias``). Using the
    neighbourhood maximum rather than the single nearest pixel keeps points
    on a contour generator from being hidden by their own surface, which is
    tangent to the view ray there. Points outside the image are hidden.
    """
    if bias is None:
        bias = 1e-3 * depth_range(depth)
    h, w = depth.shape
    zmax = ndimage.maximum_filter(np.where(np.isfinite(depth), depth, np.inf), size=3, mode="nearest")
    xy, z = camera.project(points)
    col = np.rint(xy[:, 0])
    row = np.rint(xy[:, 1])
    inside = np.isfinite(col) & np.isfinite(row) & (col >= 0) & (col < w) & (row >= 0) & (row < h) & (z > 0)
    vis = np.zeros(len(points), bool)
    r = row[inside].astype(np.int64)
    c = col[inside].astype(np.int64)
    vis[inside] = z[inside] <= zmax[r, c] + bias
    return vis


def clip_visible(
    contours: ContourSet,
    depth: np.ndarray,
    camera: Camera,
    bias: float | None = None,
    keep_hidden: bool = False,
    samples_per_pixel: float = 4.0,
    min_fragment: float = 3.0,
) -> ContourSet:
    """Split polylines at visibility changes; drop hidden pieces unless ``keep_hidden``.

    Visible runs shorter than ``min_fragment`` pixels on a partly hidden
    polyline count as hidden. They arise where a hidden edge meets the
    object outline and the depth test sees background next to it.
    """
    out = ContourSet(stats=contours.stats.copy())
    if bias is None:
        bias = 1e-3 * depth_range(depth)
    for i, pts in enumerate(contours.polylines):
        samples, is_vertex = resample_polyline(pts, camera, samples_per_pixel)
        vis = sample_visibility(samples, depth, camera, bias)
        if not vis.all():
            _drop_short_runs(vis, samples_per_pixel * min_fragment)
        change = np.flatnonzero(vis[1:] != vis[:-1]) + 1
        starts = np.concatenate([[0], change])
        ends = np.concatenate([change, [len(samples)]])
        whole = len(starts) == 1
        for s, e in zip(starts, ends):
            v = bool(vis[s])
            out.stats["samples_visible" if v else "samples_hidden"] += int(e - s)
            if not (v or keep_hidden):
                continue
            # bridge to the next run so pieces meet at the transition
            e2 = min(e + 1, len(samples)) if e < len(samples) else e
            keep = is_vertex[s:e2].copy()
            keep[0] = keep[-1] = True
            piece = samples[s:e2][keep]
            if len(piece) < 2:
                continue
            out.append(piece, contours.tags[i], closed=contours.closed[i] and whole,
                       labels=contours.labels[i], visible=v)
    if out.visible is None:
        out.visible = []
    return out


def _drop_short_runs(vis: np.ndarray, min_samples: float) -> None:
    change = np.flatnonzero(vis[1:] != vis[:-1]) + 1
    for s, e in zip(np.concatenate([[0], change]), np.concatenate([change, [len(vis)]])):
        if vis[s] and e - s < min_samples:
            vis[s:e] = False
