"""Metrics relating drawings, renders and object-space contours."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry.camera import Camera
from .geometry.contours import ContourSet, project_contours
from .strokes import DrawingDocument, rasterize_drawing
from .valleys import densify


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class Darkness:
    mean_under_ink: float
    mean_elsewhere: float
    ratio: float


def ink_mask(doc: DrawingDocument) -> np.ndarray:
    """Pixels whose centre lies inside some stroke."""
    img = rasterize_drawing(doc, supersample=1)
    return img == doc.ink


def darkness_from_mask(ink: np.ndarray, render: np.ndarray, covered: np.ndarray | None = None) -> Darkness:
    if covered is None:
        covered = np.ones(render.shape, bool)
    under = ink & covered
    rest = ~ink & covered
    if not under.any():
        raise EvalError("drawing has no ink over the rendered object")
    if not rest.any():
        raise EvalError("ink covers every rendered pixel")
    a = float(render[under].mean())
    b = float(render[rest].mean())
    return Darkness(a, b, a / b if b > 0 else float("inf"))


def darkness_score(doc: DrawingDocument, render: np.ndarray, depth: np.ndarray | None = None) -> Darkness:
    """Mean render luminance under ink versus elsewhere on the object.

    With ``depth`` given only pixels with finite depth count, so the page
    background does not inflate ``mean_elsewhere``.
    """
    if (doc.height, doc.width) != render.shape:
        raise EvalError(f"drawing is {doc.width}x{doc.height}, render is {render.shape[1]}x{render.shape[0]}")
    covered = None if depth is None else np.isfinite(depth)
    return darkness_from_mask(ink_mask(doc), render, covered)


def _as_2d(contours, camera: Camera | None):
    if isinstance(contours, ContourSet):
        if camera is None:
            raise EvalError("a camera is needed to project 3D contours")
        return [p for _, p in project_contours(contours, camera, visible_only=True)]
    return [np.asarray(getattr(p, "points", p), float) for p in contours]


def contour_coverage(doc: DrawingDocument, contours, camera: Camera | None = None,
                     radius: float = 2.0, per_pixel: float = 4.0) -> float:
    """Fraction of visible contour samples with an ink pixel centre within ``radius``."""
    return coverage_from_mask(ink_mask(doc), _as_2d(contours, camera), radius, per_pixel)


def coverage_from_mask(ink: np.ndarray, polylines, radius: float = 2.0, per_pixel: float = 4.0) -> float:
    h, w = ink.shape
    pts = densify(polylines, per_pixel)
    inside = (pts[:, 0] >= -0.5) & (pts[:, 0] <= w - 0.5) & (pts[:, 1] >= -0.5) & (pts[:, 1] <= h - 0.5)
    pts = pts[inside]
    if len(pts) == 0:
        raise EvalError("no visible contour samples on the page")
    if not ink.any():
        return 0.0
    ys, xs = np.nonzero(ink)
    dist, _ = cKDTree(np.column_stack([xs, ys]).astype(float)).query(pts)
    return float(np.mean(dist <= radius))


def chamfer(a, b, per_pixel: float = 4.0) -> tuple[float, float]:
    """Symmetric chamfer distance between two sets of 2D polylines.

    Returns the average of the two directed mean distances and the larger
    of the two directed maxima (Hausdorff distance).
    """
    pa = densify([np.asarray(getattr(p, "points", p), float) for p in a], per_pixel)
    pb = densify([np.asarray(getattr(p, "points", p), float) for p in b], per_pixel)
    if len(pa) == 0 or len(pb) == 0:
        raise EvalError("chamfer needs two non-empty polyline sets")
    dab, _ = cKDTree(pb).query(pa)
    dba, _ = cKDTree(pa).query(pb)
    return 0.5 * (float(dab.mean()) + float(dba.mean())), float(max(dab.max(), dba.max()))


def format_report(metrics: dict) -> str:
    """Flat ``key=value`` lines in sorted key order."""
    lines = []
    for k in sorted(metrics):
        v = metrics[k]
        lines.append(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}")
    return "\n".join(lines) + "\n"


def format_json(metrics: dict) -> str:
    return json.dumps(metrics, sort_keys=True, indent=2) + "\n"
