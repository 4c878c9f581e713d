"""End-to-end drawing pipelines shared by the command line and the tests."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry.camera import Camera
from .geometry.contours import ContourSet, extract_feature_edges, extract_smooth_contours, project_contours
from .geometry.curvature import estimate_curvature
from .geometry.mesh import Mesh
from .geometry.visibility import clip_visible
from .hatching import HatchParams, generate_hatching, project_direction_field
from .render import HEADLIGHT, MATTE, LightingConfig, MaterialConfig, render
from .strokes import DARK_ON_LIGHT, LIGHT_ON_DARK, DrawingDocument, Stroke, assign_thickness, compose
from .valleys import TaggedPolyline, detect_valleys, link_valleys, suggestive_strokes


@dataclass(frozen=True)
class DrawParams:
    tau: float = 0.25
    sigma: float = 0.75
    min_strength: float = 0.002
    t_min: float = 0.75
    t_max: float = 6.0
    crease_angle: float = 30.0
    contour_radius: float = 2.0
    min_length: float = 8.0
    suggestive_scale: float = 1.0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Drawing:
    document: DrawingDocument
    render: np.ndarray
    depth: np.ndarray
    contours: ContourSet = field(default_factory=ContourSet)
    valley_lines: list = field(default_factory=list)

    def contour_polylines(self, camera: Camera) -> list[np.ndarray]:
        return [p for _, p in project_contours(self.contours, camera)]


def object_lines(mesh: Mesh, camera: Camera, depth: np.ndarray, crease_angle: float = 30.0,
                 keep_hidden: bool = False) -> ContourSet:
    """Smooth contours plus polyhedral silhouette and crease edges, split by visibility."""
    features = extract_feature_edges(mesh, camera, crease_angle, smooth_silhouettes=False)
    lines = extract_smooth_contours(mesh, camera).extend(features)
    return clip_visible(lines, depth, camera, keep_hidden=keep_hidden)


def line_drawing(mesh: Mesh, camera: Camera, params: DrawParams = DrawParams(),
                 material: MaterialConfig = MATTE, lighting: LightingConfig = HEADLIGHT) -> Drawing:
    """Contours and suggestive contours, thickened from the dark pools of the render."""
    lum, depth = render(mesh, camera, material, lighting)
    lines = object_lines(mesh, camera, depth, params.crease_angle)
    projected = project_contours(lines, camera)
    vlines = suggestive_strokes(lum, [p for _, p in projected], tau=params.tau, sigma=params.sigma,
                                min_strength=params.min_strength, contour_radius=params.contour_radius,
                                min_length=params.min_length)
    polylines = [TaggedPolyline(p, tag) for tag, p in projected]
    polylines += [v for v in vlines if v.tag == "suggestive"]
    strokes = assign_thickness(polylines, lum, params.t_min, params.t_max, params.tau,
                               multipliers={"suggestive": params.suggestive_scale})
    doc = compose(strokes, width=camera.width, height=camera.height)
    return Drawing(doc, lum, depth, lines, vlines)


def valley_drawing(image: np.ndarray, params: DrawParams = DrawParams(), tag: str = "contour",
                   polarity: str = DARK_ON_LIGHT, vmap=None) -> tuple[DrawingDocument, list[np.ndarray]]:
    """Strokes along the dark valleys of any grayscale image in [0, 1]."""
    if vmap is None:
        vmap = detect_valleys(image, params.sigma, params.tau, params.min_strength)
    lines = link_valleys(vmap, min_length=params.min_length)
    strokes = assign_thickness([TaggedPolyline(p, tag) for p in lines], image,
                               params.t_min, params.t_max, params.tau)
    h, w = image.shape
    return compose(strokes, width=w, height=h, polarity=polarity), lines


def rim_drawing(mesh: Mesh, camera: Camera, params: DrawParams = DrawParams(),
                lighting: LightingConfig = LightingConfig(mode="ring")) -> Drawing:
    """Light-on-dark strokes along the bright ridges of a ring-lit render."""
    lum, depth = render(mesh, camera, MATTE, lighting)
    doc, lines = valley_drawing(1.0 - lum, params, polarity=LIGHT_ON_DARK)
    return Drawing(doc, lum, depth, ContourSet(), lines)


def hatched_drawing(mesh: Mesh, camera: Camera, params: DrawParams = DrawParams(),
                    hatch: HatchParams = HatchParams(), use_d2: bool = False) -> tuple[Drawing, list[Stroke]]:
    base = line_drawing(mesh, camera, params)
    field_ = project_direction_field(mesh, camera, estimate_curvature(mesh), base.depth, use_d2=use_d2)
    hatches = generate_hatching(base.render, field_, hatch)
    doc = compose(base.document.strokes, hatches, width=camera.width, height=camera.height,
                  metadata={"hatch_seed": hatch.seed})
    base.document = doc
    return base, hatches
