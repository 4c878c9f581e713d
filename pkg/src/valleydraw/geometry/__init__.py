"""Meshes, cameras and object-space line extraction."""

from .camera import Camera, CameraError, parse_vec3
from .contours import (
    CONTOUR,
    CREASE,
    SILHOUETTE,
    ContourSet,
    contour_residuals,
    edge_crossing,
    extract_feature_edges,
    extract_smooth_contours,
    format_contours,
    g_field,
    project_contours,
    read_contours,
    write_contours,
)
from .curvature import CurvatureField, estimate_curvature
from .mesh import (
    DegenerateFaceError,
    Mesh,
    MeshError,
    ObjParseError,
    compute_normals,
    load_mesh,
    make_mesh,
    save_obj,
)
from .visibility import clip_visible, sample_visibility

__all__ = [
    "CONTOUR", "CREASE", "SILHOUETTE",
    "Camera", "CameraError", "ContourSet", "CurvatureField", "DegenerateFaceError",
    "Mesh", "MeshError", "ObjParseError",
    "clip_visible", "compute_normals", "contour_residuals", "edge_crossing",
    "estimate_curvature", "extract_feature_edges", "extract_smooth_contours",
    "format_contours", "g_field", "load_mesh", "make_mesh", "parse_vec3",
    "project_contours", "read_contours", "sample_visibility", "save_obj", "write_contours",
]
