"""Pinhole perspective camera.

Image coordinates are in pixels with the origin at the *center* of the
top-left pixel: pixel ``(row, col)`` covers ``[col - 0.5, col + 0.5] x
[row - 0.5, row + 0.5]`` and ``x`` grows to the right, ``y`` downward. This
makes array indices and image coordinates coincide, which keeps the image
filters and the projected geometry aligned without half-pixel shifts.

Depth is view-space distance along the optical axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class CameraError(ValueError):
    pass


@dataclass(frozen=True)
class Camera:
    center: tuple[float, float, float]
    look_at: tuple[float, float, float] = (0.0, 0.0, 0.0)
    up: tuple[float, float, float] = (0.0, 1.0, 0.0)
    vertical_fov: float = 30.0
    width: int = 512
    height: int = 512
    near: float = 1e-2
    far: float = 1e3

    def __post_init__(self):
        for name in ("center", "look_at", "up"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if not 0 < self.near < self.far:
            raise CameraError("need 0 < near < far")
        if not 0 < self.vertical_fov < 180:
            raise CameraError("vertical_fov must be in (0, 180)")
        if self.width < 1 or self.height < 1:
            raise CameraError("image size must be positive")
        fwd = np.subtract(self.look_at, self.center)
        if np.linalg.norm(fwd) == 0:
            raise CameraError("look_at coincides with center")
        fwd = fwd / np.linalg.norm(fwd)
        up = np.asarray(self.up)
        if np.linalg.norm(np.cross(fwd, up)) < 1e-9 * max(np.linalg.norm(up), 1e-300):
            raise CameraError("up vector parallel to view direction")

    @classmethod
    def looking_at(cls, center, target, *, up=None, **kw) -> "Camera":
        """Camera at ``center`` aimed at ``target``; picks a usable ``up`` if none given."""
        if up is None:
            fwd = np.subtract(target, center)
            fwd = fwd / np.linalg.norm(fwd)
            up = (0.0, 1.0, 0.0)
            if abs(fwd[1]) > 0.999:
                up = (0.0, 0.0, -1.0 if fwd[1] > 0 else 1.0)
        return cls(tuple(center), tuple(target), tuple(up), **kw)

    @cached_property
    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Unit (right, up, forward) vectors in world space."""
        fwd = np.subtract(self.look_at, self.center)
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, self.up)
        right /= np.linalg.norm(right)
        up = np.cross(right, fwd)
        return right, up, fwd

    @cached_property
    def focal(self) -> float:
        """Focal length in pixels."""
        return 0.5 * self.height / math.tan(math.radians(self.vertical_fov) / 2)

    @property
    def principal_point(self) -> tuple[float, float]:
        return (self.width - 1) / 2.0, (self.height - 1) / 2.0

    @property
    def position(self) -> np.ndarray:
        return np.asarray(self.center)

    def to_view(self, points) -> np.ndarray:
        """World points -> view coordinates (x right, y up, z forward)."""
        d = np.asarray(points, dtype=float) - self.position
        r, u, f = self.basis
        return np.stack([d @ r, d @ u, d @ f], axis=-1)

    def project(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Project world points; returns ``(xy_pixels, depth)``.

        Points at or behind the camera plane get ``nan`` pixel coordinates.
        """
        v = self.to_view(points)
        z = v[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(z > 0, 1.0 / z, np.nan)
        cx, cy = self.principal_point
        xy = np.stack([cx + self.focal * v[..., 0] * inv, cy - self.focal * v[..., 1] * inv], axis=-1)
        return xy, z

    def pixel_rays(self, xy) -> np.ndarray:
        """World-space ray directions through image points, scaled to unit depth.

        ``center + z * ray`` is the point at view depth ``z``.
        """
        xy = np.asarray(xy, dtype=float)
        cx, cy = self.principal_point
        r, u, f = self.basis
        a = (xy[..., 0:1] - cx) / self.focal
        b = -(xy[..., 1:2] - cy) / self.focal
        return f + a * r + b * u

    def unproject(self, xy, depth) -> np.ndarray:
        return self.position + np.asarray(depth, dtype=float)[..., None] * self.pixel_rays(xy)

    def pixel_grid(self) -> np.ndarray:
        """Image coordinates of all pixel centers, shape (H, W, 2)."""
        ys, xs = np.mgrid[0 : self.height, 0 : self.width].astype(float)
        return np.stack([xs, ys], axis=-1)

    def world_per_pixel(self, depth: float) -> float:
        return depth / self.focal

    def with_size(self, width: int, height: int) -> "Camera":
        return Camera(self.center, self.look_at, self.up, self.vertical_fov, width, height, self.near, self.far)


def parse_vec3(text: str) -> tuple[float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected x,y,z but got {text!r}")
    return tuple(parts)  # type: ignore[return-value]
