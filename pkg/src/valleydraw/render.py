"""Software rasterizer for the reference renderings.

Renders are deferred: triangles are scan-converted into a z-buffer holding
face ids and perspective-correct barycentrics, then every covered pixel is
shaded from its interpolated position and renormalised normal. There is no
ambient term and no interreflection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry.camera import Camera
from .geometry.mesh import Mesh

# fragments handled per vectorised batch
_BATCH = 1 << 22


class RenderError(ValueError):
    pass


@dataclass(frozen=True)
class MaterialConfig:
    diffuse_albedo: float = 1.0
    specular_strength: float = 0.0
    specular_exponent: float = 32.0

    def __post_init__(self):
        if not 0 < self.diffuse_albedo <= 1:
            raise RenderError("diffuse_albedo must be in (0, 1]")
        if self.specular_strength < 0:
            raise RenderError("specular_strength must be >= 0")
        if self.specular_exponent < 1:
            raise RenderError("specular_exponent must be >= 1")


@dataclass(frozen=True)
class LightingConfig:
    """Light rig.

    ``headlight``: one point light at the camera center, never shadowed.
    ``point``: one point light at ``point_position``; shadowed by default.
    ``ring``: ``ring_count`` lights on a circle of ``ring_radius`` (default
    10x the mesh bounding-box diagonal) in the plane through the mesh center
    perpendicular to the view axis, unshadowed.

    ``background`` defaults to white, except for ring lighting, where the
    subject is the only lit thing in a dark scene.
    """

    mode: str = "headlight"
    point_position: tuple[float, float, float] | None = None
    ring_count: int = 8
    ring_radius: float | None = None
    shadows: bool | None = None
    background: float | None = None
    shadow_map_size: int = 2048

    def __post_init__(self):
        if self.mode not in ("headlight", "point", "ring"):
            raise RenderError(f"unknown lighting mode {self.mode!r}")
        if self.mode == "point" and self.point_position is None:
            raise RenderError("point lighting needs point_position")
        if self.mode == "ring" and self.ring_count < 3:
            raise RenderError("ring lighting needs at least 3 lights")

    @property
    def use_shadows(self) -> bool:
        if self.mode == "headlight":
            return False
        if self.shadows is None:
            return self.mode == "point"
        return self.shadows

    @property
    def background_value(self) -> float:
        if self.background is not None:
            return self.background
        return 0.0 if self.mode == "ring" else 1.0


HEADLIGHT = LightingConfig()
MATTE = MaterialConfig()


@dataclass
class Fragments:
    """Per-pixel z-buffer contents."""

    depth: np.ndarray
    face: np.ndarray
    bary: np.ndarray = field(repr=False)

    @property
    def covered(self) -> np.ndarray:
        return self.face >= 0


def rasterize(mesh: Mesh, camera: Camera) -> Fragments:
    """Scan-convert all faces; nearest fragment wins, ties go to the lower face id.

    Triangles crossing the near plane or beyond the far plane are skipped, as
    are triangles with zero screen area. Pixel centers on a shared edge are
    claimed by both triangles and resolved by the depth test.
    """
    w, h = camera.width, camera.height
    zbuf = np.full((h, w), np.inf)
    fbuf = np.full((h, w), -1, dtype=np.int64)
    bbuf = np.zeros((h, w, 3))
    xy, z = camera.project(mesh.vertices)
    tri_xy = xy[mesh.faces]
    tri_z = z[mesh.faces]
    ok = np.all(tri_z > camera.near, axis=1) & np.all(tri_z < camera.far, axis=1)
    ok &= np.all(np.isfinite(tri_xy), axis=(1, 2))
    x0 = np.ceil(np.min(tri_xy[..., 0], axis=1) - 1e-9)
    x1 = np.floor(np.max(tri_xy[..., 0], axis=1) + 1e-9)
    y0 = np.ceil(np.min(tri_xy[..., 1], axis=1) - 1e-9)
    y1 = np.floor(np.max(tri_xy[..., 1], axis=1) + 1e-9)
    with np.errstate(invalid="ignore"):
        x0 = np.clip(x0, 0, w - 1)
        x1 = np.clip(x1, -1, w - 1)
        y0 = np.clip(y0, 0, h - 1)
        y1 = np.clip(y1, -1, h - 1)
    # orientation-independent edge functions need a non-zero area
    e1 = tri_xy[:, 1] - tri_xy[:, 0]
    e2 = tri_xy[:, 2] - tri_xy[:, 0]
    area = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    ok &= np.abs(area) > 1e-12
    ok &= (x1 >= x0) & (y1 >= y0)
    tris = np.flatnonzero(ok)
    if len(tris) == 0:
        return Fragments(zbuf, fbuf, bbuf)
    nx = (x1[tris] - x0[tris] + 1).astype(np.int64)
    ny = (y1[tris] - y0[tris] + 1).astype(np.int64)
    counts = nx * ny
    start = 0
    while start < len(tris):
        csum = np.cumsum(counts[start:])
        stop = start + max(1, int(np.searchsorted(csum, _BATCH, side="right")))
        _raster_batch(tris[start:stop], nx[start:stop], counts[start:stop], x0, y0,
                      tri_xy, tri_z, area, zbuf, fbuf, bbuf, w)
        start = stop
    return Fragments(zbuf, fbuf, bbuf)


def _raster_batch(tris, nx, counts, x0, y0, tri_xy, tri_z, area, zbuf, fbuf, bbuf, w):
    total = int(counts.sum())
    owner = np.repeat(np.arange(len(tris)), counts)
    local = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    t = tris[owner]
    px = x0[t] + local % nx[owner]
    py = y0[t] + local // nx[owner]
    v = tri_xy[t]
    inv_area = 1.0 / area[t]
    # screen-space barycentrics from edge functions
    l0 = ((v[:, 1, 0] - px) * (v[:, 2, 1] - py) - (v[:, 1, 1] - py) * (v[:, 2, 0] - px)) * inv_area
    l1 = ((v[:, 2, 0] - px) * (v[:, 0, 1] - py) - (v[:, 2, 1] - py) * (v[:, 0, 0] - px)) * inv_area
    l2 = 1.0 - l0 - l1
    inside = (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
    if not inside.any():
        return
    t, px, py = t[inside], px[inside].astype(np.int64), py[inside].astype(np.int64)
    l = np.stack([l0[inside], l1[inside], l2[inside]], axis=1)
    iz = l / tri_z[t]
    s = iz.sum(axis=1)
    depth = 1.0 / s
    bary = iz / s[:, None]
    pix = py * w + px
    # nearest per pixel, lowest face id on ties
    order = np.lexsort((t, depth, pix))
    pix_s = pix[order]
    first = np.ones(len(order), bool)
    first[1:] = pix_s[1:] != pix_s[:-1]
    sel = order[first]
    pix, depth, t, bary = pix[sel], depth[sel], t[sel], bary[sel]
    flat_z = zbuf.reshape(-1)
    win = depth < flat_z[pix]
    pix, depth, t, bary = pix[win], depth[win], t[win], bary[win]
    flat_z[pix] = depth
    fbuf.reshape(-1)[pix] = t
    bbuf.reshape(-1, 3)[pix] = bary


def surface_attributes(mesh: Mesh, frags: Fragments):
    """Interpolated position and unit normal at every covered pixel.

    Returns ``(mask, positions, normals)`` with the attribute arrays holding
    one row per covered pixel in row-major order.
    """
    mask = frags.covered
    f = frags.face[mask]
    b = frags.bary[mask]
    idx = mesh.faces[f]
    pos = np.einsum("ij,ijk->ik", b, mesh.vertices[idx])
    nrm = np.einsum("ij,ijk->ik", b, mesh.normals[idx])
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    return mask, pos, nrm


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _lobe(n, l, v, material: MaterialConfig):
    """Lambert plus half-vector specular for unit light directions ``l``."""
    ndl = np.einsum("ij,ij->i", n, l)
    lam = material.diffuse_albedo * np.maximum(ndl, 0.0)
    if material.specular_strength > 0:
        hv = _unit(l + v)
        ndh = np.maximum(np.einsum("ij,ij->i", n, hv), 0.0)
        spec = material.specular_strength * ndh ** material.specular_exponent
        lam = lam + np.where(ndl > 0, spec, 0.0)
    return lam


def ring_lights(mesh: Mesh, camera: Camera, lighting: LightingConfig) -> tuple[np.ndarray, float]:
    """Ring light positions and the per-light intensity.

    The intensity is chosen so that the brightest possible Lambertian
    response of a normal lying in the ring plane is exactly 1.
    """
    radius = lighting.ring_radius or 10.0 * mesh.bbox_diagonal
    right, up, _ = camera.basis
    k = lighting.ring_count
    ang = 2 * np.pi * np.arange(k) / k
    pos = mesh.centroid + radius * (np.cos(ang)[:, None] * right + np.sin(ang)[:, None] * up)
    phi = np.linspace(0, 2 * np.pi / k, 721)
    peak = np.max(np.sum(np.maximum(np.cos(phi[:, None] - ang[None, :]), 0.0), axis=1))
    return pos, 1.0 / peak


def shadow_mask(mesh: Mesh, light: np.ndarray, pos: np.ndarray, nrm: np.ndarray, size: int) -> np.ndarray:
    """True where ``pos`` is lit by a point light, via a perspective shadow map."""
    light = np.asarray(light, float)
    center = mesh.centroid
    radius = 0.5 * mesh.bbox_diagonal
    dist = float(np.linalg.norm(center - light))
    if dist <= radius * 1.001:
        raise RenderError("shadowed point light must lie outside the mesh bounding sphere")
    half = math.degrees(math.asin(radius / dist))
    fov = min(2 * half * 1.05, 170.0)
    near = max(dist - radius * 1.1, 1e-6 * dist)
    lcam = Camera.looking_at(light, center, vertical_fov=fov, width=size, height=size,
                             near=near, far=dist + radius * 1.1)
    smap = rasterize(mesh, lcam).depth
    texel = lcam.world_per_pixel(1.0)
    zl = lcam.to_view(pos)[:, 2]
    offset = 1.5 * texel * zl
    probe = pos + offset[:, None] * nrm
    xy, z = lcam.project(probe)
    col = np.clip(np.rint(xy[:, 0]), 0, size - 1).astype(np.int64)
    row = np.clip(np.rint(xy[:, 1]), 0, size - 1).astype(np.int64)
    return z <= smap[row, col] + 2.0 * texel * z


def render(
    mesh: Mesh,
    camera: Camera,
    material: MaterialConfig = MATTE,
    lighting: LightingConfig = HEADLIGHT,
    supersample: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Luminance and depth images, each ``(height, width)``.

    Luminance is clamped to [0, 1]; uncovered pixels hold the background
    value and depth ``inf``. With ``supersample`` > 1 the luminance is the
    box-filtered average of an s x s grid per pixel and the depth is the
    nearest subsample depth.
    """
    if supersample not in (1, 2, 4):
        raise RenderError("supersample must be 1, 2 or 4")
    s = supersample
    cam = camera if s == 1 else camera.with_size(camera.width * s, camera.height * s)
    frags = rasterize(mesh, cam)
    lum = np.full(frags.depth.shape, lighting.background_value)
    mask, pos, nrm = surface_attributes(mesh, frags)
    if mask.any():
        lum[mask] = np.clip(shade(mesh, camera, material, lighting, pos, nrm), 0.0, 1.0)
    depth = frags.depth
    if s > 1:
        h, w = camera.height, camera.width
        lum = lum.reshape(h, s, w, s).mean(axis=(1, 3))
        depth = depth.reshape(h, s, w, s).min(axis=(1, 3))
    return lum, depth


def shade(mesh, camera, material, lighting, pos, nrm) -> np.ndarray:
    """Unclamped luminance at surface samples."""
    view = _unit(camera.position - pos)
    if lighting.mode == "headlight":
        # light direction equals view direction, so the half-vector does too
        return _lobe(nrm, view, view, material)
    if lighting.mode == "point":
        lights = np.asarray(lighting.point_position, float)[None, :]
        intensity = 1.0
    else:
        lights, intensity = ring_lights(mesh, camera, lighting)
    total = np.zeros(len(pos))
    for lp in lights:
        ldir = _unit(lp - pos)
        contrib = _lobe(nrm, ldir, view, material)
        if lighting.use_shadows:
            contrib = contrib * shadow_mask(mesh, lp, pos, nrm, lighting.shadow_map_size)
        total += intensity * contrib
    return total


def render_depth_only(mesh: Mesh, camera: Camera) -> np.ndarray:
    return rasterize(mesh, camera).depth


def parse_light(text: str) -> LightingConfig:
    """``headlight``, ``point:x,y,z`` or ``ring:n,r`` (``r`` may be omitted)."""
    if text == "headlight":
        return LightingConfig()
    kind, _, arg = text.partition(":")
    if kind == "point":
        vals = [float(v) for v in arg.split(",")]
        if len(vals) != 3:
            raise ValueError(f"point light needs x,y,z: {text!r}")
        return LightingConfig(mode="point", point_position=tuple(vals))
    if kind == "ring":
        parts = [p for p in arg.split(",") if p]
        count = int(parts[0]) if parts else 8
        radius = float(parts[1]) if len(parts) > 1 else None
        return LightingConfig(mode="ring", ring_count=count, ring_radius=radius)
    raise ValueError(f"unknown light spec {text!r}")
