from __future__ import annotations

import functools

import numpy as np
import pytest

from valleydraw.geometry import Camera
from valleydraw.geometry.primitives import cube, cylinder, icosphere, torus
from valleydraw.render import render


def sphere_camera(size: int = 512) -> Camera:
    return Camera((0.0, 0.0, 5.0), width=size, height=size)


def torus_camera(size: int = 512) -> Camera:
    return Camera.looking_at((0.0, -4.0, 1.6), (0.0, 0.0, 0.0), up=(0, 0, 1), vertical_fov=40.0,
                             width=size, height=size)


def cylinder_camera(size: int = 512) -> Camera:
    return Camera.looking_at((5.0, 0.0, 0.8), (0.0, 0.0, 0.0), up=(0, 0, 1), vertical_fov=35.0,
                             width=size, height=size)


def cube_camera(size: int = 512) -> Camera:
    return Camera.looking_at((4.0, 3.0, 5.0), (0.0, 0.0, 0.0), width=size, height=size)


@functools.lru_cache(maxsize=None)
def scene(name: str):
    """(mesh, camera) for the shared test scenes."""
    if name == "sphere":
        return icosphere(4), sphere_camera()
    if name == "torus":
        # fine tessellation: interpolated-normal ripples on coarse tori create spurious weak valleys
        return torus(n_major=256, n_minor=128), torus_camera()
    if name == "cylinder":
        return cylinder(), cylinder_camera()
    if name == "cube":
        return cube(), cube_camera()
    raise KeyError(name)


@functools.lru_cache(maxsize=None)
def headlight(name: str):
    mesh, cam = scene(name)
    return render(mesh, cam)


def analytic_sphere_shading(cam: Camera, radius: float = 1.0):
    """cos(theta) between normal and ray to camera for a sphere at the origin; NaN off-sphere."""
    rays = cam.pixel_rays(cam.pixel_grid().reshape(-1, 2))
    rays = rays / np.linalg.norm(rays, axis=1, keepdims=True)
    c = np.asarray(cam.center, float)
    b = rays @ c
    disc = b * b - (c @ c - radius * radius)
    hit = disc >= 0
    t = -b - np.sqrt(np.where(hit, disc, 0.0))
    p = c + t[:, None] * rays
    n = p / radius
    v = c - p
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    cos = np.where(hit, np.einsum("ij,ij->i", n, v), np.nan)
    return cos.reshape(cam.height, cam.width)


def ray_hits_before(origin, direction, limit, tris) -> bool:
    """Moller-Trumbore: does the ray hit any triangle at 0 < t < limit?"""
    v0, v1, v2 = tris[:, 0], tris[:, 1], tris[:, 2]
    e1, e2 = v1 - v0, v2 - v0
    pvec = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > 1e-14
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = origin - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = (qvec @ direction) * inv
    t = np.einsum("ij,ij->i", e2, qvec) * inv
    hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 0) & (t < limit)
    return bool(hit.any())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    """Record a criterion verdict for the end-of-run summary, then assert it."""

    def check(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        assert ok, f"criterion {number} ({title}) failed: {detail}"

    return check


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
