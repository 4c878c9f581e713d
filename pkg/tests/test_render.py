import math

import numpy as np
import pytest
from PIL import Image
from conftest import analytic_sphere_shading, headlight, scene

from valleydraw.geometry import Camera, make_mesh
from valleydraw.geometry.primitives import icosphere, merge
from valleydraw.raster_io import (
    ImageFormatError,
    depth_to_gray,
    parse_pgm,
    pgm_bytes,
    read_image,
    read_pgm,
    write_image,
    write_pgm,
    write_png,
)
from valleydraw.render import (
    LightingConfig,
    MaterialConfig,
    RenderError,
    parse_light,
    rasterize,
    render,
    render_depth_only,
)


def _tri(z, size=3.0):
    return make_mesh([(-size, -size, z), (size, -size, z), (0.0, size, z)], [(0, 1, 2)])


CAM = Camera((0.0, 0.0, 5.0), width=64, height=64)


def test_center_pixel_is_fully_lit():
    lum, _ = headlight("sphere")
    h, w = lum.shape
    # the four pixels around the image center straddle (0, 0, 1)
    assert lum[h // 2 - 1:h // 2 + 1, w // 2 - 1:w // 2 + 1].min() > 0.999


def test_luminance_approaches_zero_at_contour():
    mesh, cam = scene("sphere")
    lum, _ = headlight("sphere")
    radius = cam.focal / math.sqrt(24)
    grid = cam.pixel_grid()
    rr = np.hypot(grid[..., 0] - cam.principal_point[0], grid[..., 1] - cam.principal_point[1])
    band = np.abs(rr - radius) <= 0.5
    assert lum[band].min() <= 0.05


def test_headlight_matches_analytic_cosine():
    _, cam = scene("sphere")
    lum, depth = headlight("sphere")
    cos = analytic_sphere_shading(cam)
    inner = np.isfinite(cos) & (cos > 0.2) & np.isfinite(depth)
    assert np.abs(lum[inner] - cos[inner]).max() <= 0.02


def test_background_and_depth_sentinel():
    lum, depth = headlight("sphere")
    off = ~np.isfinite(depth)
    assert off.any() and np.all(lum[off] == 1.0)
    assert np.all(depth[~off] > 0)


def test_headlight_has_no_unlit_interior():
    lum, depth = headlight("torus")
    covered = np.isfinite(depth)
    # zero shading only where the normal is perpendicular to the view ray
    assert (lum[covered] > 0).mean() > 0.999


def test_specular_brightens_and_clamps():
    mesh, cam = scene("sphere")
    matte, _ = headlight("sphere")
    glossy, _ = render(mesh, cam, MaterialConfig(specular_strength=0.5, specular_exponent=32))
    assert np.all(glossy >= matte)
    assert glossy.max() == 1.0
    assert glossy[256, 256] == 1.0


def test_albedo_scales_matte_shading():
    mesh, cam = icosphere(2), CAM
    a, _ = render(mesh, cam)
    b, depth = render(mesh, cam, MaterialConfig(diffuse_albedo=0.5))
    cov = np.isfinite(depth)
    np.testing.assert_allclose(b[cov], 0.5 * a[cov], atol=1e-12)


def test_depth_of_single_triangle():
    depth = render_depth_only(_tri(3.0), CAM)
    assert depth[32, 32] == pytest.approx(2.0, abs=1e-4)


def test_empty_view_is_background():
    far_away = _tri(3.0).transformed(offset=(100.0, 0.0, 0.0))
    lum, depth = render(far_away, CAM)
    assert np.all(np.isinf(depth)) and np.all(lum == 1.0)


def test_zbuffer_keeps_nearest():
    both = merge(_tri(3.0), _tri(4.0))
    assert render_depth_only(both, CAM)[32, 32] == pytest.approx(1.0, abs=1e-4)
    both = merge(_tri(4.0), _tri(3.0))
    assert render_depth_only(both, CAM)[32, 32] == pytest.approx(1.0, abs=1e-4)


def test_behind_camera_is_ignored():
    depth = render_depth_only(_tri(6.0), CAM)
    assert np.all(np.isinf(depth))


def test_fragments_report_faces_and_barycentrics():
    frags = rasterize(_tri(3.0), CAM)
    cov = frags.covered
    assert cov[32, 32]
    assert np.all(frags.face[cov] == 0)
    np.testing.assert_allclose(frags.bary[cov].sum(axis=-1), 1.0, atol=1e-9)


def test_supersample_depth_and_range():
    mesh = icosphere(2)
    lum1, d1 = render(mesh, CAM)
    lum4, d4 = render(mesh, CAM, supersample=4)
    assert lum4.shape == lum1.shape and d4.shape == d1.shape
    assert lum4.min() >= 0 and lum4.max() <= 1
    # depth keeps the nearest subsample, so coverage can only grow
    assert np.all(np.isfinite(d4)[np.isfinite(d1)])
    # outline pixels missed at one sample per pixel are partly covered at 4x4
    rim = np.isfinite(d4) & ~np.isfinite(d1)
    assert rim.any() and np.all(lum4[rim] < 1.0)
    with pytest.raises(RenderError):
        render(mesh, CAM, supersample=3)


def test_point_light_shadows():
    # a small sphere shadows a large one when the light sits behind the small one
    occluder = icosphere(2, radius=0.3, center=(0.0, 0.0, 1.8))
    receiver = icosphere(3)
    scene_mesh = merge(occluder, receiver)
    light = LightingConfig(mode="point", point_position=(0.0, 0.0, 20.0))
    cam = Camera.looking_at((3.0, 0.0, 4.0), (0.0, 0.0, 0.5), width=128, height=128)
    shadowed, depth = render(scene_mesh, cam, lighting=light)
    lit, _ = render(scene_mesh, cam, lighting=LightingConfig(mode="point", point_position=(0.0, 0.0, 20.0),
                                                             shadows=False))
    cov = np.isfinite(depth)
    assert np.all(shadowed[cov] <= lit[cov] + 1e-12)
    assert np.sum(lit[cov] - shadowed[cov] > 0.5) > 10


def test_ring_light_background_and_brightness():
    mesh, cam = icosphere(3), Camera((0.0, 0.0, 5.0), width=128, height=128)
    lum, depth = render(mesh, cam, lighting=LightingConfig(mode="ring"))
    assert np.all(lum[~np.isfinite(depth)] == 0.0)
    # the sphere center faces away from every light in the ring plane
    assert lum[64, 64] < 0.05


@pytest.mark.parametrize("kw", [
    dict(mode="sun"),
    dict(mode="point"),
    dict(mode="ring", ring_count=2),
])
def test_lighting_validation(kw):
    with pytest.raises(RenderError):
        LightingConfig(**kw)


@pytest.mark.parametrize("kw", [dict(diffuse_albedo=0), dict(specular_strength=-1), dict(specular_exponent=0.5)])
def test_material_validation(kw):
    with pytest.raises(RenderError):
        MaterialConfig(**kw)


def test_parse_light():
    assert parse_light("headlight").mode == "headlight"
    p = parse_light("point:1,2,3")
    assert p.point_position == (1.0, 2.0, 3.0) and p.use_shadows
    r = parse_light("ring:6,40")
    assert (r.ring_count, r.ring_radius) == (6, 40.0) and not r.use_shadows
    assert parse_light("ring").ring_count == 8
    with pytest.raises(ValueError):
        parse_light("spot:1")
    with pytest.raises(ValueError):
        parse_light("point:1,2")


def test_render_is_deterministic():
    mesh, cam = scene("torus")
    a = render(mesh, cam.with_size(128, 128))
    b = render(mesh, cam.with_size(128, 128))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


# --- raster files ------------------------------------------------------------

def test_pgm_roundtrip_8_and_16_bit(tmp_path, rng):
    img = rng.uniform(size=(7, 11))
    for bits, tol in ((8, 0.5 / 255), (16, 0.5 / 65535)):
        path = tmp_path / f"i{bits}.pgm"
        write_pgm(path, img, bits)
        back = read_pgm(path)
        assert back.shape == (7, 11)
        assert np.abs(back - img).max() <= tol + 1e-12


def test_pgm_header_is_exact():
    data = pgm_bytes(np.array([[0.0, 1.0]]))
    assert data == b"P5\n2 1\n255\n\x00\xff"


def test_pgm_header_comments():
    assert parse_pgm(b"P5\n# made by hand\n2 1\n255\n\x00\xff").tolist() == [[0.0, 1.0]]


def test_pgm_errors():
    with pytest.raises(ImageFormatError):
        parse_pgm(b"P2\n1 1\n255\n0")
    with pytest.raises(ImageFormatError):
        parse_pgm(b"P5\n1")
    with pytest.raises(ImageFormatError):
        pgm_bytes(np.zeros((2, 2)), bits=12)


def test_png_roundtrip(tmp_path):
    img = np.linspace(0, 1, 256).reshape(16, 16)
    path = tmp_path / "g.png"
    write_png(path, img)
    back = read_image(path)
    assert back.dtype == np.uint8
    np.testing.assert_array_equal(back, np.rint(img * 255).astype(np.uint8))


def test_read_image_rejects_16_bit_png(tmp_path):
    path = tmp_path / "deep.png"
    Image.fromarray(np.full((4, 4), 40000, np.uint16)).save(path)
    with pytest.raises(ImageFormatError):
        read_image(path)


def test_write_image_dispatch(tmp_path):
    write_image(tmp_path / "a.pgm", np.zeros((2, 2)), bits=16)
    assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5\n2 2\n65535\n")
    with pytest.raises(ImageFormatError):
        write_image(tmp_path / "a.jpg", np.zeros((2, 2)))


def test_depth_to_gray():
    d = np.array([[1.0, 3.0, np.inf]])
    np.testing.assert_allclose(depth_to_gray(d), [[0.0, 0.9, 1.0]])
