"""PGM/PNG reading and writing for single-channel float images in [0, 1]."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image


class ImageFormatError(ValueError):
    pass


def to_uint(img: np.ndarray, bits: int = 8) -> np.ndarray:
    maxval = (1 << bits) - 1
    q = np.rint(np.clip(np.nan_to_num(img, nan=0.0, posinf=1.0, neginf=0.0), 0.0, 1.0) * maxval)
    return q.astype(np.uint16 if bits > 8 else np.uint8)


def pgm_bytes(img: np.ndarray, bits: int = 8) -> bytes:
    if bits not in (8, 16):
        raise ImageFormatError("PGM bit depth must be 8 or 16")
    h, w = img.shape
    q = to_uint(img, bits)
    header = f"P5\n{w} {h}\n{(1 << bits) - 1}\n".encode("ascii")
    body = q.astype(">u2").tobytes() if bits == 16 else q.tobytes()
    return header + body


def write_pgm(path, img: np.ndarray, bits: int = 8) -> None:
    Path(path).write_bytes(pgm_bytes(img, bits))


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    return parse_pgm(data)


def parse_pgm(data: bytes) -> np.ndarray:
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PGM header")
        fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise ImageFormatError(f"unsupported PGM magic {fields[0]!r}")
    w, h, maxval = (int(f) for f in fields[1:])
    pos += 1
    if maxval < 256:
        raw = np.frombuffer(data, np.uint8, w * h, pos)
    elif maxval < 65536:
        raw = np.frombuffer(data, ">u2", w * h, pos)
    else:
        raise ImageFormatError(f"unsupported maxval {maxval}")
    return raw.reshape(h, w).astype(np.float64) / maxval


def png_bytes(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(to_uint(img, 8), mode="L").save(buf, format="PNG", optimize=False, compress_level=6)
    return buf.getvalue()


def write_png(path, img: np.ndarray) -> None:
    Path(path).write_bytes(png_bytes(img))


def read_image(path) -> np.ndarray:
    """Load PGM or PNG as uint8 (H, W) gray or (H, W, 3) RGB.

    16-bit inputs raise :class:`ImageFormatError`.
    """
    path = Path(path)
    head = path.read_bytes()[:2]
    if head == b"P5":
        img = read_pgm(path)
        return to_uint(img, 8)
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I", "F"):
            raise ImageFormatError(f"unsupported bit depth (mode {im.mode})")
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint8).copy()
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_image(path, img: np.ndarray, bits: int = 8) -> None:
    suffix = Path(path).suffix.lower()
    if suffix == ".png":
        write_png(path, img)
    elif suffix in (".pgm", ".pnm"):
        write_pgm(path, img, bits)
    else:
        raise ImageFormatError(f"unknown image extension {suffix!r}")


def depth_to_gray(depth: np.ndarray) -> np.ndarray:
    """Map finite depths to [0, 0.9] (near dark), background to 1."""
    finite = np.isfinite(depth)
    out = np.ones_like(depth)
    if finite.any():
        lo, hi = depth[finite].min(), depth[finite].max()
        out[finite] = 0.9 * (depth[finite] - lo) / max(hi - lo, 1e-12)
    return out
