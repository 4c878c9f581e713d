"""Command-line front end."""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import platform
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import PIL
import scipy

from . import __version__
from .evaluation import EvalError, chamfer, coverage_from_mask, darkness_from_mask, format_json, format_report
from .geometry.camera import Camera, parse_vec3
from .geometry.contours import format_contours, project_contours
from .geometry.mesh import Mesh, load_mesh
from .hatching import HatchParams
from .pipeline import DrawParams, hatched_drawing, line_drawing, object_lines, rim_drawing, valley_drawing
from .raster_io import depth_to_gray, read_image, write_image
from .render import MaterialConfig, parse_light, render
from .strokes import DrawingDocument, Stroke, compose, format_drawing, rasterize_drawing, read_drawing, to_svg
from .valleys import detect_valleys, luminance

EXIT_USAGE = 2
EXIT_FAILURE = 1


class UsageError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except (StageError, UsageError):
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _vec3(text: str):
    try:
        return parse_vec3(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_camera(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mesh", required=True, help="Wavefront OBJ file")
    p.add_argument("--camera", type=_vec3, help="camera position x,y,z (default: in front of the mesh along +z)")
    p.add_argument("--lookat", type=_vec3, help="look-at point (default: mesh centroid)")
    p.add_argument("--up", type=_vec3, help="up vector (default: +y unless nearly parallel to the view)")
    p.add_argument("--fov", type=float, default=30.0, help="vertical field of view, degrees")
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)


def _add_draw(p: argparse.ArgumentParser) -> None:
    d = DrawParams()
    p.add_argument("--tau", type=float, default=d.tau, help="darkness threshold for suggestive strokes")
    p.add_argument("--sigma", type=float, default=d.sigma, help="valley detector scale, px")
    p.add_argument("--tmin", type=float, default=d.t_min, help="minimum stroke thickness, px")
    p.add_argument("--tmax", type=float, default=d.t_max, help="maximum stroke thickness, px")
    p.add_argument("--min-strength", type=float, default=d.min_strength)
    p.add_argument("--min-length", type=float, default=d.min_length, help="shortest valley chain kept, px")
    p.add_argument("--supersample", type=int, default=4, choices=(1, 2, 4), help="PNG antialiasing")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="valleydraw", description="Line drawings from the dark valleys of shaded renders.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="shade a mesh")
    _add_camera(p)
    p.add_argument("--out", required=True, help="output path or prefix (.png or .pgm)")
    p.add_argument("--light", default="headlight", help="headlight | point:x,y,z | ring:n[,r]")
    p.add_argument("--specular", type=float, default=0.0, help="specular strength")
    p.add_argument("--exponent", type=float, default=32.0, help="specular exponent")
    p.add_argument("--shadows", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--supersample", type=int, default=1, choices=(1, 2, 4))

    p = sub.add_parser("contours", help="extract occluding contours and feature edges")
    _add_camera(p)
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--crease-angle", type=float, default=30.0)
    p.add_argument("--hidden", action="store_true", help="keep hidden pieces (tagged /hidden)")
    p.add_argument("--overlay", action="store_true", help="also write the lines over the render")

    p = sub.add_parser("draw", help="contours and suggestive contours")
    _add_camera(p)
    _add_draw(p)
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--crease-angle", type=float, default=30.0)
    p.add_argument("--suggestive-scale", type=float, default=1.0, help="thickness multiplier for suggestive strokes")

    p = sub.add_parser("trace", help="valley strokes of a photograph")
    p.add_argument("--image", required=True, help="PGM or PNG input")
    _add_draw(p)
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--dump-valleys", action="store_true",
                   help="also write the valley strength, orientation and mask as PGM")

    p = sub.add_parser("hatch", help="draw plus curvature-aligned hatching")
    _add_camera(p)
    _add_draw(p)
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--crease-angle", type=float, default=30.0)
    p.add_argument("--suggestive-scale", type=float, default=1.0)
    h = HatchParams()
    p.add_argument("--spacing", type=float, default=h.spacing)
    p.add_argument("--t1", type=float, default=h.t1, help="hatch where I < t1")
    p.add_argument("--t2", type=float, default=h.t2, help="cross-hatch where I < t2")
    p.add_argument("--cross", action="store_true", help="add the perpendicular second level")
    p.add_argument("--seed", type=int, default=h.seed)
    p.add_argument("--direction", choices=("d1", "d2"), default="d1", help="principal direction to follow")

    p = sub.add_parser("rim", help="white strokes along the bright rims of a ring-lit render")
    _add_camera(p)
    _add_draw(p)
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--light", default="ring:8", help="ring:n[,r]")

    p = sub.add_parser("eval", help="metrics for a drawing against a mesh's headlight render")
    _add_camera(p)
    p.add_argument("--drawing", required=True, help="stroke document (.strokes.txt) or raster drawing")
    p.add_argument("--invert", action="store_true", help="pixel-invert a raster drawing before scoring")
    p.add_argument("--radius", type=float, default=2.0, help="contour coverage radius, px")
    p.add_argument("--json", help="also write the report as JSON to this path")
    return ap


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _versions() -> dict:
    return {"valleydraw": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "Pillow": PIL.__version__, "python": platform.python_version()}


def _require(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _prefix(out: str, suffixes=(".svg", ".png", ".pgm", ".txt")) -> Path:
    p = Path(out)
    if p.suffix.lower() in suffixes:
        p = p.with_suffix("")
    if not p.parent.exists():
        raise UsageError(f"output directory does not exist: {p.parent}")
    return p


def _camera(args, mesh: Mesh) -> Camera:
    target = args.lookat if args.lookat is not None else tuple(mesh.centroid)
    center = args.camera
    if center is None:
        center = tuple(np.asarray(target) + np.array([0.0, 0.0, 2.5 * mesh.bbox_diagonal]))
    return Camera.looking_at(center, target, up=args.up, vertical_fov=args.fov, width=args.width, height=args.height)


def _load(args) -> tuple[Mesh, Camera]:
    path = _require(args.mesh, "mesh")
    with stage("load"):
        mesh = load_mesh(path)
    with stage("camera"):
        cam = _camera(args, mesh)
    return mesh, cam


def _draw_params(args) -> DrawParams:
    return DrawParams(tau=args.tau, sigma=args.sigma, min_strength=args.min_strength, t_min=args.tmin,
                      t_max=args.tmax, crease_angle=getattr(args, "crease_angle", 30.0),
                      min_length=args.min_length, suggestive_scale=getattr(args, "suggestive_scale", 1.0))


def _write_manifest(prefix: Path, args, argv, inputs: list[Path], outputs: list[Path], extra: dict | None = None) -> Path:
    params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items())}
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "parameters": params,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {p.name: _sha256(p) for p in outputs},
        "versions": _versions(),
    }
    if extra:
        manifest.update(extra)
    path = prefix.with_name(prefix.name + ".manifest")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _save_document(prefix: Path, doc: DrawingDocument, supersample: int) -> list[Path]:
    svg = prefix.with_name(prefix.name + ".svg")
    png = prefix.with_name(prefix.name + ".png")
    txt = prefix.with_name(prefix.name + ".strokes.txt")
    with stage("write"):
        svg.write_text(to_svg(doc))
        write_image(png, rasterize_drawing(doc, supersample))
        txt.write_text(format_drawing(doc))
    return [svg, png, txt]


def cmd_render(args, argv) -> int:
    mesh, cam = _load(args)
    with stage("render"):
        light = parse_light(args.light)
        if args.shadows is not None:
            light = replace(light, shadows=args.shadows)
        material = MaterialConfig(specular_strength=args.specular, specular_exponent=args.exponent)
        lum, depth = render(mesh, cam, material, light, supersample=args.supersample)
    out = Path(args.out)
    if out.suffix.lower() in (".png", ".pgm"):
        image_path = out
        prefix = out.with_suffix("")
    else:
        prefix = _prefix(args.out)
        image_path = prefix.with_name(prefix.name + ".png")
    depth_path = prefix.with_name(prefix.name + ".depth.pgm")
    with stage("write"):
        write_image(image_path, lum)
        write_image(depth_path, depth_to_gray(depth), bits=16)
    _write_manifest(prefix, args, argv, [Path(args.mesh)], [image_path, depth_path])
    return 0


def cmd_contours(args, argv) -> int:
    mesh, cam = _load(args)
    prefix = _prefix(args.out)
    with stage("render"):
        lum, depth = render(mesh, cam)
    with stage("contours"):
        lines = object_lines(mesh, cam, depth, args.crease_angle, keep_hidden=args.hidden)
    outputs = [prefix.with_name(prefix.name + ".txt")]
    with stage("write"):
        outputs[0].write_text(format_contours(lines))
        if args.overlay:
            strokes = [Stroke(p, 1.0, tag) for tag, p in project_contours(lines, cam)]
            ink = rasterize_drawing(compose(strokes, width=cam.width, height=cam.height), 2)
            outputs.append(prefix.with_name(prefix.name + ".overlay.png"))
            write_image(outputs[-1], np.minimum(lum, ink))
    _write_manifest(prefix, args, argv, [Path(args.mesh)], outputs, {"stats": dict(sorted(lines.stats.items()))})
    return 0


def cmd_draw(args, argv) -> int:
    mesh, cam = _load(args)
    prefix = _prefix(args.out)
    with stage("draw"):
        drawing = line_drawing(mesh, cam, _draw_params(args))
    outputs = _save_document(prefix, drawing.document, args.supersample)
    _write_manifest(prefix, args, argv, [Path(args.mesh)], outputs)
    return 0


def cmd_trace(args, argv) -> int:
    path = _require(args.image, "image")
    prefix = _prefix(args.out)
    with stage("load"):
        img = read_image(path)
        lum = luminance(img)
    with stage("valleys"):
        params = _draw_params(args)
        vmap = detect_valleys(lum, params.sigma, params.tau, params.min_strength)
        doc, _ = valley_drawing(lum, params, vmap=vmap)
    outputs = _save_document(prefix, doc, args.supersample)
    if args.dump_valleys:
        with stage("write"):
            outputs += [Path(p) for p in vmap.dump(prefix.with_name(prefix.name + ".valleys"))]
    _write_manifest(prefix, args, argv, [path], outputs)
    return 0


def cmd_hatch(args, argv) -> int:
    mesh, cam = _load(args)
    prefix = _prefix(args.out)
    with stage("hatch"):
        hp = HatchParams(spacing=args.spacing, t1=args.t1, t2=args.t2, levels=2 if args.cross else 1, seed=args.seed)
        drawing, _ = hatched_drawing(mesh, cam, _draw_params(args), hp, use_d2=args.direction == "d2")
    outputs = _save_document(prefix, drawing.document, args.supersample)
    _write_manifest(prefix, args, argv, [Path(args.mesh)], outputs, {"hatch_seed": args.seed})
    return 0


def cmd_rim(args, argv) -> int:
    mesh, cam = _load(args)
    prefix = _prefix(args.out)
    with stage("render"):
        light = parse_light(args.light)
        if light.mode != "ring":
            raise UsageError("rim needs a ring light (ring:n[,r])")
    with stage("rim"):
        drawing = rim_drawing(mesh, cam, _draw_params(args), light)
    outputs = _save_document(prefix, drawing.document, args.supersample)
    _write_manifest(prefix, args, argv, [Path(args.mesh)], outputs)
    return 0


def cmd_eval(args, argv) -> int:
    drawing_path = _require(args.drawing, "drawing")
    mesh, cam = _load(args)
    with stage("render"):
        lum, depth = render(mesh, cam)
        lines = object_lines(mesh, cam, depth)
    with stage("eval"):
        doc = None
        if drawing_path.name.endswith(".txt"):
            doc = read_drawing(drawing_path)
            ink = rasterize_drawing(doc, 1) == doc.ink
        else:
            img = read_image(drawing_path)
            gray = luminance(img) if img.ndim == 3 else img.astype(float) / 255.0
            if args.invert:
                gray = 1.0 - gray
            ink = gray < 0.5
        if ink.shape != lum.shape:
            raise EvalError(f"drawing is {ink.shape[1]}x{ink.shape[0]}, render is {lum.shape[1]}x{lum.shape[0]}")
        dk = darkness_from_mask(ink, lum, np.isfinite(depth))
        metrics = {
            "darkness_under_ink": dk.mean_under_ink,
            "darkness_elsewhere": dk.mean_elsewhere,
            "darkness_ratio": dk.ratio,
            "contour_coverage": coverage_from_mask(ink, [p for _, p in project_contours(lines, cam)], args.radius),
            "ink_pixels": int(ink.sum()),
        }
        if doc is not None and doc.strokes:
            mean, worst = chamfer([s.points for s in doc.strokes], [p for _, p in project_contours(lines, cam)])
            metrics["chamfer_mean"] = mean
            metrics["chamfer_max"] = worst
    sys.stdout.write(format_report(metrics))
    if args.json:
        Path(args.json).write_text(format_json(metrics))
    return 0


COMMANDS = {"render": cmd_render, "contours": cmd_contours, "draw": cmd_draw, "trace": cmd_trace,
            "hatch": cmd_hatch, "rim": cmd_rim, "eval": cmd_eval}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"valleydraw {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"valleydraw {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
