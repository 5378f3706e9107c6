"""Command line entry point: ``omnitile <command> ...``.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import shlex
import subprocess
import sys
from pathlib import Path

from . import layout, metrics, optimizer, projector
from .imageio import image_format, parse_size, read_image, write_image
from .scheme import (
    InvalidSchemeError,
    PoleStyle,
    Projection,
    TileScheme,
    baseline_ratio,
    yu_equal_division_ratio,
)

log = logging.getLogger("omnitile")

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(payload: dict, text: str, as_json: bool) -> None:
    if as_json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def _sigma_from_percent(pct: float) -> float:
    if not math.isfinite(pct) or pct < 0:
        raise UsageError(f"--overlap must be a non-negative percentage, got {pct}")
    return pct / 100.0


def _n_cuts(tiles: int) -> int:
    if tiles < 3 or tiles % 2 == 0:
        raise UsageError(f"--tiles must be an odd number >= 3 (got {tiles}); a scheme has 2n+1 tiles")
    return (tiles - 1) // 2


def _optimize(tiles: int, pole: str, overlap_pct: float) -> optimizer.OptimizationResult:
    n = _n_cuts(tiles)
    sigma = _sigma_from_percent(overlap_pct)
    try:
        optimizer.check_feasible(n, sigma)
    except InvalidSchemeError as exc:
        raise UsageError(str(exc)) from None
    return optimizer.optimize_cuts(n, pole, sigma)


def _format_cuts(cuts_deg) -> str:
    return " ".join(f"θ{i}={c:.2f}°" for i, c in enumerate(cuts_deg, 1))


def cmd_optimize(args) -> int:
    res = _optimize(args.tiles, args.pole, args.overlap)
    cuts = [round(c, 2) for c in res.scheme.cuts_deg]
    payload = {
        "tiles": res.n_tiles,
        "pole": res.scheme.pole.value,
        "sigma": res.scheme.sigma,
        "cuts_deg": cuts,
        "area_ratio": round(res.area.ratio_to_sphere, 6),
        "converged": res.converged,
    }
    text = f"{_format_cuts(cuts)}\narea ratio {res.area.ratio_to_sphere:.4f} ({100 * res.area.ratio_to_sphere:.1f}% of sphere)"
    if not res.converged:
        text += "\nwarning: optimizer did not converge"
    _emit(payload, text, args.json)
    return 0


def cmd_sweep(args) -> int:
    if args.max_cuts < 1:
        raise UsageError("--max-cuts must be >= 1")
    sigma = _sigma_from_percent(args.overlap)
    try:
        optimizer.check_feasible(args.max_cuts, sigma)
    except InvalidSchemeError as exc:
        raise UsageError(str(exc)) from None
    rows = [optimizer.optimize_cuts(n, args.pole, sigma) for n in range(1, args.max_cuts + 1)]
    converged = [r for r in rows if r.converged] or rows
    best = min(converged, key=lambda r: (r.area.total_area, r.n_tiles))
    payload = {
        "pole": PoleStyle.parse(args.pole).value,
        "sigma": sigma,
        "rows": [{"cuts": r.scheme.n_cuts, "tiles": r.n_tiles, "area_ratio": round(r.area.ratio_to_sphere, 6),
                  "converged": r.converged} for r in rows],
        "best_tiles": best.n_tiles,
    }
    lines = [f"{'cuts':>4} {'tiles':>5} {'ratio':>8}"]
    lines += [f"{r.scheme.n_cuts:>4} {r.n_tiles:>5} {r.area.ratio_to_sphere:8.5f}{'' if r.converged else ' *'}"
              for r in rows]
    lines.append(f"best: {best.n_tiles} tiles")
    _emit(payload, "\n".join(lines), args.json)
    return 0


def compare_area_rows() -> list[tuple[str, float]]:
    proposed = optimizer.optimize_cuts(2, PoleStyle.SQUARE, 0.0)
    return [
        ("equirectangular", baseline_ratio(Projection.EQUIRECTANGULAR)),
        ("cubic", baseline_ratio(Projection.CUBIC)),
        ("tile, equal division (5 tiles)", yu_equal_division_ratio(2)),
        ("proposed tile (5 tiles)", proposed.area.ratio_to_sphere),
    ]


def cmd_compare_area(args) -> int:
    rows = compare_area_rows()
    payload = {"rows": [{"projection": name, "ratio": round(r, 6), "percent": round(100 * r)} for name, r in rows]}
    text = "\n".join(f"{name:<32} {100 * r:6.1f}%  ({round(100 * r)}%)" for name, r in rows)
    _emit(payload, text, args.json)
    return 0


def _parse_inline_scheme(text: str) -> TileScheme:
    fields = {}
    for part in text.split(";"):
        if not part.strip():
            continue
        key, sep, value = part.partition("=")
        if not sep:
            raise UsageError(f"inline scheme entries look like key=value, got {part!r}")
        fields[key.strip()] = value.strip()
    if "cuts" not in fields:
        raise UsageError("inline scheme needs cuts=<deg>,<deg>,...")
    try:
        cuts = [float(c) for c in fields["cuts"].split(",")]
        sigma = _sigma_from_percent(float(fields.get("overlap", 0)))
        return TileScheme.from_degrees(cuts, fields.get("pole", "square"), sigma)
    except ValueError as exc:
        raise UsageError(f"bad inline scheme: {exc}") from None


def _load_scheme(args) -> TileScheme:
    if args.scheme:
        path = Path(args.scheme)
        if path.exists():
            data = json.loads(path.read_text())
            try:
                return TileScheme.from_dict(data.get("scheme", data))
            except (KeyError, ValueError) as exc:
                raise UsageError(f"{path}: invalid scheme: {exc}") from None
        return _parse_inline_scheme(args.scheme)
    if args.tiles is None:
        raise UsageError("give either --scheme or --tiles")
    return _optimize(args.tiles, args.pole, args.overlap).scheme


def _size(args):
    if getattr(args, "size", None) is None:
        return None
    try:
        return parse_size(args.size)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _read(path, args, size=None):
    fmt = args.pix_fmt or image_format(path)
    if fmt == "yuv420" and size is None:
        raise UsageError("raw YUV input needs --size WIDTHxHEIGHT")
    return read_image(path, fmt, size, getattr(args, "frame", 0))


def _run_encoder(template: str, path: Path) -> None:
    cmd = template.format(input=str(path), output=str(path.with_suffix(".hevc")))
    log.info("running encoder: %s", cmd)
    subprocess.run(shlex.split(cmd), check=True)


def cmd_project(args) -> int:
    size = _size(args)
    if args.to == "tiles":
        scheme = _load_scheme(args)
    img = _read(args.input, args, size)
    fmt = args.pix_fmt or image_format(args.input)
    ext = {"yuv420": ".yuv", "ppm": ".ppm"}.get(fmt, ".png")
    if args.in_format == "cubic":
        face = img.width // projector.CUBE_GRID[0]
        height = math.ceil(face * math.pi / 2)
        img = projector.cubemap_to_equirect(img, 2 * height, height, args.jobs)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    if args.to == "cubic":
        cube = projector.equirect_to_cubemap(img, None, args.jobs)
        path = out / f"cubemap{ext}"
        write_image(cube, path, fmt)
        meta = {"face_size": cube.width // 3, "faces": ["+x", "-x", "+y", "-y", "+z", "-z"], "grid": [3, 2],
                "source_w": img.width, "source_h": img.height}
        (out / "cubemap.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        written.append(path)
    else:
        density = projector.DensityRule.from_equirect_height(img.height)
        tiles = projector.plan_tiles(scheme, density)
        manifest = layout.pack(tiles, scheme)
        images = projector.equirect_to_tiles(img, tiles, args.jobs)
        if args.pack:
            path = out / f"canvas{ext}"
            write_image(layout.compose(images, manifest), path, fmt)
            written.append(path)
        else:
            for t, im in zip(tiles, images):
                path = out / f"tile_{t.id:02d}_{t.label}{ext}"
                write_image(im, path, fmt)
                written.append(path)
        (out / "manifest.json").write_text(manifest.to_json())
        log.info("%d tiles, canvas %dx%d, waste %.1f%%", len(tiles), manifest.canvas_w, manifest.canvas_h,
                 100 * manifest.waste_ratio)
    if args.encoder_cmd:
        for path in written:
            _run_encoder(args.encoder_cmd, path)
    for path in written:
        print(path)
    return 0


def _tile_files(directory: Path) -> list[Path]:
    files = sorted(p for p in directory.iterdir() if p.name.startswith("tile_") and p.suffix != ".hevc")
    if not files:
        raise FileNotFoundError(f"no tile_* images in {directory}")
    return files


def cmd_unproject(args) -> int:
    if args.width < 1 or args.height < 1:
        raise UsageError("--width and --height must be positive")
    out_fmt = args.out_fmt or image_format(args.output)
    if args.in_format == "cubic":
        img = _read(args.input, args, _size(args))
        result = projector.cubemap_to_equirect(img, args.width, args.height, args.jobs)
    else:
        if not args.manifest:
            raise UsageError("--manifest is required for tile input")
        manifest = layout.LayoutManifest.from_json(Path(args.manifest).read_text())
        tiles = layout.plan_from_manifest(manifest)
        src = Path(args.input)
        if src.is_dir():
            files = _tile_files(src)
            if len(files) != len(tiles):
                raise projector.GeometryError(f"found {len(files)} tile images, manifest has {len(tiles)}")
            images = []
            for f, t in zip(files, tiles):
                fmt = args.pix_fmt or image_format(f)
                images.append(read_image(f, fmt, (t.width_px, t.height_px) if fmt == "yuv420" else None))
        else:
            size = _size(args) or (manifest.canvas_w, manifest.canvas_h)
            images = layout.unpack(_read(src, args, size), manifest)
        result = projector.tiles_to_equirect(images, tiles, args.width, args.height, blend=args.blend,
                                             n_jobs=args.jobs)
    write_image(result, args.output, out_fmt)
    print(args.output)
    return 0


def _metric_inputs(args):
    size = _size(args)
    return _read(args.ref, args, size), _read(args.test, args, size)


def _fmt_db(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.4f}"


def cmd_metrics(args) -> int:
    if args.metric == "bdrate":
        val = metrics.bd_rate(metrics.read_rd_curve(args.anchor), metrics.read_rd_curve(args.test))
        _emit({"metric": "bdrate", "percent": round(val, 6)}, f"BD-rate: {val:+.2f}%", args.json)
        return 0
    if args.samples < 2:
        raise UsageError("--samples must be >= 2")
    ref, test = _metric_inputs(args)
    samples = metrics.build_sampleset(args.samples)
    if args.metric == "spsnr":
        val = metrics.spsnr(ref, test, samples, include_chroma=args.chroma)
        label = "S-PSNR"
    else:
        table = metrics.WeightTable.read(args.weights) if args.weights else metrics.WeightTable.cos_latitude()
        val = metrics.lpsnr(ref, test, samples, table, include_chroma=args.chroma)
        label = "L-PSNR"
    _emit({"metric": args.metric, "db": "inf" if math.isinf(val) else round(val, 6)},
          f"{label}: {_fmt_db(val)} dB", args.json)
    return 0


def _add_scheme_flags(p, required: bool) -> None:
    p.add_argument("--tiles", type=int, required=required, help="odd tile count (2n+1)")
    p.add_argument("--pole", choices=[s.value for s in PoleStyle], default="square")
    p.add_argument("--overlap", type=float, default=0.0, help="overlap in percent of frame height (0.5 = 0.5%%)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="omnitile", description="Tile segmentation for omnidirectional frames.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("optimize", help="optimal cut latitudes for a tile count")
    _add_scheme_flags(p, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="optimal area for every cut count up to --max-cuts")
    p.add_argument("--max-cuts", type=int, default=25)
    p.add_argument("--pole", choices=[s.value for s in PoleStyle], default="square")
    p.add_argument("--overlap", type=float, default=0.0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare-area", help="area of classic projections vs tiles")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_compare_area)

    p = sub.add_parser("project", help="equirect frame -> tiles, packed canvas or cube map")
    p.add_argument("--input", required=True)
    p.add_argument("--in-format", choices=["equirect", "cubic"], default="equirect")
    p.add_argument("--pix-fmt", choices=["png", "ppm", "yuv420"])
    p.add_argument("--size", help="WIDTHxHEIGHT for raw YUV input")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--scheme", help="scheme/manifest JSON file or inline 'cuts=35.07,53.17;pole=square;overlap=0.5'")
    _add_scheme_flags(p, required=False)
    p.add_argument("--to", choices=["tiles", "cubic"], default="tiles")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--pack", action="store_true", help="write one packed canvas")
    p.add_argument("--encoder-cmd", help="external encoder run per output, with {input} and {output} placeholders")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("unproject", help="tiles, canvas or cube map -> equirect frame")
    p.add_argument("--input", required=True, help="canvas image, tile directory or cube map")
    p.add_argument("--in-format", choices=["tiles", "cubic"], default="tiles")
    p.add_argument("--manifest")
    p.add_argument("--output", required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--blend", action="store_true", help="blend overlap bands")
    p.add_argument("--pix-fmt", choices=["png", "ppm", "yuv420"])
    p.add_argument("--out-fmt", choices=["png", "ppm", "yuv420"])
    p.add_argument("--size", help="WIDTHxHEIGHT for raw YUV input")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_unproject)

    p = sub.add_parser("metrics", help="S-PSNR, L-PSNR or BD-rate")
    msub = p.add_subparsers(dest="metric", required=True, parser_class=_Parser)
    for name in ("spsnr", "lpsnr"):
        m = msub.add_parser(name)
        m.add_argument("--ref", required=True)
        m.add_argument("--test", required=True)
        m.add_argument("--samples", type=int, default=metrics.DEFAULT_SAMPLES)
        m.add_argument("--chroma", action="store_true", help="include chroma, 6:1:1")
        m.add_argument("--pix-fmt", choices=["png", "ppm", "yuv420"])
        m.add_argument("--size")
        m.add_argument("--frame", type=int, default=0)
        m.add_argument("--json", action="store_true")
        if name == "lpsnr":
            m.add_argument("--weights", help="'latitude_degrees weight' table; default cos(latitude)")
        m.set_defaults(func=cmd_metrics)
    m = msub.add_parser("bdrate")
    m.add_argument("--anchor", required=True, help="CSV bitrate_kbps,psnr_db")
    m.add_argument("--test", required=True)
    m.add_argument("--json", action="store_true")
    m.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"omnitile: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, subprocess.CalledProcessError, json.JSONDecodeError) as exc:
        print(f"omnitile: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
