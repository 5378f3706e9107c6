"""Pixel mappings between equirectangular frames, tile sets and cube maps.

Tiles are ordered top to bottom: north cap, north rings (pole side first),
equator band, south rings, south cap.  Rect tiles map longitude linearly across
their width and latitude linearly down their height.  Caps are azimuthal
equidistant discs inside a square raster: the distance from the raster center
in pixels over the density is the angular distance from the pole.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import (
    HALF_PI,
    TWO_PI,
    PlanarImage,
    bilinear_sample,
    black_value,
    equirect_to_sphere,
    sphere_to_equirect,
    to_uint8,
    wrap_lon,
)
from .scheme import TileScheme


class GeometryError(ValueError):
    """Images or coordinates do not match the planned geometry."""


class TileKind(enum.Enum):
    EQUATOR = "equator"
    RING = "ring"
    CAP = "cap"


@dataclass(frozen=True)
class DensityRule:
    pixels_per_radian: float

    def __post_init__(self):
        if not self.pixels_per_radian > 0:
            raise ValueError("density must be strictly positive")

    @classmethod
    def from_equirect_height(cls, height: int) -> "DensityRule":
        return cls(height / math.pi)


@dataclass(frozen=True)
class TileGeometry:
    """Placement of one tile on the sphere and its raster size.

    ``lat_lo``/``lat_hi`` include the overlap extension; ``core_lo``/``core_hi``
    are the cut latitudes the tile owns without overlap.
    """

    id: int
    kind: TileKind
    hemisphere: str | None
    ring: int | None
    lat_lo: float
    lat_hi: float
    core_lo: float
    core_hi: float
    width_px: int
    height_px: int
    density: float

    @property
    def label(self) -> str:
        if self.kind is TileKind.EQUATOR:
            return "equator"
        if self.kind is TileKind.RING:
            return f"ring-{self.hemisphere}{self.ring}"
        return f"cap-{self.hemisphere}"

    @property
    def shape(self) -> str:
        return "disc" if self.kind is TileKind.CAP else "rect"

    @property
    def cap_radius(self) -> float:
        """Angular radius of the cap disc, radians."""
        return self.lat_hi - self.lat_lo

    @property
    def area_px(self) -> int:
        return self.width_px * self.height_px


def _ceil_px(x: float) -> int:
    return int(math.ceil(x - 1e-9))


def _even(n: int) -> int:
    return n + (n % 2)


def plan_tiles(scheme: TileScheme, density: DensityRule | float) -> list[TileGeometry]:
    """Raster sizes for every tile of ``scheme`` at a common minimum density.

    Core extents round up to even pixel counts; each overlapped border then
    adds ``ceil(d * sigma * pi / 2)`` rows to both tiles that share it.
    """
    d = density.pixels_per_radian if isinstance(density, DensityRule) else float(density)
    cuts = scheme.cuts
    n = len(cuts)
    ext = scheme.overlap_extension
    ext_px = _ceil_px(d * ext) if ext > 0 else 0

    specs = []  # (kind, hemisphere, ring, core_lo, core_hi, width, core_rows, borders)
    cap_side = _even(_ceil_px(2 * d * (HALF_PI - cuts[-1]))) + 2 * ext_px
    specs.append((TileKind.CAP, "N", None, cuts[-1], HALF_PI, cap_side, None, 1))
    for i in range(n - 1, 0, -1):
        w = _even(_ceil_px(d * TWO_PI * math.cos(cuts[i - 1])))
        specs.append((TileKind.RING, "N", i + 1, cuts[i - 1], cuts[i], w,
                      _even(_ceil_px(d * (cuts[i] - cuts[i - 1]))), 2))
    specs.append((TileKind.EQUATOR, None, None, -cuts[0], cuts[0], _even(_ceil_px(d * TWO_PI)),
                  _even(_ceil_px(d * 2 * cuts[0])), 2))
    for i in range(1, n):
        w = _even(_ceil_px(d * TWO_PI * math.cos(cuts[i - 1])))
        specs.append((TileKind.RING, "S", i + 1, -cuts[i], -cuts[i - 1], w,
                      _even(_ceil_px(d * (cuts[i] - cuts[i - 1]))), 2))
    specs.append((TileKind.CAP, "S", None, -HALF_PI, -cuts[-1], cap_side, None, 1))

    tiles = []
    for tid, (kind, hemi, ring, core_lo, core_hi, w, rows, borders) in enumerate(specs):
        if kind is TileKind.CAP:
            lat_lo, lat_hi = (core_lo - ext, core_hi) if hemi == "N" else (core_lo, core_hi + ext)
            h = w
        else:
            lat_lo, lat_hi = core_lo - ext, core_hi + ext
            h = rows + borders * ext_px
        if w < 1 or h < 1:
            raise GeometryError(f"tile {tid} ({kind.value}) has zero size; cuts are degenerate")
        tiles.append(TileGeometry(tid, kind, hemi, ring, lat_lo, lat_hi, core_lo, core_hi, w, h, d))
    return tiles


def _cap_signs(tile: TileGeometry) -> tuple[float, float]:
    # north: lon increases counterclockwise from "up"; south: clockwise
    return (-1.0, 1.0) if tile.hemisphere == "N" else (1.0, -1.0)


def tile_inverse(tile: TileGeometry, x, y, *, check: bool = True):
    """Tile raster position -> ``(lat, lon, valid)``.

    ``valid`` is False for cap-corner pixels outside the disc (black fill).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if check and (np.any(x < 0) or np.any(x > tile.width_px) or np.any(y < 0) or np.any(y > tile.height_px)):
        raise GeometryError(f"point outside the {tile.width_px}x{tile.height_px} raster of tile {tile.id}")
    if tile.kind is not TileKind.CAP:
        lon = wrap_lon(TWO_PI * (x / tile.width_px) - np.pi)
        lat = tile.lat_hi - (y / tile.height_px) * (tile.lat_hi - tile.lat_lo)
        return lat, lon, np.ones(np.broadcast_shapes(x.shape, y.shape), dtype=bool)

    c = tile.width_px / 2
    dx, dy = x - c, y - c
    rho = np.hypot(dx, dy) / tile.density
    sx, sy = _cap_signs(tile)
    alpha = np.mod(np.arctan2(sx * dx, -dy), TWO_PI)
    lon = np.where(rho > 0, wrap_lon(alpha - np.pi), 0.0)
    lat = HALF_PI - rho if tile.hemisphere == "N" else -HALF_PI + rho
    valid = rho <= tile.cap_radius * (1 + 1e-12)
    return lat, lon, valid


def tile_forward(tile: TileGeometry, lat, lon):
    """Sphere -> continuous pixel position on the tile raster."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    if tile.kind is not TileKind.CAP:
        x = (wrap_lon(lon) + np.pi) / TWO_PI * tile.width_px
        y = (tile.lat_hi - lat) / (tile.lat_hi - tile.lat_lo) * tile.height_px
        return x, y
    rho = (HALF_PI - lat) if tile.hemisphere == "N" else (lat + HALF_PI)
    r = rho * tile.density
    alpha = lon + np.pi
    sx, _ = _cap_signs(tile)
    c = tile.width_px / 2
    return c + sx * np.sin(alpha) * r, c - np.cos(alpha) * r


def cap_mask(tile: TileGeometry) -> np.ndarray:
    """Texels of a cap raster whose centers lie on the disc."""
    ys, xs = np.meshgrid(np.arange(tile.height_px) + 0.5, np.arange(tile.width_px) + 0.5, indexing="ij")
    return tile_inverse(tile, xs, ys, check=False)[2]


def _pixel_grid(width: int, rows: range):
    ys, xs = np.meshgrid(np.arange(rows.start, rows.stop) + 0.5, np.arange(width) + 0.5, indexing="ij")
    return xs, ys


def _row_chunks(height: int, n_jobs: int | None) -> list[range]:
    jobs = max(1, n_jobs or 1)
    step = max(1, -(-height // (jobs * 4)))
    return [range(r, min(r + step, height)) for r in range(0, height, step)]


def _render(width: int, height: int, planes: int, fn, n_jobs: int | None = None) -> np.ndarray:
    """Evaluate ``fn(rows) -> (planes, len(rows), width)`` over disjoint row chunks."""
    out = np.empty((planes, height, width), dtype=np.uint8)
    chunks = _row_chunks(height, n_jobs)

    def run(rows):
        out[:, rows.start:rows.stop] = fn(rows)

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(run, chunks))
    else:
        for rows in chunks:
            run(rows)
    return out


def equirect_to_tiles(img: PlanarImage, tiles: Sequence[TileGeometry], n_jobs: int | None = None) -> list[PlanarImage]:
    """Resample an equirectangular frame onto every planned tile."""
    fill = np.asarray(black_value(img.color), dtype=float)[:, None, None]
    out = []
    for tile in tiles:
        def fn(rows, tile=tile):
            xs, ys = _pixel_grid(tile.width_px, rows)
            lat, lon, valid = tile_inverse(tile, xs, ys, check=False)
            px, py = sphere_to_equirect(lat, lon, img.width, img.height)
            vals = bilinear_sample(img, px, py, wrap_x=True)
            return to_uint8(np.where(valid[None], vals, fill))

        out.append(PlanarImage(_render(tile.width_px, tile.height_px, img.planes, fn, n_jobs), img.color))
    return out


def _check_tiles(tile_images: Sequence[PlanarImage], tiles: Sequence[TileGeometry]) -> None:
    if len(tile_images) != len(tiles):
        raise GeometryError(f"expected {len(tiles)} tile images, got {len(tile_images)}")
    for im, t in zip(tile_images, tiles):
        if im is None:
            raise GeometryError(f"missing image for tile {t.id}")
    colors = {im.color for im in tile_images}
    if len(colors) != 1:
        raise GeometryError(f"tile images mix color models {sorted(colors)}")
    for im, t in zip(tile_images, tiles):
        if (im.width, im.height) != (t.width_px, t.height_px):
            raise GeometryError(
                f"tile {t.id} image is {im.width}x{im.height}, plan expects {t.width_px}x{t.height_px}"
            )


def tile_weights(tile: TileGeometry, lat: np.ndarray, ext: float, blend: bool) -> np.ndarray:
    """Reconstruction weight of ``tile`` at each latitude.

    With blending the weight ramps linearly across the shared band
    ``[border - ext, border + ext]``; without it ownership switches at the cut.
    """
    w = np.ones_like(lat)
    if tile.core_lo > -HALF_PI:
        b = tile.core_lo
        w = np.minimum(w, np.clip((lat - (b - ext)) / (2 * ext), 0, 1) if blend and ext > 0 else (lat >= b) * 1.0)
    if tile.core_hi < HALF_PI:
        b = tile.core_hi
        w = np.minimum(w, np.clip(((b + ext) - lat) / (2 * ext), 0, 1) if blend and ext > 0 else (lat < b) * 1.0)
    return w


def tiles_to_equirect(tile_images: Sequence[PlanarImage], tiles: Sequence[TileGeometry], width: int, height: int,
                      *, blend: bool = True, n_jobs: int | None = None) -> PlanarImage:
    """Reconstruct an equirectangular frame from decoded tiles."""
    _check_tiles(tile_images, tiles)
    planes = tile_images[0].planes
    # the widest overlap extension present in the plan; all tiles share it
    ext = max(max(t.core_lo - t.lat_lo, t.lat_hi - t.core_hi) for t in tiles)
    masks = [cap_mask(t) if t.kind is TileKind.CAP else None for t in tiles]

    def fn(rows):
        xs, ys = _pixel_grid(width, rows)
        lat, lon = equirect_to_sphere(xs, ys, width, height)
        acc = np.zeros((planes,) + lat.shape)
        wsum = np.zeros(lat.shape)
        for im, t, valid in zip(tile_images, tiles, masks):
            w = tile_weights(t, lat, ext, blend)
            mask = w > 0
            if not mask.any():
                continue
            tx, ty = tile_forward(t, lat[mask], lon[mask])
            vals = bilinear_sample(im, tx, ty, wrap_x=t.kind is not TileKind.CAP, valid=valid)
            acc[:, mask] += vals * w[mask]
            wsum[mask] += w[mask]
        return to_uint8(acc / wsum)

    return PlanarImage(_render(width, height, planes, fn, n_jobs), tile_images[0].color)


def blend_overlaps(tile_images: Sequence[PlanarImage], scheme: TileScheme, density: DensityRule | float,
                   width: int, height: int, n_jobs: int | None = None) -> PlanarImage:
    tiles = plan_tiles(scheme, density)
    return tiles_to_equirect(tile_images, tiles, width, height, blend=True, n_jobs=n_jobs)


# cube faces (+x, -x, +y, -y, +z, -z): normal, image-right axis, image-down axis
CUBE_FACES = (
    ((1, 0, 0), (0, 1, 0), (0, 0, -1)),
    ((-1, 0, 0), (0, -1, 0), (0, 0, -1)),
    ((0, 1, 0), (-1, 0, 0), (0, 0, -1)),
    ((0, -1, 0), (1, 0, 0), (0, 0, -1)),
    ((0, 0, 1), (0, 1, 0), (1, 0, 0)),
    ((0, 0, -1), (0, 1, 0), (-1, 0, 0)),
)
CUBE_GRID = (3, 2)


def cube_face_size(equirect_height: int) -> int:
    """Face edge giving the face center the same density as the equirect frame."""
    return _ceil_px(equirect_height * 2 / math.pi)


def _face_origin(face: int, size: int) -> tuple[int, int]:
    return (face % CUBE_GRID[0]) * size, (face // CUBE_GRID[0]) * size


def _cube_dir(face: int, a, b):
    n, u, v = (np.asarray(e, dtype=float) for e in CUBE_FACES[face])
    return n[:, None] + np.outer(u, a) + np.outer(v, b)


def equirect_to_cubemap(img: PlanarImage, face_size: int | None = None, n_jobs: int | None = None) -> PlanarImage:
    """Resample onto six tangent faces packed in a 3x2 grid."""
    size = face_size or cube_face_size(img.height)
    W, H = CUBE_GRID[0] * size, CUBE_GRID[1] * size

    def fn(rows):
        xs, ys = _pixel_grid(W, rows)
        face = (ys // size).astype(int) * CUBE_GRID[0] + (xs // size).astype(int)
        vals = np.empty((img.planes,) + xs.shape)
        for f in range(6):
            m = face == f
            if not m.any():
                continue
            ox, oy = _face_origin(f, size)
            a = 2 * (xs[m] - ox) / size - 1
            b = 2 * (ys[m] - oy) / size - 1
            d = _cube_dir(f, a, b)
            lat = np.arctan2(d[2], np.hypot(d[0], d[1]))
            lon = np.arctan2(d[1], d[0])
            px, py = sphere_to_equirect(lat, lon, img.width, img.height)
            vals[:, m] = bilinear_sample(img, px, py, wrap_x=True)
        return to_uint8(vals)

    return PlanarImage(_render(W, H, img.planes, fn, n_jobs), img.color)


def cubemap_to_equirect(img: PlanarImage, width: int, height: int, n_jobs: int | None = None) -> PlanarImage:
    size = img.width // CUBE_GRID[0]
    if (img.width, img.height) != (CUBE_GRID[0] * size, CUBE_GRID[1] * size):
        raise GeometryError(f"cube map canvas {img.width}x{img.height} is not a 3x2 grid of square faces")
    faces = [img.data[:, oy:oy + size, ox:ox + size] for ox, oy in (_face_origin(f, size) for f in range(6))]
    normals = np.array([f[0] for f in CUBE_FACES], dtype=float)

    def fn(rows):
        xs, ys = _pixel_grid(width, rows)
        lat, lon = equirect_to_sphere(xs, ys, width, height)
        d = np.stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])
        face = np.argmax(np.tensordot(normals, d, axes=1), axis=0)
        vals = np.empty((img.planes,) + lat.shape)
        for f in range(6):
            m = face == f
            if not m.any():
                continue
            n, u, v = (np.asarray(e, dtype=float) for e in CUBE_FACES[f])
            dm = d[:, m]
            depth = n @ dm
            a = (u @ dm) / depth
            b = (v @ dm) / depth
            vals[:, m] = bilinear_sample(faces[f], (a + 1) / 2 * size, (b + 1) / 2 * size, wrap_x=False)
        return to_uint8(vals)

    return PlanarImage(_render(width, height, img.planes, fn, n_jobs), img.color)


def remap(src, source: str, target: str, *, tiles: Sequence[TileGeometry] | None = None,
          width: int | None = None, height: int | None = None, face_size: int | None = None,
          blend: bool = True, n_jobs: int | None = None):
    """Convert between ``equirect``, ``cubic`` and ``tiles`` representations.

    ``src`` is a single image, or a list of tile images when ``source='tiles'``.
    """
    if source == target:
        raise GeometryError("source and target projections are identical")
    if source in ("tiles", "cubic") and target in ("tiles", "cubic"):
        if width is None or height is None:
            raise GeometryError("an intermediate equirect size is required")
        eq = remap(src, source, "equirect", tiles=tiles, width=width, height=height, blend=blend, n_jobs=n_jobs)
        return remap(eq, "equirect", target, tiles=tiles, face_size=face_size, n_jobs=n_jobs)
    if source == "equirect" and target == "tiles":
        if tiles is None:
            raise GeometryError("a tile plan is required")
        return equirect_to_tiles(src, tiles, n_jobs)
    if source == "equirect" and target == "cubic":
        return equirect_to_cubemap(src, face_size, n_jobs)
    if target == "equirect" and (width is None or height is None):
        raise GeometryError("target equirect width and height are required")
    if source == "tiles":
        if tiles is None:
            raise GeometryError("a tile plan is required")
        return tiles_to_equirect(src, tiles, width, height, blend=blend, n_jobs=n_jobs)
    if source == "cubic":
        return cubemap_to_equirect(src, width, height, n_jobs)
    raise GeometryError(f"unsupported conversion {source} -> {target}")
