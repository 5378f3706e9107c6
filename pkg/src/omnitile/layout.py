"""Pack a tile set into one rectangular canvas and describe it with a manifest.

The manifest is a JSON document with the fields ``version``, ``canvas_w``,
``canvas_h``, ``density_ppr``, ``scheme`` (``cuts_deg``, ``pole``, ``sigma``)
and ``placements`` (``id``, ``kind``, ``x``, ``y``, ``w``, ``h``, ``rot``,
``lat_lo_deg``, ``lat_hi_deg``).  ``w``/``h`` are the footprint in the canvas,
after rotation.  ``rot`` is a counterclockwise rotation in degrees.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .geometry import PlanarImage
from .projector import GeometryError, TileGeometry, TileKind, plan_tiles
from .scheme import TileScheme

MANIFEST_VERSION = "omnitile-layout/1"
ALIGN = 8
ROTATIONS = (0, 90, 180, 270)


def _align(n: int, a: int = ALIGN) -> int:
    return -(-n // a) * a


@dataclass(frozen=True)
class Placement:
    id: int
    kind: str
    x: int
    y: int
    w: int
    h: int
    rot: int
    lat_lo_deg: float
    lat_hi_deg: float

    def __post_init__(self):
        if self.rot not in ROTATIONS:
            raise ValueError(f"rotation must be one of {ROTATIONS}, got {self.rot}")

    @property
    def tile_size(self) -> tuple[int, int]:
        """Width and height of the tile before rotation."""
        return (self.h, self.w) if self.rot in (90, 270) else (self.w, self.h)

    def overlaps(self, other: "Placement") -> bool:
        return (self.x < other.x + other.w and other.x < self.x + self.w
                and self.y < other.y + other.h and other.y < self.y + self.h)


@dataclass(frozen=True)
class LayoutManifest:
    canvas_w: int
    canvas_h: int
    density_ppr: float
    scheme: dict | None
    placements: tuple[Placement, ...] = field(default_factory=tuple)
    version: str = MANIFEST_VERSION

    def __post_init__(self):
        object.__setattr__(self, "placements", tuple(self.placements))
        self.validate()

    def validate(self) -> None:
        ids = [p.id for p in self.placements]
        if len(set(ids)) != len(ids):
            raise ValueError("a tile is placed more than once")
        for p in self.placements:
            if p.x < 0 or p.y < 0 or p.x + p.w > self.canvas_w or p.y + p.h > self.canvas_h:
                raise ValueError(f"placement of tile {p.id} falls outside the {self.canvas_w}x{self.canvas_h} canvas")
        for i, a in enumerate(self.placements):
            for b in self.placements[i + 1:]:
                if a.overlaps(b):
                    raise ValueError(f"placements of tiles {a.id} and {b.id} overlap")

    @property
    def tile_area(self) -> int:
        return sum(p.w * p.h for p in self.placements)

    @property
    def waste_px(self) -> int:
        return self.canvas_w * self.canvas_h - self.tile_area

    @property
    def waste_ratio(self) -> float:
        return self.waste_px / self.tile_area

    def tile_scheme(self) -> TileScheme:
        if self.scheme is None:
            raise ValueError("manifest carries no scheme")
        return TileScheme.from_dict(self.scheme)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "canvas_w": self.canvas_w,
            "canvas_h": self.canvas_h,
            "density_ppr": self.density_ppr,
            "scheme": None if self.scheme is None else {
                "cuts_deg": list(self.scheme["cuts_deg"]),
                "pole": self.scheme["pole"],
                "sigma": self.scheme["sigma"],
            },
            "placements": [asdict(p) for p in self.placements],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "LayoutManifest":
        scheme = d.get("scheme")
        if scheme is not None:
            scheme = {"cuts_deg": list(scheme["cuts_deg"]), "pole": scheme["pole"], "sigma": scheme["sigma"]}
        return cls(
            canvas_w=int(d["canvas_w"]),
            canvas_h=int(d["canvas_h"]),
            density_ppr=d["density_ppr"],
            scheme=scheme,
            placements=tuple(Placement(**p) for p in d["placements"]),
            version=d.get("version", MANIFEST_VERSION),
        )

    @classmethod
    def from_json(cls, text: str) -> "LayoutManifest":
        return cls.from_dict(json.loads(text))


def pack(tiles: Sequence[TileGeometry], scheme: TileScheme | None = None) -> LayoutManifest:
    """Deterministic shelf packing.

    The equator band (or the widest tile) opens the top shelf and sets the
    canvas width.  The remaining tiles go tallest first onto the first shelf
    with room, opening a new shelf otherwise.  A tile taller than it is wide is
    turned 90 degrees when it still fits the canvas width.
    """
    if not tiles:
        raise ValueError("nothing to pack")
    first = next((t for t in tiles if t.kind is TileKind.EQUATOR), None)
    if first is None:
        first = max(tiles, key=lambda t: (t.width_px, -t.id))
    canvas_w = _align(first.width_px)

    def footprint(t: TileGeometry) -> tuple[int, int, int]:
        if t.height_px > t.width_px and t.height_px <= canvas_w:
            return t.height_px, t.width_px, 90
        return t.width_px, t.height_px, 0

    shelves: list[list[int]] = [[first.height_px, first.width_px, 0]]  # height, used width, y
    placed = {first.id: (0, 0, first.width_px, first.height_px, 0)}
    rest = sorted((t for t in tiles if t.id != first.id), key=lambda t: (-footprint(t)[1], t.id))
    for t in rest:
        w, h, rot = footprint(t)
        if w > canvas_w:
            raise GeometryError(f"tile {t.id} is wider than the canvas")
        for shelf in shelves:
            if h <= shelf[0] and shelf[1] + w <= canvas_w:
                break
        else:
            shelf = [h, 0, shelves[-1][2] + shelves[-1][0]]
            shelves.append(shelf)
        placed[t.id] = (shelf[1], shelf[2], w, h, rot)
        shelf[1] += w
    canvas_h = _align(shelves[-1][2] + shelves[-1][0])

    placements = []
    for t in sorted(tiles, key=lambda t: t.id):
        x, y, w, h, rot = placed[t.id]
        placements.append(Placement(t.id, t.label, x, y, w, h, rot, math.degrees(t.lat_lo), math.degrees(t.lat_hi)))
    density = float(first.density)
    return LayoutManifest(canvas_w, canvas_h, density, None if scheme is None else scheme.to_dict(), placements)


def compose(tile_images: Sequence[PlanarImage], manifest: LayoutManifest) -> PlanarImage:
    """Draw tiles into the canvas; unused area is black."""
    if len(tile_images) != len(manifest.placements):
        raise GeometryError(f"manifest places {len(manifest.placements)} tiles, got {len(tile_images)} images")
    color = tile_images[0].color
    canvas = np.array(PlanarImage.filled(manifest.canvas_w, manifest.canvas_h, color).data)
    for p in manifest.placements:
        im = tile_images[p.id]
        if (im.width, im.height) != p.tile_size:
            raise GeometryError(f"tile {p.id} image is {im.width}x{im.height}, manifest expects {p.tile_size}")
        canvas[:, p.y:p.y + p.h, p.x:p.x + p.w] = np.rot90(im.data, k=p.rot // 90, axes=(1, 2))
    return PlanarImage(canvas, color)


def unpack(canvas: PlanarImage, manifest: LayoutManifest) -> list[PlanarImage]:
    """Cut tiles back out of a canvas, undoing rotations; ordered by tile id."""
    if (canvas.width, canvas.height) != (manifest.canvas_w, manifest.canvas_h):
        raise GeometryError(
            f"canvas is {canvas.width}x{canvas.height}, manifest expects {manifest.canvas_w}x{manifest.canvas_h}"
        )
    out = []
    for p in sorted(manifest.placements, key=lambda p: p.id):
        block = canvas.data[:, p.y:p.y + p.h, p.x:p.x + p.w]
        out.append(PlanarImage(np.ascontiguousarray(np.rot90(block, k=-(p.rot // 90), axes=(1, 2))), canvas.color))
    return out


def plan_from_manifest(manifest: LayoutManifest) -> list[TileGeometry]:
    """Re-plan the tile set a manifest describes and check it agrees."""
    tiles = plan_tiles(manifest.tile_scheme(), manifest.density_ppr)
    if len(tiles) != len(manifest.placements):
        raise GeometryError(f"scheme plans {len(tiles)} tiles, manifest places {len(manifest.placements)}")
    for t, p in zip(tiles, sorted(manifest.placements, key=lambda p: p.id)):
        if (t.width_px, t.height_px) != p.tile_size:
            raise GeometryError(f"tile {t.id} planned {t.width_px}x{t.height_px}, manifest says {p.tile_size}")
    return tiles
