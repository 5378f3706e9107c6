"""Tile segmentation schemes and their pixel-area model.

Areas are on the unit sphere.  A scheme cuts each hemisphere at the ascending
latitudes ``cuts``; the equator band, ``n - 1`` rings per hemisphere and two
pole caps give ``2n + 1`` tiles.  Every tile is sampled at the same minimum
density, so a ring between ``a`` and ``b`` costs ``2 pi cos(a) (b - a)`` and a
pole cap of angular radius ``rho`` costs ``pi rho^2`` (disc) or ``4 rho^2``
(bounding square).  Overlap ``sigma`` extends each tile by ``sigma * pi / 2``
radians past every internal border.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

SPHERE_AREA = 4 * math.pi


class InvalidSchemeError(ValueError):
    """Cut latitudes or overlap violate the feasible ordering."""


class PoleStyle(enum.Enum):
    CIRCLE = "circle"
    SQUARE = "square"

    @property
    def coefficient(self) -> float:
        return math.pi if self is PoleStyle.CIRCLE else 4.0

    @classmethod
    def parse(cls, value) -> "PoleStyle":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"pole style must be 'circle' or 'square', got {value!r}") from None


class Projection(enum.Enum):
    EQUIRECTANGULAR = "equirectangular"
    CUBIC = "cubic"


@dataclass(frozen=True)
class TileScheme:
    """North-hemisphere cut latitudes (radians), mirrored to the south."""

    cuts: tuple[float, ...]
    pole: PoleStyle = PoleStyle.SQUARE
    sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "cuts", tuple(float(c) for c in self.cuts))
        object.__setattr__(self, "pole", PoleStyle.parse(self.pole))
        object.__setattr__(self, "sigma", float(self.sigma))
        check_cuts(self.cuts, self.sigma)

    @classmethod
    def from_degrees(cls, cuts_deg: Sequence[float], pole="square", sigma: float = 0.0) -> "TileScheme":
        return cls(tuple(math.radians(c) for c in cuts_deg), pole, sigma)

    @property
    def n_cuts(self) -> int:
        return len(self.cuts)

    @property
    def n_tiles(self) -> int:
        return 2 * len(self.cuts) + 1

    @property
    def cuts_deg(self) -> tuple[float, ...]:
        return tuple(math.degrees(c) for c in self.cuts)

    @property
    def overlap_extension(self) -> float:
        """Radians each tile extends past an internal border."""
        return self.sigma * math.pi / 2

    def to_dict(self) -> dict:
        return {"cuts_deg": list(self.cuts_deg), "pole": self.pole.value, "sigma": self.sigma}

    @classmethod
    def from_dict(cls, d: dict) -> "TileScheme":
        return cls.from_degrees(d["cuts_deg"], d.get("pole", "square"), d.get("sigma", 0.0))


def check_cuts(cuts: Sequence[float], sigma: float) -> None:
    if len(cuts) < 1:
        raise InvalidSchemeError("a scheme needs at least one cut")
    if not sigma >= 0 or not math.isfinite(sigma):
        raise InvalidSchemeError(f"overlap fraction must be >= 0, got {sigma!r}")
    ext = sigma * math.pi / 2
    if not cuts[0] > ext:
        raise InvalidSchemeError(
            f"first cut {math.degrees(cuts[0]):.4f} deg must exceed sigma*pi/2 = {math.degrees(ext):.4f} deg"
        )
    for i in range(1, len(cuts)):
        if not cuts[i] > cuts[i - 1]:
            raise InvalidSchemeError(
                f"cuts must be strictly ascending: cut {i + 1} ({math.degrees(cuts[i]):.4f} deg) "
                f"<= cut {i} ({math.degrees(cuts[i - 1]):.4f} deg)"
            )
    upper = math.pi / 2 - ext
    if not cuts[-1] < upper:
        raise InvalidSchemeError(
            f"last cut {math.degrees(cuts[-1]):.4f} deg must be below pi/2 - sigma*pi/2 = {math.degrees(upper):.4f} deg"
        )


@dataclass(frozen=True)
class AreaReport:
    hemisphere_area: float
    total_area: float
    ratio_to_sphere: float

    @property
    def percent(self) -> int:
        return round(100 * self.ratio_to_sphere)


def pole_area(theta_p: float, pole=PoleStyle.SQUARE, sigma: float = 0.0) -> float:
    rho = math.pi / 2 - theta_p + sigma * math.pi / 2
    return PoleStyle.parse(pole).coefficient * rho * rho


def yu_pole_area(theta_p: float) -> float:
    """Pole area when the cap is resampled as a full-width strip."""
    if not 0 < theta_p < math.pi / 2:
        raise ValueError(f"pole latitude must lie in (0, pi/2), got {theta_p!r}")
    return 2 * math.pi * (math.pi / 2 - theta_p) * math.cos(theta_p)


def ring_areas(cuts: Sequence[float], sigma: float = 0.0) -> list[float]:
    """Per-hemisphere area of the equator half-band followed by each ring."""
    ext = sigma * math.pi / 2
    areas = [2 * math.pi * (cuts[0] + ext)]
    for i in range(1, len(cuts)):
        areas.append(2 * math.pi * math.cos(cuts[i - 1]) * (cuts[i] - cuts[i - 1] + 2 * ext))
    return areas


def _hemisphere(cuts: Sequence[float], k: float, sigma: float) -> float:
    # unchecked fast path for the optimizer; same arithmetic as hemisphere_area
    ext = sigma * math.pi / 2
    rho = math.pi / 2 - cuts[-1] + ext
    total = k * rho * rho + 2 * math.pi * (cuts[0] + ext)
    for i in range(1, len(cuts)):
        total += 2 * math.pi * math.cos(cuts[i - 1]) * (cuts[i] - cuts[i - 1] + 2 * ext)
    return total


def hemisphere_area(scheme: TileScheme) -> AreaReport:
    hemi = _hemisphere(scheme.cuts, scheme.pole.coefficient, scheme.sigma)
    return AreaReport(hemi, 2 * hemi, 2 * hemi / SPHERE_AREA)


def baseline_ratio(projection) -> float:
    """Area of a classic projection relative to the sphere at equal minimum density."""
    projection = Projection(projection) if not isinstance(projection, Projection) else projection
    if projection is Projection.EQUIRECTANGULAR:
        return (2 * math.pi) * math.pi / SPHERE_AREA
    return 6 * 2.0 ** 2 / SPHERE_AREA


def equal_division_cuts(n: int) -> tuple[float, ...]:
    return tuple(math.pi / 2 * i / (n + 1) for i in range(1, n + 1))


def yu_equal_division_ratio(n: int = 2) -> float:
    """Ratio for equal latitude division with strip-shaped pole tiles."""
    cuts = equal_division_cuts(n)
    hemi = sum(ring_areas(cuts)) + yu_pole_area(cuts[-1])
    return 2 * hemi / SPHERE_AREA


def area_vs_tilecount(n_max: int, pole=PoleStyle.SQUARE, sigma: float = 0.0) -> list[tuple[int, float]]:
    """Minimal area ratio for every cut count ``1..n_max``."""
    from .optimizer import optimize_cuts

    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    return [(n, optimize_cuts(n, pole, sigma).area.ratio_to_sphere) for n in range(1, n_max + 1)]
