"""Sphere-aware quality metrics and Bjontegaard delta-rate."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geometry import PlanarImage, bilinear_sample, sphere_to_equirect

DEFAULT_SAMPLES = 655_362
PEAK = 255.0
GOLDEN_ANGLE = math.pi * (3 - math.sqrt(5))
CHROMA_WEIGHTS = (6.0, 1.0, 1.0)


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class SampleSet:
    lat: np.ndarray
    lon: np.ndarray

    def __post_init__(self):
        lat = np.array(self.lat, dtype=float).ravel()
        lon = np.array(self.lon, dtype=float).ravel()
        if lat.shape != lon.shape:
            raise ValueError("lat and lon must have the same length")
        lat.flags.writeable = False
        lon.flags.writeable = False
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)

    def __len__(self) -> int:
        return len(self.lat)


def build_sampleset(n: int = DEFAULT_SAMPLES) -> SampleSet:
    """Fibonacci lattice: ``n`` near-uniform points on the sphere."""
    if n < 2:
        raise ValueError("need at least two sample points")
    i = np.arange(n, dtype=float)
    z = 1 - (2 * i + 1) / n
    lat = np.arcsin(z)
    lon = np.mod(i * GOLDEN_ANGLE + np.pi, 2 * np.pi) - np.pi
    return SampleSet(lat, lon)


@dataclass(frozen=True)
class WeightTable:
    """Latitude weights tabulated at whole degrees from -90 to 90, mean 1."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.shape != (181,):
            raise ValueError(f"need 181 weights (-90..90 deg), got {w.size}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        if w.sum() <= 0:
            raise ValueError("weights must not all be zero")
        w = w / w.mean()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def latitudes_deg(self) -> np.ndarray:
        return np.arange(-90, 91, dtype=float)

    @classmethod
    def uniform(cls) -> "WeightTable":
        return cls(np.ones(181))

    @classmethod
    def cos_latitude(cls) -> "WeightTable":
        return cls(np.cos(np.radians(np.arange(-90, 91))).clip(min=0))

    @classmethod
    def from_pairs(cls, lat_deg: Sequence[float], weight: Sequence[float]) -> "WeightTable":
        lat_deg = np.asarray(lat_deg, dtype=float)
        order = np.argsort(lat_deg)
        return cls(np.interp(np.arange(-90, 91), lat_deg[order], np.asarray(weight, dtype=float)[order]))

    @classmethod
    def read(cls, path) -> "WeightTable":
        """Parse ``latitude_degrees weight`` lines; ``#`` starts a comment."""
        lats, ws = [], []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise MetricError(f"{path}:{lineno}: expected 'latitude weight', got {line!r}")
            try:
                lat, w = float(parts[0]), float(parts[1])
            except ValueError:
                raise MetricError(f"{path}:{lineno}: non-numeric entry {line!r}") from None
            if not -90 <= lat <= 90:
                raise MetricError(f"{path}:{lineno}: latitude {lat} outside [-90, 90]")
            lats.append(lat)
            ws.append(w)
        if not lats:
            raise MetricError(f"{path}: empty weight table")
        try:
            return cls.from_pairs(lats, ws)
        except ValueError as exc:
            raise MetricError(f"{path}: {exc}") from None

    def __call__(self, lat) -> np.ndarray:
        return np.interp(np.degrees(lat), self.latitudes_deg, self.weights)


def _metric_planes(img: PlanarImage, include_chroma: bool) -> np.ndarray:
    data = img.data
    if img.color == "rgb":
        r, g, b = (p.astype(float) for p in data)
        y = 0.299 * r + 0.587 * g + 0.114 * b
        if not include_chroma:
            return y[None]
        cb = 128 + (b - y) * 0.564
        cr = 128 + (r - y) * 0.713
        return np.stack([y, cb, cr])
    if include_chroma and img.color == "yuv":
        return data
    return data[:1]


def _squared_errors(ref: PlanarImage, test: PlanarImage, samples: SampleSet, include_chroma: bool) -> np.ndarray:
    if len(samples) == 0:
        raise MetricError("empty sample set")
    if ref.color != test.color:
        raise MetricError(f"color models differ: {ref.color} vs {test.color}")
    out = []
    for img in (ref, test):
        x, y = sphere_to_equirect(samples.lat, samples.lon, img.width, img.height)
        out.append(bilinear_sample(_metric_planes(img, include_chroma), x, y, wrap_x=True))
    return (out[0] - out[1]) ** 2


def psnr_from_mse(mse: float) -> float:
    if mse <= 0:
        return math.inf
    return 10 * math.log10(PEAK * PEAK / mse)


def _combine(mses: Iterable[float]) -> float:
    psnrs = [psnr_from_mse(m) for m in mses]
    if len(psnrs) == 1:
        return psnrs[0]
    # 6:1:1 average; a lossless plane drops out instead of forcing inf
    finite = [(w, p) for w, p in zip(CHROMA_WEIGHTS, psnrs) if math.isfinite(p)]
    if not finite:
        return math.inf
    return sum(w * p for w, p in finite) / sum(w for w, _ in finite)


def spsnr(ref: PlanarImage, test: PlanarImage, samples: SampleSet | None = None, *,
          include_chroma: bool = False) -> float:
    """PSNR over uniformly distributed sphere points; ``inf`` for identical inputs."""
    samples = build_sampleset() if samples is None else samples
    err = _squared_errors(ref, test, samples, include_chroma)
    # fsum keeps the result independent of sample order
    return _combine(math.fsum(e) / len(e) for e in err)


def lpsnr(ref: PlanarImage, test: PlanarImage, samples: SampleSet | None = None,
          weights: WeightTable | None = None, *, include_chroma: bool = False) -> float:
    """Latitude-weighted sphere PSNR (cos-latitude weights by default)."""
    samples = build_sampleset() if samples is None else samples
    weights = WeightTable.cos_latitude() if weights is None else weights
    err = _squared_errors(ref, test, samples, include_chroma)
    w = weights(samples.lat)
    total = math.fsum(w)
    if total <= 0:
        raise MetricError("weight table gives zero total weight on the sample set")
    return _combine(math.fsum(w * e) / total for e in err)


@dataclass(frozen=True)
class RateQualityPoint:
    bitrate: float
    quality: float

    def __post_init__(self):
        if not self.bitrate > 0:
            raise MetricError(f"bitrate must be positive, got {self.bitrate}")


def _curve(points) -> tuple[np.ndarray, np.ndarray]:
    pts = [p if isinstance(p, RateQualityPoint) else RateQualityPoint(*p) for p in points]
    if len(pts) < 4:
        raise MetricError(f"BD-rate needs at least 4 rate/quality points, got {len(pts)}")
    return np.log10([p.bitrate for p in pts]), np.array([p.quality for p in pts], dtype=float)


def bd_rate(anchor, test) -> float:
    """Average bitrate difference of ``test`` against ``anchor`` at equal quality, percent."""
    log_a, q_a = _curve(anchor)
    log_t, q_t = _curve(test)
    lo = max(q_a.min(), q_t.min())
    hi = min(q_a.max(), q_t.max())
    if not hi > lo:
        raise MetricError(f"quality ranges do not overlap ([{q_a.min()}, {q_a.max()}] vs [{q_t.min()}, {q_t.max()}])")
    int_a = np.polyint(np.polyfit(q_a, log_a, 3))
    int_t = np.polyint(np.polyfit(q_t, log_t, 3))
    avg = ((np.polyval(int_t, hi) - np.polyval(int_t, lo)) - (np.polyval(int_a, hi) - np.polyval(int_a, lo))) / (hi - lo)
    return float((10 ** avg - 1) * 100)


def read_rd_curve(path) -> list[RateQualityPoint]:
    """CSV with header ``bitrate_kbps,psnr_db``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["bitrate_kbps", "psnr_db"]:
            raise MetricError(f"{path}: header must be 'bitrate_kbps,psnr_db'")
        points = []
        for lineno, row in enumerate(reader, 2):
            try:
                points.append(RateQualityPoint(float(row["bitrate_kbps"]), float(row["psnr_db"])))
            except (TypeError, ValueError) as exc:
                raise MetricError(f"{path}:{lineno}: {exc}") from None
    return points
