"""Coordinate conventions, sphere <-> equirectangular transforms and bilinear sampling.

Pixel coordinates are continuous with the pixel-center convention: sample ``i``
covers ``[i, i + 1)`` and its center sits at ``i + 0.5``.  Latitude is in
``[-pi/2, pi/2]`` (north positive, top of the image), longitude in ``[-pi, pi)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

HALF_PI = np.pi / 2
TWO_PI = 2 * np.pi

COLOR_MODELS = ("gray", "rgb", "yuv")


class SphericalCoord(NamedTuple):
    lat: np.ndarray | float
    lon: np.ndarray | float


class PixelCoord(NamedTuple):
    x: np.ndarray | float
    y: np.ndarray | float


@dataclass(frozen=True)
class PlanarImage:
    """8-bit planar image stored as ``(planes, height, width)``.

    ``color`` is one of ``gray`` (1 plane), ``rgb`` or ``yuv`` (3 planes, chroma
    at full resolution).  The backing array is made read-only on construction.
    """

    data: np.ndarray
    color: str = "gray"

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ValueError(f"expected (planes, height, width) array, got shape {data.shape}")
        if data.dtype != np.uint8:
            raise ValueError(f"expected uint8 samples, got {data.dtype}")
        if self.color not in COLOR_MODELS:
            raise ValueError(f"unknown color model {self.color!r}")
        expected = 1 if self.color == "gray" else 3
        if data.shape[0] != expected:
            raise ValueError(f"{self.color} image needs {expected} planes, got {data.shape[0]}")
        if data.shape[1] < 1 or data.shape[2] < 1:
            raise ValueError("width and height must be >= 1")
        if data.flags.writeable:
            data = data.copy()
            data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def planes(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_array(cls, arr, color: str | None = None) -> "PlanarImage":
        """Build from an interleaved ``(H, W)`` or ``(H, W, C)`` array."""
        arr = np.asarray(arr)
        if arr.ndim == 2:
            planar = arr[None]
        elif arr.ndim == 3 and arr.shape[2] in (1, 3):
            planar = np.moveaxis(arr, 2, 0)
        else:
            raise ValueError(f"cannot interpret array of shape {arr.shape} as an image")
        if color is None:
            color = "gray" if planar.shape[0] == 1 else "rgb"
        return cls(np.ascontiguousarray(planar, dtype=np.uint8), color)

    def to_array(self) -> np.ndarray:
        """Interleaved ``(H, W)`` for gray, ``(H, W, 3)`` otherwise."""
        if self.planes == 1:
            return np.array(self.data[0])
        return np.ascontiguousarray(np.moveaxis(self.data, 0, 2))

    @classmethod
    def filled(cls, width: int, height: int, color: str = "gray", value=None) -> "PlanarImage":
        if value is None:
            value = black_value(color)
        value = np.broadcast_to(np.asarray(value, dtype=np.uint8), (1 if color == "gray" else 3,))
        data = np.empty((len(value), height, width), dtype=np.uint8)
        data[:] = value[:, None, None]
        return cls(data, color)


def black_value(color: str) -> tuple[int, ...]:
    """Fill value for black pixels; YUV chroma stays neutral."""
    if color == "gray":
        return (0,)
    if color == "yuv":
        return (0, 128, 128)
    return (0, 0, 0)


def wrap_lon(lon):
    """Normalize longitude into ``[-pi, pi)``."""
    out = np.mod(np.asarray(lon, dtype=float) + np.pi, TWO_PI) - np.pi
    return out if out.ndim else float(out)


def equirect_to_sphere(x, y, width: int, height: int) -> SphericalCoord:
    x = np.clip(np.asarray(x, dtype=float), 0.0, width)
    y = np.clip(np.asarray(y, dtype=float), 0.0, height)
    lon = wrap_lon(TWO_PI * (x / width) - np.pi)
    lat = HALF_PI - np.pi * (y / height)
    if np.ndim(lat) == 0:
        lat = float(lat)
    return SphericalCoord(lat, lon)


def sphere_to_equirect(lat, lon, width: int, height: int) -> PixelCoord:
    lat = np.asarray(lat, dtype=float)
    lon = wrap_lon(lon)
    x = (np.asarray(lon) + np.pi) / TWO_PI * width
    y = (HALF_PI - lat) / np.pi * height
    if np.ndim(x) == 0:
        return PixelCoord(float(x), float(y))
    return PixelCoord(x, y)


def bilinear_sample(img, x, y, wrap_x: bool = False, valid: np.ndarray | None = None) -> np.ndarray:
    """Sample every plane of ``img`` at continuous pixel positions.

    ``img`` is a :class:`PlanarImage` or a ``(planes, H, W)`` array.  Returns a
    float array of shape ``(planes,) + np.shape(x)``.  Rows always clamp;
    columns wrap when ``wrap_x`` and clamp otherwise.

    ``valid`` is an optional ``(H, W)`` boolean mask; taps on invalid texels
    are dropped and the remaining weights renormalized.  Points whose four
    taps are all invalid fall back to the plain weights.
    """
    data = img.data if isinstance(img, PlanarImage) else np.asarray(img)
    if data.ndim == 2:
        data = data[None]
    _, h, w = data.shape
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast_shapes(x.shape, y.shape)
    u = np.broadcast_to(x, shape).ravel() - 0.5
    v = np.clip(np.broadcast_to(y, shape).ravel() - 0.5, 0.0, h - 1)

    if wrap_x:
        u = np.mod(u, w)
        i0 = np.floor(u).astype(np.intp)
        fx = u - i0
        i0 %= w
        i1 = (i0 + 1) % w
    else:
        u = np.clip(u, 0.0, w - 1)
        i0 = np.floor(u).astype(np.intp)
        fx = u - i0
        i1 = np.minimum(i0 + 1, w - 1)
    j0 = np.floor(v).astype(np.intp)
    fy = v - j0
    j1 = np.minimum(j0 + 1, h - 1)

    taps = ((j0, i0, (1 - fx) * (1 - fy)), (j0, i1, fx * (1 - fy)),
            (j1, i0, (1 - fx) * fy), (j1, i1, fx * fy))
    if valid is not None:
        masked = [w * valid[j, i] for j, i, w in taps]
        total = sum(masked)
        ok = total > 0
        taps = [(j, i, np.where(ok, m / np.where(ok, total, 1.0), w)) for (j, i, w), m in zip(taps, masked)]
    out = sum(data[:, j, i] * w for j, i, w in taps)
    return out.reshape((data.shape[0],) + shape)


def to_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)
