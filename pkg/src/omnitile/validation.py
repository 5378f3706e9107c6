"""Input checks shared by the estimators and the command line."""
from __future__ import annotations

import numbers

import numpy as np

from .geometry import PlanarImage
from .scheme import PoleStyle


def check_image(X, *, name: str = "X") -> PlanarImage:
    """Coerce ``X`` into a :class:`PlanarImage`.

    Accepts a PlanarImage or an interleaved uint8-compatible ``(H, W)`` /
    ``(H, W, 1|3)`` array.  Float arrays must already hold values in 0..255.
    """
    if isinstance(X, PlanarImage):
        return X
    arr = np.asarray(X)
    if arr.dtype == object or arr.ndim not in (2, 3):
        raise ValueError(f"{name} must be an (H, W) or (H, W, C) image array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} contains NaN or infinite values")
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError(f"{name} values must lie in [0, 255]")
        arr = np.rint(arr).astype(np.uint8)
    return PlanarImage.from_array(arr)


def check_frames(X, *, name: str = "X") -> tuple[list[PlanarImage], bool]:
    """Return ``(frames, single)`` for one image or a list of images."""
    if isinstance(X, (list, tuple)):
        if not X:
            raise ValueError(f"{name} is an empty frame list")
        return [check_image(f, name=f"{name}[{i}]") for i, f in enumerate(X)], False
    return [check_image(X, name=name)], True


def check_n_tiles(n_tiles) -> int:
    if not isinstance(n_tiles, numbers.Integral) or n_tiles < 3 or n_tiles % 2 == 0:
        raise ValueError(f"tile count must be an odd integer >= 3, got {n_tiles!r}")
    return int(n_tiles)


def check_sigma(sigma) -> float:
    if not isinstance(sigma, numbers.Real) or not np.isfinite(sigma) or sigma < 0:
        raise ValueError(f"overlap fraction must be a finite number >= 0, got {sigma!r}")
    return float(sigma)


def check_pole(pole) -> PoleStyle:
    return PoleStyle.parse(pole)


def output_like(img: PlanarImage, template) -> PlanarImage | np.ndarray:
    """Return ``img`` in the container type the caller passed in."""
    return img if isinstance(template, PlanarImage) else img.to_array()
