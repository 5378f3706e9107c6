"""Read and write PNG, binary PPM/PGM and raw planar YUV 4:2:0 frames.

YUV frames are held with full-resolution chroma: chroma is upsampled
bilinearly on load (samples centered on their 2x2 luma block) and averaged
over 2x2 blocks on save.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import PlanarImage, bilinear_sample, to_uint8

PIL_FORMATS = {".png": "PNG", ".ppm": "PPM", ".pgm": "PPM", ".pnm": "PPM"}


def image_format(path, fmt: str | None = None) -> str:
    if fmt:
        return fmt.lower()
    ext = Path(path).suffix.lower()
    if ext in PIL_FORMATS:
        return PIL_FORMATS[ext].lower()
    if ext == ".yuv":
        return "yuv420"
    raise ValueError(f"cannot infer image format from {path!s}; pass it explicitly")


def parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"size must look like WIDTHxHEIGHT, got {text!r}") from None
    if w < 1 or h < 1:
        raise ValueError(f"size must be positive, got {text!r}")
    return w, h


def _upsample_chroma(plane: np.ndarray, width: int, height: int) -> np.ndarray:
    ys, xs = np.meshgrid(np.arange(height) + 0.5, np.arange(width) + 0.5, indexing="ij")
    return to_uint8(bilinear_sample(plane[None], xs / 2, ys / 2)[0])


def _downsample_chroma(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    blocks = plane.astype(np.uint32).reshape(h // 2, 2, w // 2, 2).sum(axis=(1, 3))
    return ((blocks + 2) // 4).astype(np.uint8)


def rgb_to_yuv(img: PlanarImage) -> PlanarImage:
    """Full-range BT.601."""
    r, g, b = (p.astype(float) for p in img.data)
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128 + 0.564 * (b - y)
    cr = 128 + 0.713 * (r - y)
    return PlanarImage(to_uint8(np.stack([y, cb, cr])), "yuv")


def yuv_to_rgb(img: PlanarImage) -> PlanarImage:
    y, cb, cr = (p.astype(float) for p in img.data)
    r = y + 1.402 * (cr - 128)
    g = y - 0.344136 * (cb - 128) - 0.714136 * (cr - 128)
    b = y + 1.772 * (cb - 128)
    return PlanarImage(to_uint8(np.stack([r, g, b])), "rgb")


def read_yuv420(path, width: int, height: int, frame: int = 0) -> PlanarImage:
    if width % 2 or height % 2:
        raise ValueError(f"YUV 4:2:0 frames need even dimensions, got {width}x{height}")
    luma = width * height
    chroma = luma // 4
    frame_bytes = luma + 2 * chroma
    with open(path, "rb") as fh:
        fh.seek(frame * frame_bytes)
        buf = fh.read(frame_bytes)
    if len(buf) != frame_bytes:
        raise ValueError(f"{path}: frame {frame} is truncated ({len(buf)} of {frame_bytes} bytes)")
    raw = np.frombuffer(buf, dtype=np.uint8)
    y = raw[:luma].reshape(height, width)
    u = raw[luma:luma + chroma].reshape(height // 2, width // 2)
    v = raw[luma + chroma:].reshape(height // 2, width // 2)
    return PlanarImage(np.stack([y, _upsample_chroma(u, width, height), _upsample_chroma(v, width, height)]), "yuv")


def write_yuv420(img: PlanarImage, path, append: bool = False) -> None:
    if img.width % 2 or img.height % 2:
        raise ValueError(f"YUV 4:2:0 frames need even dimensions, got {img.width}x{img.height}")
    if img.color == "rgb":
        img = rgb_to_yuv(img)
    if img.color == "gray":
        planes = [img.data[0], np.full((img.height // 2, img.width // 2), 128, np.uint8),
                  np.full((img.height // 2, img.width // 2), 128, np.uint8)]
    else:
        planes = [img.data[0], _downsample_chroma(img.data[1]), _downsample_chroma(img.data[2])]
    with open(path, "ab" if append else "wb") as fh:
        for p in planes:
            fh.write(np.ascontiguousarray(p).tobytes())


def read_image(path, fmt: str | None = None, size: tuple[int, int] | None = None, frame: int = 0) -> PlanarImage:
    fmt = image_format(path, fmt)
    if fmt == "yuv420":
        if size is None:
            raise ValueError("raw YUV input needs an explicit WIDTHxHEIGHT size")
        return read_yuv420(path, *size, frame=frame)
    with Image.open(path) as im:
        if im.mode in ("L", "1", "I;16", "I"):
            return PlanarImage(np.asarray(im.convert("L"))[None].copy(), "gray")
        return PlanarImage.from_array(np.asarray(im.convert("RGB")), "rgb")


def write_image(img: PlanarImage, path, fmt: str | None = None) -> None:
    fmt = image_format(path, fmt)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if fmt == "yuv420":
        write_yuv420(img, path)
        return
    if img.color == "yuv":
        img = yuv_to_rgb(img)
    Image.fromarray(img.to_array()).save(path, format="PPM" if fmt == "ppm" else "PNG")
