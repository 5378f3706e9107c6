import numpy as np
import pytest

from omnitile.geometry import PlanarImage, equirect_to_sphere


def smooth_equirect(width, height, color="gray"):
    """Smooth synthetic frame: low-order spherical harmonics, well inside 0..255."""
    ys, xs = np.meshgrid(np.arange(height) + 0.5, np.arange(width) + 0.5, indexing="ij")
    lat, lon = equirect_to_sphere(xs, ys, width, height)
    base = 128 + 90 * np.sin(lat) + 30 * np.cos(lat) * np.cos(lon)
    if color == "gray":
        return PlanarImage.from_array(np.rint(base).astype(np.uint8))
    other = 128 + 60 * np.cos(lat) * np.sin(lon)
    third = 128 - 50 * np.sin(lat)
    planes = np.rint(np.stack([base, other, third])).astype(np.uint8)
    return PlanarImage(planes, color)


@pytest.fixture(scope="session")
def smooth_1024():
    return smooth_equirect(2048, 1024)


@pytest.fixture(scope="session")
def small_samples():
    from omnitile.metrics import build_sampleset

    return build_sampleset(100_000)
