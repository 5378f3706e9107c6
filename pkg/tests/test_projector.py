import math

import numpy as np
import pytest

from conftest import smooth_equirect
from omnitile.geometry import PlanarImage
from omnitile.metrics import spsnr
from omnitile.projector import (
    DensityRule,
    GeometryError,
    TileKind,
    blend_overlaps,
    cube_face_size,
    cubemap_to_equirect,
    equirect_to_cubemap,
    equirect_to_tiles,
    plan_tiles,
    remap,
    tile_forward,
    tile_inverse,
    tile_weights,
    tiles_to_equirect,
)
from omnitile.scheme import TileScheme

D1024 = DensityRule.from_equirect_height(1024)
SCHEMES = [
    TileScheme.from_degrees([45.0], "square"),
    TileScheme.from_degrees([35.07, 53.17], "square"),
    TileScheme.from_degrees([36.30, 54.18], "square", 0.005),
    TileScheme.from_degrees([26.08, 38.81], "circle", 0.003),
    TileScheme.from_degrees([15, 31, 47, 63], "square", 0.002),
]


def pixel_centers(tile, stride=1):
    ys, xs = np.meshgrid(np.arange(0, tile.height_px, stride) + 0.5,
                         np.arange(0, tile.width_px, stride) + 0.5, indexing="ij")
    return xs.ravel(), ys.ravel()


def unit_vectors(lat, lon):
    return np.stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])


class TestPlan:
    def test_three_tile_example(self):
        tiles = plan_tiles(SCHEMES[0], D1024)
        assert [t.kind for t in tiles] == [TileKind.CAP, TileKind.EQUATOR, TileKind.CAP]
        assert (tiles[1].width_px, tiles[1].height_px) == (2048, 512)
        assert (tiles[0].width_px, tiles[0].height_px) == (512, 512)
        assert (tiles[2].width_px, tiles[2].height_px) == (512, 512)

    def test_order_and_labels(self):
        tiles = plan_tiles(SCHEMES[4], D1024)
        assert [t.label for t in tiles] == [
            "cap-N", "ring-N4", "ring-N3", "ring-N2", "equator", "ring-S2", "ring-S3", "ring-S4", "cap-S"]
        assert [t.id for t in tiles] == list(range(9))

    @pytest.mark.parametrize("sigma", [0.001, 0.003, 0.005])
    def test_overlap_adds_rows_per_border(self, sigma):
        base = plan_tiles(TileScheme.from_degrees([35.07, 53.17], "square"), D1024)
        over = plan_tiles(TileScheme.from_degrees([35.07, 53.17], "square", sigma), D1024)
        extra = math.ceil(D1024.pixels_per_radian * sigma * math.pi / 2)
        for b, o in zip(base, over):
            # rect tiles gain rows at both borders; a cap's disc grows on every side of its square
            assert o.height_px - b.height_px == 2 * extra
            assert o.width_px - b.width_px == (2 * extra if b.kind is TileKind.CAP else 0)

    @pytest.mark.parametrize("scheme", SCHEMES)
    def test_adjacent_ranges_overlap_by_sigma_pi(self, scheme):
        tiles = plan_tiles(scheme, D1024)
        for upper, lower in zip(tiles, tiles[1:]):
            assert upper.lat_lo <= lower.lat_hi
            assert lower.lat_hi - upper.lat_lo == pytest.approx(scheme.sigma * math.pi, abs=1e-15)

    @pytest.mark.parametrize("scheme", SCHEMES)
    def test_cap_radius(self, scheme):
        tiles = plan_tiles(scheme, D1024)
        rho = math.pi / 2 - scheme.cuts[-1] + scheme.sigma * math.pi / 2
        for cap in (tiles[0], tiles[-1]):
            assert cap.cap_radius == pytest.approx(rho, abs=1e-15)
            assert cap.width_px == cap.height_px >= 2 * rho * D1024.pixels_per_radian

    def test_pixel_area_tracks_model_area(self):
        # packed pixel area over the equirect area follows the area ratio within rounding
        scheme = SCHEMES[1]
        tiles = plan_tiles(scheme, DensityRule.from_equirect_height(4096))
        from omnitile.scheme import hemisphere_area

        px = sum(t.area_px for t in tiles)
        ratio = px / (4096 / math.pi) ** 2 / (4 * math.pi)
        assert ratio == pytest.approx(hemisphere_area(scheme).ratio_to_sphere, rel=5e-3)

    def test_density_must_be_positive(self):
        with pytest.raises(ValueError):
            DensityRule(0.0)

    def test_degenerate_cuts(self):
        with pytest.raises(GeometryError):
            plan_tiles(TileScheme.from_degrees([45.0, 45.0001], "square"), 1e-12)


class TestInverseMapping:
    def test_equator_center(self):
        eq = plan_tiles(SCHEMES[1], D1024)[2]
        lat, lon, valid = tile_inverse(eq, eq.width_px / 2, eq.height_px / 2)
        assert (float(lat), float(lon), bool(valid)) == (pytest.approx(0.0, abs=1e-15), pytest.approx(0.0, abs=1e-15), True)

    def test_cap_center_is_pole(self):
        tiles = plan_tiles(SCHEMES[1], D1024)
        for cap, pole in ((tiles[0], math.pi / 2), (tiles[-1], -math.pi / 2)):
            lat, lon, _ = tile_inverse(cap, cap.width_px / 2, cap.height_px / 2)
            assert float(lat) == pole and float(lon) == 0.0

    def test_cap_rim(self):
        scheme = SCHEMES[2]
        cap = plan_tiles(scheme, D1024)[0]
        r = cap.cap_radius * cap.density
        c = cap.width_px / 2
        # "up" is lon = -pi; 90 deg counterclockwise (to the left) is lon = -pi/2
        lat, lon, valid = tile_inverse(cap, c - r, c)
        assert float(lat) == pytest.approx(scheme.cuts[-1] - scheme.sigma * math.pi / 2, abs=1e-12)
        assert float(lon) == pytest.approx(-math.pi / 2, abs=1e-12)
        assert bool(valid)
        _, lon_up, _ = tile_inverse(cap, c, c - r)
        assert float(lon_up) == pytest.approx(-math.pi)

    def test_south_cap_clockwise(self):
        cap = plan_tiles(SCHEMES[1], D1024)[-1]
        c = cap.width_px / 2
        _, lon, _ = tile_inverse(cap, c - 10, c)
        assert float(lon) == pytest.approx(math.pi / 2)

    def test_corners_are_black_fill(self):
        cap = plan_tiles(SCHEMES[1], D1024)[0]
        _, _, valid = tile_inverse(cap, 0.5, 0.5)
        assert not bool(valid)

    def test_outside_raster(self):
        eq = plan_tiles(SCHEMES[1], D1024)[2]
        with pytest.raises(GeometryError):
            tile_inverse(eq, -1.0, 3.0)
        with pytest.raises(GeometryError):
            tile_inverse(eq, 3.0, eq.height_px + 1.0)

    @pytest.mark.parametrize("scheme", SCHEMES)
    def test_round_trip_within_half_pixel(self, scheme):
        for tile in plan_tiles(scheme, D1024):
            xs, ys = pixel_centers(tile, stride=3)
            lat, lon, valid = tile_inverse(tile, xs, ys)
            fx, fy = tile_forward(tile, lat, lon)
            dx = np.abs(fx - xs)
            if tile.kind is not TileKind.CAP:
                dx = np.minimum(dx, tile.width_px - dx)  # seam wrap
            err = np.hypot(dx, fy - ys)[valid & np.isfinite(lat)]
            # exclude the exact pole pixel where longitude is undefined
            assert err.size and np.max(err) < 0.5


class TestDensityFloor:
    @pytest.mark.parametrize("scheme", SCHEMES)
    def test_min_density(self, scheme):
        h = 1e-4
        for tile in plan_tiles(scheme, D1024):
            xs, ys = pixel_centers(tile, stride=4)
            lat, lon, valid = tile_inverse(tile, xs, ys)
            inner = (lat >= tile.core_lo) & (lat <= tile.core_hi)
            # the overlap margins of rings lie equatorward of their width-defining edge
            keep = valid & inner & (np.hypot(xs - tile.width_px / 2, ys - tile.height_px / 2) > 2
                                    if tile.kind is TileKind.CAP else valid & inner)
            xs, ys = xs[keep] , ys[keep]
            # Jacobian of pixel -> unit sphere by central differences
            cols = []
            for ddx, ddy in ((h, 0), (0, h)):
                la1, lo1, _ = tile_inverse(tile, xs + ddx, ys + ddy, check=False)
                la0, lo0, _ = tile_inverse(tile, xs - ddx, ys - ddy, check=False)
                cols.append((unit_vectors(la1, lo1) - unit_vectors(la0, lo0)) / (2 * h))
            J = np.stack(cols, axis=-1).transpose(1, 0, 2)  # (N, 3, 2)
            smax = np.linalg.svd(J, compute_uv=False)[:, 0]
            density = 1 / smax
            floor = (1 - 1 / tile.width_px) * tile.density
            assert density.min() >= floor * (1 - 1e-6), tile.label


class TestRemap:
    def test_constant_image(self):
        img = PlanarImage.filled(512, 256, "yuv", (90, 60, 200))
        tiles = plan_tiles(SCHEMES[2], DensityRule.from_equirect_height(256))
        for tile, out in zip(tiles, equirect_to_tiles(img, tiles)):
            xs, ys = pixel_centers(tile)
            _, _, valid = tile_inverse(tile, xs, ys)
            flat = out.data.reshape(3, -1)
            np.testing.assert_array_equal(flat[:, valid], np.array([[90], [60], [200]]).repeat(valid.sum(), 1))
            np.testing.assert_array_equal(flat[:, ~valid], np.array([[0], [128], [128]]).repeat((~valid).sum(), 1))

    @pytest.mark.parametrize("scheme", [SCHEMES[1], SCHEMES[2]])
    def test_round_trip_psnr(self, scheme, smooth_1024, small_samples):
        tiles = plan_tiles(scheme, D1024)
        rec = tiles_to_equirect(equirect_to_tiles(smooth_1024, tiles), tiles, 2048, 1024)
        assert spsnr(smooth_1024, rec, small_samples) >= 40

    def test_deterministic_across_jobs(self):
        img = smooth_equirect(512, 256, "rgb")
        tiles = plan_tiles(SCHEMES[3], DensityRule.from_equirect_height(256))
        a = equirect_to_tiles(img, tiles, n_jobs=None)
        b = equirect_to_tiles(img, tiles, n_jobs=4)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.data, y.data)
        ra = tiles_to_equirect(a, tiles, 512, 256)
        rb = tiles_to_equirect(a, tiles, 512, 256, n_jobs=3)
        np.testing.assert_array_equal(ra.data, rb.data)

    def test_wrong_tile_count(self):
        img = smooth_equirect(256, 128)
        tiles = plan_tiles(SCHEMES[1], DensityRule.from_equirect_height(128))
        imgs = equirect_to_tiles(img, tiles)
        with pytest.raises(GeometryError):
            tiles_to_equirect(imgs[:-1], tiles, 256, 128)
        with pytest.raises(GeometryError):
            tiles_to_equirect(imgs[:-1] + [None], tiles, 256, 128)

    def test_wrong_tile_size(self):
        img = smooth_equirect(256, 128)
        tiles = plan_tiles(SCHEMES[1], DensityRule.from_equirect_height(128))
        imgs = equirect_to_tiles(img, tiles)
        imgs[2] = PlanarImage.filled(imgs[2].width + 2, imgs[2].height)
        with pytest.raises(GeometryError, match="plan expects"):
            tiles_to_equirect(imgs, tiles, 256, 128)

    def test_remap_dispatch(self):
        img = smooth_equirect(256, 128)
        tiles = plan_tiles(SCHEMES[1], DensityRule.from_equirect_height(128))
        parts = remap(img, "equirect", "tiles", tiles=tiles)
        back = remap(parts, "tiles", "equirect", tiles=tiles, width=256, height=128)
        assert (back.width, back.height) == (256, 128)
        with pytest.raises(GeometryError):
            remap(img, "equirect", "equirect")
        with pytest.raises(GeometryError):
            remap(parts, "tiles", "equirect", tiles=tiles)


class TestBlend:
    def test_weights_partition_unity(self):
        for scheme in SCHEMES:
            tiles = plan_tiles(scheme, D1024)
            ext = scheme.overlap_extension
            lat = np.linspace(-math.pi / 2, math.pi / 2, 20001)
            for blend in (True, False):
                total = sum(tile_weights(t, lat, ext, blend) for t in tiles)
                np.testing.assert_allclose(total, 1.0, atol=1e-12)

    def test_weights_are_monotone_ramps(self):
        tiles = plan_tiles(SCHEMES[2], D1024)
        ext = SCHEMES[2].overlap_extension
        eq = tiles[2]
        lat = np.linspace(eq.core_hi - 2 * ext, eq.core_hi + 2 * ext, 101)
        w = tile_weights(eq, lat, ext, True)
        assert np.all(np.diff(w) <= 0)
        assert w[0] == 1 and w[-1] == 0

    def test_no_overlap_is_hard_seam(self):
        tiles = plan_tiles(SCHEMES[1], D1024)
        lat = np.linspace(-1.5, 1.5, 1001)
        for t in tiles:
            assert set(np.unique(tile_weights(t, lat, 0.0, True))) <= {0.0, 1.0}

    def test_identical_overlap_content_is_exact(self):
        # constant tiles have identical content in every shared band
        scheme = SCHEMES[2]
        d = DensityRule.from_equirect_height(128)
        tiles = plan_tiles(scheme, d)
        imgs = [PlanarImage.filled(t.width_px, t.height_px, "gray", 140) for t in tiles]
        out = blend_overlaps(imgs, scheme, d, 256, 128)
        assert np.all(out.data == 140)

    def test_missing_tile(self):
        scheme = SCHEMES[2]
        d = DensityRule.from_equirect_height(128)
        tiles = plan_tiles(scheme, d)
        imgs = [PlanarImage.filled(t.width_px, t.height_px) for t in tiles]
        with pytest.raises(GeometryError):
            blend_overlaps(imgs[1:], scheme, d, 256, 128)


class TestCubemap:
    def test_face_size(self):
        assert cube_face_size(1024) == 652

    def test_layout_and_round_trip(self, small_samples):
        img = smooth_equirect(1024, 512)
        cube = equirect_to_cubemap(img)
        size = cube_face_size(512)
        assert (cube.width, cube.height) == (3 * size, 2 * size)
        rec = cubemap_to_equirect(cube, 1024, 512)
        assert spsnr(img, rec, small_samples) >= 40

    def test_face_centers(self):
        # the +z face center looks at the north pole, +x at (0, 0)
        img = smooth_equirect(512, 256)
        size = 64
        cube = equirect_to_cubemap(img, size)
        # face f sits at grid cell (f % 3, f // 3)
        assert abs(int(cube.data[0, size + size // 2, size + size // 2]) - (128 + 90)) <= 2
        assert abs(int(cube.data[0, size + size // 2, 2 * size + size // 2]) - (128 - 90)) <= 2
        assert abs(int(cube.data[0, size // 2, size // 2]) - (128 + 30)) <= 2
        assert abs(int(cube.data[0, size // 2, size + size // 2]) - (128 - 30)) <= 2

    def test_bad_canvas(self):
        with pytest.raises(GeometryError):
            cubemap_to_equirect(PlanarImage.filled(100, 60), 64, 32)
