import math
import time

import numpy as np
import pytest

from omnitile.geometry import PlanarImage
from omnitile.metrics import (
    MetricError,
    RateQualityPoint,
    SampleSet,
    WeightTable,
    bd_rate,
    build_sampleset,
    lpsnr,
    read_rd_curve,
    spsnr,
)


def oracle_psnr(ref, test, lats, lons, weight=lambda lat: 1.0):
    """Direct summation over sample points with hand-written bilinear lookups."""
    h, w = ref.shape

    def sample(img, lat, lon):
        x = (lon + math.pi) / (2 * math.pi) * w - 0.5
        y = (math.pi / 2 - lat) / math.pi * h - 0.5
        i0 = math.floor(x)
        j0 = math.floor(y)
        fx, fy = x - i0, y - j0
        total = 0.0
        for dj, wy in ((0, 1 - fy), (1, fy)):
            j = min(max(j0 + dj, 0), h - 1)
            for di, wx in ((0, 1 - fx), (1, fx)):
                total += wx * wy * float(img[j][(i0 + di) % w])
        return total

    num = 0.0
    den = 0.0
    for lat, lon in zip(lats, lons):
        wt = weight(lat)
        num += wt * (sample(ref, lat, lon) - sample(test, lat, lon)) ** 2
        den += wt
    mse = num / den
    return math.inf if mse == 0 else 10 * math.log10(255 ** 2 / mse)


@pytest.fixture(scope="module")
def pair_8x4():
    rng = np.random.default_rng(7)
    ref = rng.integers(0, 256, (4, 8), dtype=np.uint8)
    test = ref.copy()
    test[1, 5] = np.uint8((int(test[1, 5]) + 37) % 256)
    return ref, test


@pytest.fixture(scope="module")
def samples_2k():
    return build_sampleset(2000)


class TestSPSNR:
    def test_identical_is_inf(self, samples_2k):
        img = PlanarImage.from_array(np.full((4, 8), 9, np.uint8))
        assert spsnr(img, img, samples_2k) == math.inf

    def test_off_by_one(self, samples_2k):
        ref = PlanarImage.from_array(np.full((16, 32), 100, np.uint8))
        test = PlanarImage.from_array(np.full((16, 32), 101, np.uint8))
        assert spsnr(ref, test, samples_2k) == pytest.approx(20 * math.log10(255), abs=1e-12)
        assert spsnr(ref, test, samples_2k) == pytest.approx(48.13, abs=5e-3)

    def test_matches_direct_summation(self, pair_8x4, samples_2k):
        ref, test = pair_8x4
        expected = oracle_psnr(ref, test, samples_2k.lat, samples_2k.lon)
        got = spsnr(PlanarImage.from_array(ref), PlanarImage.from_array(test), samples_2k)
        assert got == pytest.approx(expected, abs=1e-9)

    def test_random_pairs_match_oracle(self, samples_2k):
        rng = np.random.default_rng(11)
        for _ in range(3):
            ref = rng.integers(0, 256, (4, 8), dtype=np.uint8)
            test = rng.integers(0, 256, (4, 8), dtype=np.uint8)
            got = spsnr(PlanarImage.from_array(ref), PlanarImage.from_array(test), samples_2k)
            assert got == pytest.approx(oracle_psnr(ref, test, samples_2k.lat, samples_2k.lon), abs=1e-9)

    def test_symmetric(self, pair_8x4, samples_2k):
        a, b = (PlanarImage.from_array(x) for x in pair_8x4)
        assert spsnr(a, b, samples_2k) == spsnr(b, a, samples_2k)

    def test_order_independent(self, pair_8x4, samples_2k):
        a, b = (PlanarImage.from_array(x) for x in pair_8x4)
        perm = np.random.default_rng(3).permutation(len(samples_2k))
        shuffled = SampleSet(samples_2k.lat[perm], samples_2k.lon[perm])
        assert spsnr(a, b, shuffled) == spsnr(a, b, samples_2k)
        assert lpsnr(a, b, shuffled) == lpsnr(a, b, samples_2k)

    def test_empty_sample_set(self, pair_8x4):
        a, b = (PlanarImage.from_array(x) for x in pair_8x4)
        with pytest.raises(MetricError):
            spsnr(a, b, SampleSet([], []))

    def test_color_mismatch(self, samples_2k):
        gray = PlanarImage.filled(8, 4, "gray")
        rgb = PlanarImage.filled(8, 4, "rgb")
        with pytest.raises(MetricError):
            spsnr(gray, rgb, samples_2k)

    def test_luma_only_by_default(self, samples_2k):
        ref = PlanarImage.filled(8, 4, "yuv", (100, 128, 128))
        test = PlanarImage.filled(8, 4, "yuv", (100, 140, 128))
        assert spsnr(ref, test, samples_2k) == math.inf
        chroma = spsnr(ref, test, samples_2k, include_chroma=True)
        # only Cb differs; lossless planes drop out of the 6:1:1 mean
        assert chroma == pytest.approx(20 * math.log10(255 / 12), abs=1e-9)


class TestLPSNR:
    def test_uniform_equals_spsnr(self, pair_8x4, samples_2k):
        a, b = (PlanarImage.from_array(x) for x in pair_8x4)
        assert lpsnr(a, b, samples_2k, WeightTable.uniform()) == pytest.approx(spsnr(a, b, samples_2k), abs=1e-12)

    def test_cos_latitude_matches_oracle(self, pair_8x4, samples_2k):
        ref, test = pair_8x4
        table = WeightTable.cos_latitude()
        got = lpsnr(PlanarImage.from_array(ref), PlanarImage.from_array(test), samples_2k, table)
        expected = oracle_psnr(ref, test, samples_2k.lat, samples_2k.lon, weight=lambda lat: float(table(lat)))
        assert got == pytest.approx(expected, abs=1e-9)

    def test_explicit_table_matches_oracle(self, pair_8x4, samples_2k):
        ref, test = pair_8x4
        table = WeightTable.from_pairs([-90, -30, 0, 45, 90], [0.2, 1.0, 3.0, 0.5, 0.0])
        got = lpsnr(PlanarImage.from_array(ref), PlanarImage.from_array(test), samples_2k, table)
        expected = oracle_psnr(ref, test, samples_2k.lat, samples_2k.lon,
                               weight=lambda lat: float(np.interp(math.degrees(lat), np.arange(-90, 91), table.weights)))
        assert got == pytest.approx(expected, abs=1e-9)

    def test_zero_weight_masks_poles(self, samples_2k):
        ref = np.full((32, 64), 120, np.uint8)
        test = ref.copy()
        test[:4] = 10   # differences only within 22.5 deg of the north pole
        test[-4:] = 250
        band = WeightTable.from_pairs([-90, -45, -44, 44, 45, 90], [0, 0, 1, 1, 0, 0])
        a, b = PlanarImage.from_array(ref), PlanarImage.from_array(test)
        assert lpsnr(a, b, samples_2k, band) == math.inf
        assert spsnr(a, b, samples_2k) < 30

    def test_table_normalized(self):
        t = WeightTable.from_pairs([-90, 0, 90], [0, 5, 1])
        assert t.weights.mean() == pytest.approx(1.0, abs=1e-12)
        assert WeightTable.cos_latitude().weights.mean() == pytest.approx(1.0, abs=1e-12)

    def test_table_rejects_negative(self):
        with pytest.raises(ValueError):
            WeightTable.from_pairs([-90, 90], [1, -1])

    def test_read_table(self, tmp_path):
        p = tmp_path / "w.txt"
        p.write_text("# lat weight\n-90 0\n0 2  # equator\n90 0\n")
        t = WeightTable.read(p)
        assert t(0.0) / t(math.pi / 4) == pytest.approx(2.0)
        assert t(math.pi / 2) == 0
        bad = tmp_path / "bad.txt"
        bad.write_text("0 x\n")
        with pytest.raises(MetricError, match="non-numeric"):
            WeightTable.read(bad)


def lagrange_trapezoid_bd(anchor, test, n=200_001):
    """Interpolate log-rate through each 4-point curve, integrate with the trapezoid rule."""
    def interp(points, q):
        qs = [p[1] for p in points]
        rs = [math.log10(p[0]) for p in points]
        out = np.zeros_like(q)
        for i in range(4):
            term = np.full_like(q, rs[i])
            for j in range(4):
                if j != i:
                    term *= (q - qs[j]) / (qs[i] - qs[j])
            out += term
        return out

    lo = max(min(p[1] for p in anchor), min(p[1] for p in test))
    hi = min(max(p[1] for p in anchor), max(p[1] for p in test))
    q = np.linspace(lo, hi, n)
    diff = interp(test, q) - interp(anchor, q)
    avg = np.sum((diff[1:] + diff[:-1]) / 2 * np.diff(q)) / (hi - lo)
    return (10 ** avg - 1) * 100


ANCHOR = [(1000.0, 34.1), (1900.0, 36.9), (3600.0, 39.6), (7000.0, 42.0)]
TEST = [(880.0, 34.4), (1700.0, 37.1), (3150.0, 39.7), (6300.0, 42.3)]


class TestBDRate:
    def test_identical(self):
        assert bd_rate(ANCHOR, ANCHOR) == 0.0

    def test_uniform_ten_percent(self):
        shifted = [(r * 1.10, q) for r, q in ANCHOR]
        assert bd_rate(ANCHOR, shifted) == pytest.approx(10.0, abs=1e-6)

    def test_cheaper_is_negative(self):
        cheaper = [(r * 0.8, q) for r, q in ANCHOR]
        assert bd_rate(ANCHOR, cheaper) < 0

    def test_against_trapezoid_oracle(self):
        got = bd_rate(ANCHOR, TEST)
        assert got < 0
        assert got == pytest.approx(lagrange_trapezoid_bd(ANCHOR, TEST), abs=1e-6)

    def test_points_accept_dataclass(self):
        pts = [RateQualityPoint(r, q) for r, q in ANCHOR]
        assert bd_rate(pts, TEST) == bd_rate(ANCHOR, TEST)

    def test_too_few_points(self):
        with pytest.raises(MetricError, match="at least 4"):
            bd_rate(ANCHOR[:3], TEST)

    def test_disjoint_ranges(self):
        far = [(r, q + 20) for r, q in ANCHOR]
        with pytest.raises(MetricError, match="overlap"):
            bd_rate(ANCHOR, far)

    def test_nonpositive_rate(self):
        with pytest.raises(MetricError):
            RateQualityPoint(0.0, 30.0)

    def test_read_csv(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("bitrate_kbps,psnr_db\n" + "".join(f"{r},{q}\n" for r, q in ANCHOR))
        assert [(x.bitrate, x.quality) for x in read_rd_curve(p)] == ANCHOR
        bad = tmp_path / "b.csv"
        bad.write_text("rate,q\n1,2\n")
        with pytest.raises(MetricError, match="header"):
            read_rd_curve(bad)


class TestSampleSet:
    def test_two_points(self):
        s = build_sampleset(2)
        assert len(s) == 2
        assert s.lat[0] > 0 > s.lat[1]
        assert np.all(np.abs(s.lat) <= math.pi / 2) and np.all((s.lon >= -math.pi) & (s.lon < math.pi))

    def test_hemisphere_balance(self):
        s = build_sampleset(10_000)
        north = int(np.sum(s.lat > 0))
        assert abs(north - 5000) <= 50

    def test_band_uniformity(self):
        n = 655_362
        s = build_sampleset(n)
        edges = np.linspace(-1, 1, 19)  # equal-area bands in sin(lat)
        counts, _ = np.histogram(np.sin(s.lat), edges)
        assert np.max(np.abs(counts / (n / 18) - 1)) <= 0.05

    def test_no_duplicates(self):
        s = build_sampleset(50_000)
        pts = np.round(np.stack([s.lat, s.lon], 1), 12)
        assert len(np.unique(pts, axis=0)) == 50_000

    def test_default_builds_fast(self):
        t0 = time.perf_counter()
        s = build_sampleset()
        assert time.perf_counter() - t0 < 1.0
        assert len(s) == 655_362

    def test_rejects_single_point(self):
        with pytest.raises(ValueError):
            build_sampleset(1)
