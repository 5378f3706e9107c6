"""Latitude tile segmentation for omnidirectional video frames."""
from .estimator import CubemapTransformer, TileSegmenter
from .geometry import PlanarImage, SphericalCoord, PixelCoord, bilinear_sample, equirect_to_sphere, sphere_to_equirect
from .layout import LayoutManifest, Placement, compose, pack, unpack
from .metrics import RateQualityPoint, SampleSet, WeightTable, bd_rate, build_sampleset, lpsnr, spsnr
from .optimizer import OptimizationResult, best_tilecount, optimize_cuts
from .projector import (
    DensityRule,
    GeometryError,
    TileGeometry,
    TileKind,
    blend_overlaps,
    equirect_to_cubemap,
    cubemap_to_equirect,
    equirect_to_tiles,
    plan_tiles,
    remap,
    tile_forward,
    tile_inverse,
    tiles_to_equirect,
)
from .scheme import (
    AreaReport,
    InvalidSchemeError,
    PoleStyle,
    Projection,
    TileScheme,
    area_vs_tilecount,
    baseline_ratio,
    hemisphere_area,
    yu_pole_area,
)

__version__ = "0.1.0"
