"""scikit-learn style transformers wrapping the tile and cube map pipelines.

``fit`` learns the geometry from an equirectangular frame (its size fixes the
sampling density); ``transform`` maps frames to the packed canvas (or a list
of tiles) and ``inverse_transform`` maps back to equirectangular.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import layout, metrics, optimizer, projector
from .scheme import TileScheme, hemisphere_area
from .validation import check_frames, check_image, check_n_tiles, check_pole, check_sigma, output_like


class TileSegmenter(TransformerMixin, BaseEstimator):
    """Latitude-tiled representation of equirectangular frames.

    Parameters
    ----------
    n_tiles : int
        Odd tile count; ``(n_tiles - 1) / 2`` cuts per hemisphere.
    pole : {"square", "circle"}
        Pole-cap area model used when optimizing the cuts.
    sigma : float
        Overlap as a fraction of the frame height (0.005 is 0.5%).
    cuts_deg : sequence of float, optional
        Fixed cut latitudes; skips the optimization when given.
    pack : bool
        Emit one packed canvas instead of a list of tiles.
    blend : bool
        Blend overlap bands on reconstruction.
    n_jobs : int, optional
        Threads for the remapping kernels; results do not depend on it.
    """

    def __init__(self, n_tiles=5, pole="square", sigma=0.0, cuts_deg=None, pack=True, blend=True, n_jobs=None):
        self.n_tiles = n_tiles
        self.pole = pole
        self.sigma = sigma
        self.cuts_deg = cuts_deg
        self.pack = pack
        self.blend = blend
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        frames, _ = check_frames(X)
        ref = frames[0]
        pole = check_pole(self.pole)
        sigma = check_sigma(self.sigma)
        if self.cuts_deg is None:
            n = (check_n_tiles(self.n_tiles) - 1) // 2
            self.optimization_ = optimizer.optimize_cuts(n, pole, sigma)
            self.scheme_ = self.optimization_.scheme
        else:
            self.optimization_ = None
            self.scheme_ = TileScheme.from_degrees(self.cuts_deg, pole, sigma)
        self.density_ = projector.DensityRule.from_equirect_height(ref.height)
        self.tiles_ = projector.plan_tiles(self.scheme_, self.density_)
        self.manifest_ = layout.pack(self.tiles_, self.scheme_)
        self.input_size_ = (ref.width, ref.height)
        self.color_ = ref.color
        return self

    def _transform_one(self, img):
        tiles = projector.equirect_to_tiles(img, self.tiles_, self.n_jobs)
        return layout.compose(tiles, self.manifest_) if self.pack else tiles

    def transform(self, X):
        check_is_fitted(self, "tiles_")
        frames, single = check_frames(X)
        out = []
        for frame, src in zip(frames, X if not single else [X]):
            res = self._transform_one(frame)
            out.append(output_like(res, src) if self.pack else [output_like(t, src) for t in res])
        return out[0] if single else out

    def _inverse_one(self, Xt):
        if self.pack:
            canvas = check_image(Xt, name="Xt")
            tiles = layout.unpack(canvas, self.manifest_)
            template = Xt
        else:
            tiles = [check_image(t, name=f"Xt[{i}]") for i, t in enumerate(Xt)]
            template = Xt[0]
        w, h = self.input_size_
        img = projector.tiles_to_equirect(tiles, self.tiles_, w, h, blend=self.blend, n_jobs=self.n_jobs)
        return output_like(img, template)

    def inverse_transform(self, Xt):
        check_is_fitted(self, "tiles_")
        if self.pack:
            if isinstance(Xt, (list, tuple)):
                return [self._inverse_one(x) for x in Xt]
            return self._inverse_one(Xt)
        if Xt and isinstance(Xt[0], (list, tuple)):
            return [self._inverse_one(x) for x in Xt]
        return self._inverse_one(Xt)

    def score(self, X, y=None, samples=None):
        """Mean round-trip S-PSNR in dB (higher is better)."""
        frames, _ = check_frames(X)
        samples = samples or metrics.build_sampleset()
        vals = []
        for frame in frames:
            rec = self.inverse_transform(self.transform(frame))
            vals.append(metrics.spsnr(frame, rec, samples))
        return float(np.mean(vals))

    @property
    def area_ratio_(self) -> float:
        check_is_fitted(self, "scheme_")
        return hemisphere_area(self.scheme_).ratio_to_sphere


class CubemapTransformer(TransformerMixin, BaseEstimator):
    """Six tangent cube faces in a 3x2 grid, ordered +x, -x, +y, -y, +z, -z."""

    def __init__(self, face_size=None, n_jobs=None):
        self.face_size = face_size
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        frames, _ = check_frames(X)
        ref = frames[0]
        self.face_size_ = self.face_size or projector.cube_face_size(ref.height)
        self.input_size_ = (ref.width, ref.height)
        return self

    def transform(self, X):
        check_is_fitted(self, "face_size_")
        frames, single = check_frames(X)
        out = [output_like(projector.equirect_to_cubemap(f, self.face_size_, self.n_jobs), src)
               for f, src in zip(frames, [X] if single else X)]
        return out[0] if single else out

    def inverse_transform(self, Xt):
        check_is_fitted(self, "face_size_")
        frames, single = check_frames(Xt, name="Xt")
        w, h = self.input_size_
        out = [output_like(projector.cubemap_to_equirect(f, w, h, self.n_jobs), src)
               for f, src in zip(frames, [Xt] if single else Xt)]
        return out[0] if single else out
