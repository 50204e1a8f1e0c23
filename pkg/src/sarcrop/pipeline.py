"""Two-strata, two-phase classification over cubes plus post-classification masks.

Level-1 models assign one of the broad land-cover classes per pixel; only
pixels called arable are handed to the level-2 crop-type model of their
stratum. Terrain and auxiliary-product masks are applied afterwards with
explicit per-pixel reason codes so the original class stays auditable.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import legend
from .grids import (
    DekadalCube,
    FeatureWindow,
    GridGeometry,
    _geometry_entries,
    _geometry_from,
    _read_manifest,
    _write_manifest,
    slice_window,
)
from .forest import ForestModel, ForestError, predict

ARABLE_LEVEL1 = 200

# mask-reason codes carried in the 8-bit reason grid
REASON_NONE = 0
REASON_NO_DATA = 1      # invalid input features; the pixel was never classified
REASON_TERRAIN = 2      # high elevation AND steep slope
REASON_BUILTUP = 3
REASON_WATER = 4
REASON_AUXILIARY = 5

_LAYER_REASONS = {"builtup": REASON_BUILTUP, "water": REASON_WATER, "auxiliary": REASON_AUXILIARY}
REASON_NAMES = {
    REASON_NONE: "none",
    REASON_NO_DATA: "nodata",
    REASON_TERRAIN: "terrain",
    REASON_BUILTUP: "builtup",
    REASON_WATER: "water",
    REASON_AUXILIARY: "auxiliary",
}

# level-1 classes kept in the map but poorly supported by training data
LOW_CONFIDENCE_CLASSES = (100, 600)


class PipelineError(ValueError):
    """Model/feature mismatch, stratum gaps, or misaligned layers."""


@dataclass
class ClassifiedMap:
    """Per-pixel study class codes with mask reasons and provenance.

    A pixel is reported (counts in censuses and assessments) only when its
    reason code is REASON_NONE; masked pixels keep their class for audit.
    """

    geometry: GridGeometry
    classes: np.ndarray
    reason: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.classes = np.asarray(self.classes, dtype=np.uint16)
        self.reason = np.asarray(self.reason, dtype=np.uint8)
        if self.classes.shape != self.geometry.shape or self.reason.shape != self.geometry.shape:
            raise PipelineError("class/reason grids must match the geometry")
        coded = self.classes[self.reason != REASON_NO_DATA]
        unknown = set(np.unique(coded).tolist()) - set(legend.STUDY_CLASSES) - {0}
        if unknown:
            raise PipelineError(f"classified map holds non-legend codes {sorted(unknown)}")

    @property
    def valid(self) -> np.ndarray:
        """Pixels that were classified at all (maybe masked later)."""
        return self.reason != REASON_NO_DATA

    @property
    def reported(self) -> np.ndarray:
        """Pixels that carry an unmasked class."""
        return self.reason == REASON_NONE


@dataclass
class MaskLayer:
    """Boolean mask aligned to the map grid, labeled by what it represents."""

    kind: str
    geometry: GridGeometry
    mask: np.ndarray

    def __post_init__(self):
        if self.kind not in ("elevation", "slope", "builtup", "water", "auxiliary"):
            raise PipelineError(f"unknown mask layer kind {self.kind!r}")
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.geometry.shape:
            raise PipelineError("mask layer shape must match its geometry")

    @staticmethod
    def from_dem(dem: np.ndarray, geometry: GridGeometry, elevation_limit: float) -> "MaskLayer":
        return MaskLayer("elevation", geometry, np.asarray(dem) > elevation_limit)

    @staticmethod
    def from_slope(slope_deg: np.ndarray, geometry: GridGeometry, slope_limit: float) -> "MaskLayer":
        return MaskLayer("slope", geometry, np.asarray(slope_deg) > slope_limit)


def _stratum_per_pixel(geometry: GridGeometry, stratum_values: np.ndarray, stratum_geometry: GridGeometry) -> np.ndarray:
    """Stratum code of every map pixel, looked up in the (possibly coarser) stratum raster."""
    rows, cols = np.meshgrid(np.arange(geometry.height), np.arange(geometry.width), indexing="ij")
    x, y = geometry.pixel_center(rows, cols)
    srow, scol = stratum_geometry.cell_of(x, y)
    if not np.all(stratum_geometry.contains_cell(srow, scol)):
        raise PipelineError("stratum raster does not cover the map grid")
    return np.asarray(stratum_values)[srow, scol].astype(np.int64)


def classify_two_phase(
    cube: DekadalCube,
    level1_models: dict[int, ForestModel],
    level2_models: dict[int, ForestModel],
    stratum_values: np.ndarray,
    stratum_geometry: GridGeometry,
    window: FeatureWindow,
    *,
    tile_rows: int | None = None,
    workers: int = 1,
) -> ClassifiedMap:
    """Hierarchical per-pixel classification with per-stratum models.

    Pixels classified arable at level 1 are re-classified by the level-2
    model of the same stratum; every other pixel keeps its level-1 code.
    Pixels with any invalid feature in the window stay unclassified
    (reason 'nodata'). Tiling only partitions the work: the output is
    identical to the single-pass result.
    """
    for s, model in list(level1_models.items()) + list(level2_models.items()):
        if model.n_features != window.n_features:
            raise PipelineError(
                f"model (stratum {s}) expects {model.n_features} features, window has {window.n_features}"
            )

    if tile_rows:
        return _classify_tiled(
            cube, level1_models, level2_models, stratum_values, stratum_geometry,
            window, tile_rows, workers,
        )

    X, valid = slice_window(cube, window)
    strata = _stratum_per_pixel(cube.geometry, stratum_values, stratum_geometry).reshape(-1)

    classes = np.zeros(X.shape[0], dtype=np.uint16)
    reason = np.full(X.shape[0], REASON_NO_DATA, dtype=np.uint8)
    level2_pixels = 0
    for s in sorted(set(strata[valid].tolist())):
        if s not in level1_models or s not in level2_models:
            raise PipelineError(f"no models for stratum {s}")
        rows = np.nonzero(valid & (strata == s))[0]
        if rows.size == 0:
            continue
        l1_pred, _ = predict(level1_models[s], X[rows])
        out = l1_pred.astype(np.uint16)
        arable = l1_pred == ARABLE_LEVEL1
        if arable.any():
            l2_pred, _ = predict(level2_models[s], X[rows[arable]])
            out[arable] = l2_pred.astype(np.uint16)
            level2_pixels += int(arable.sum())
        classes[rows] = out
        reason[rows] = REASON_NONE

    h, w = cube.geometry.shape
    return ClassifiedMap(
        geometry=cube.geometry,
        classes=classes.reshape(h, w),
        reason=reason.reshape(h, w),
        provenance={
            "window": window.describe(),
            "level1_models": {s: _model_id(m) for s, m in level1_models.items()},
            "level2_models": {s: _model_id(m) for s, m in level2_models.items()},
            "level2_pixels": level2_pixels,
            "low_confidence_classes": LOW_CONFIDENCE_CLASSES,
            "masks_applied": [],
        },
    )


def _model_id(model: ForestModel) -> str:
    hp = model.hyperparams
    return (
        f"level{model.level or '-'}_str{model.stratum or '-'}"
        f"_t{hp.n_estimators}_{hp.max_features_rule}_seed{model.seed}"
    )


def _classify_tiled(cube, l1, l2, stratum_values, stratum_geometry, window, tile_rows, workers):
    edges = list(range(0, cube.geometry.height, tile_rows)) + [cube.geometry.height]
    spans = [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]

    def run(span):
        r0, r1 = span
        return classify_two_phase(
            cube.crop(r0, r1, 0, cube.geometry.width), l1, l2,
            stratum_values, stratum_geometry, window,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, spans))
    else:
        parts = [run(s) for s in spans]
    cmap = ClassifiedMap(
        geometry=cube.geometry,
        classes=np.concatenate([p.classes for p in parts], axis=0),
        reason=np.concatenate([p.reason for p in parts], axis=0),
        provenance=parts[0].provenance,
    )
    cmap.provenance["level2_pixels"] = sum(p.provenance["level2_pixels"] for p in parts)
    return cmap


def compute_slope(dem: np.ndarray, pixel_size: float) -> np.ndarray:
    """Slope in degrees from a DEM by Horn's 3x3 finite differences.

    Border pixels use an edge-replicated (clamped) neighborhood.
    """
    dem = np.asarray(dem, dtype=np.float64)
    if dem.ndim != 2 or dem.shape[0] < 3 or dem.shape[1] < 3:
        raise PipelineError("slope needs a DEM of at least 3x3 pixels")
    z = np.pad(dem, 1, mode="edge")
    nw, n_, ne = z[:-2, :-2], z[:-2, 1:-1], z[:-2, 2:]
    w_, e_ = z[1:-1, :-2], z[1:-1, 2:]
    sw, s_, se = z[2:, :-2], z[2:, 1:-1], z[2:, 2:]
    gx = ((ne + 2 * e_ + se) - (nw + 2 * w_ + sw)) / (8.0 * pixel_size)
    gy = ((sw + 2 * s_ + se) - (nw + 2 * n_ + ne)) / (8.0 * pixel_size)
    return np.degrees(np.arctan(np.hypot(gx, gy)))


def apply_masks(
    cmap: ClassifiedMap,
    layers: list[MaskLayer] = (),
    *,
    dem: np.ndarray | None = None,
    slope: np.ndarray | None = None,
    elevation_limit: float = 1000.0,
    slope_limit: float = 10.0,
) -> ClassifiedMap:
    """Mask terrain and auxiliary-product pixels, recording a reason each.

    Terrain masks pixels that are BOTH above `elevation_limit` AND steeper
    than `slope_limit` (the conjunctive reading; pass infinite limits to
    disable, or pre-thresholded elevation/slope boolean layers). For other
    layers the pixel takes the layer's reason. A pixel already masked
    keeps its first reason, so application is idempotent and
    order-independent for disjoint reasons. Classes are retained under
    masks for audit.
    """
    shape = cmap.geometry.shape
    elev_mask = None
    slope_mask = None
    aux: list[tuple[int, np.ndarray]] = []
    for layer in layers:
        if layer.geometry != cmap.geometry:
            raise PipelineError(f"mask layer {layer.kind!r} is not aligned to the map")
        if layer.kind == "elevation":
            elev_mask = layer.mask if elev_mask is None else (elev_mask | layer.mask)
        elif layer.kind == "slope":
            slope_mask = layer.mask if slope_mask is None else (slope_mask | layer.mask)
        else:
            aux.append((_LAYER_REASONS[layer.kind], layer.mask))
    if dem is not None:
        if np.shape(dem) != shape:
            raise PipelineError("DEM is not aligned to the map")
        m = np.asarray(dem) > elevation_limit
        elev_mask = m if elev_mask is None else (elev_mask | m)
    if slope is not None:
        if np.shape(slope) != shape:
            raise PipelineError("slope grid is not aligned to the map")
        m = np.asarray(slope) > slope_limit
        slope_mask = m if slope_mask is None else (slope_mask | m)

    reason = cmap.reason.copy()
    order = []
    if elev_mask is not None and slope_mask is not None:
        hit = elev_mask & slope_mask & (reason == REASON_NONE)
        reason[hit] = REASON_TERRAIN
        order.append("terrain")
    for code, mask in aux:
        hit = mask & (reason == REASON_NONE)
        reason[hit] = code
        order.append(REASON_NAMES[code])

    provenance = dict(cmap.provenance)
    provenance["masks_applied"] = list(provenance.get("masks_applied", [])) + order
    provenance["mask_limits"] = {"elevation_m": elevation_limit, "slope_deg": slope_limit}
    return ClassifiedMap(
        geometry=cmap.geometry,
        classes=cmap.classes.copy(),
        reason=reason,
        provenance=provenance,
    )


def area_census(cmap: ClassifiedMap) -> dict[int, float]:
    """Hectares per class by pixel counting over reported (unmasked) pixels."""
    px_ha = cmap.geometry.pixel_area_ha
    out: dict[int, float] = {}
    reported = cmap.reported
    for code in np.unique(cmap.classes[reported]):
        out[int(code)] = float(np.sum(reported & (cmap.classes == code))) * px_ha
    return out


def save_map(cmap: ClassifiedMap, directory: str | Path):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = _geometry_entries(cmap.geometry)
    entries["byte_order"] = "little-endian"
    for key, value in cmap.provenance.items():
        entries[f"provenance.{key}"] = value
    _write_manifest(directory / "map.txt", entries)
    (directory / "classes.u16").write_bytes(cmap.classes.astype("<u2").tobytes())
    (directory / "reason.u8").write_bytes(cmap.reason.astype("u1").tobytes())


def load_map(directory: str | Path) -> ClassifiedMap:
    directory = Path(directory)
    entries = _read_manifest(directory / "map.txt")
    geom = _geometry_from(entries)
    classes = np.frombuffer((directory / "classes.u16").read_bytes(), dtype="<u2").reshape(geom.shape)
    reason = np.frombuffer((directory / "reason.u8").read_bytes(), dtype="u1").reshape(geom.shape)
    provenance = {k[len("provenance."):]: v for k, v in entries.items() if k.startswith("provenance.")}
    return ClassifiedMap(geometry=geom, classes=classes.copy(), reason=reason.copy(), provenance=provenance)
