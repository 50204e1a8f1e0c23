"""Labeled polygons, pixel extraction, strata and train/test splits.

Reference polygons are rasterized by a strict pixel-center-in-polygon
test, turned into per-pixel or polygon-averaged feature samples, and
split at polygon granularity so no pixel of one polygon can leak across
the train/test boundary.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grids import DekadalCube, FeatureWindow, GridGeometry, slice_window

log = logging.getLogger(__name__)

# smallest area a survey polygon may represent (circle of 5 m radius)
LUCAS_MMU_M2 = 78.53


class SamplingError(ValueError):
    """Degenerate geometry or invalid extraction request."""


@dataclass
class LabeledPolygon:
    """Reference polygon: simple closed ring with a study class and stratum."""

    pid: int
    class_code: int
    stratum: int
    vertices: np.ndarray
    lucas_copernicus: bool = False

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise SamplingError(f"polygon {self.pid}: ring needs at least 3 (x, y) vertices")
        # drop an explicit closing vertex; the ring is closed implicitly
        if np.array_equal(v[0], v[-1]):
            v = v[:-1]
        if len(v) < 3:
            raise SamplingError(f"polygon {self.pid}: degenerate ring")
        self.vertices = v
        if self.area_m2 <= 0:
            raise SamplingError(f"polygon {self.pid}: zero or negative area")
        if self._self_intersects():
            raise SamplingError(f"polygon {self.pid}: ring is self-intersecting")
        if self.lucas_copernicus and self.area_m2 < LUCAS_MMU_M2:
            raise SamplingError(
                f"polygon {self.pid}: area {self.area_m2:.2f} m2 below the survey MMU"
            )

    @property
    def area_m2(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def area_ha(self) -> float:
        return self.area_m2 / 10_000.0

    def centroid(self) -> tuple[float, float]:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        a = cross.sum() / 2.0
        cx = np.sum((x + xn) * cross) / (6.0 * a)
        cy = np.sum((y + yn) * cross) / (6.0 * a)
        return float(cx), float(cy)

    def _self_intersects(self) -> bool:
        # O(n^2) proper-crossing check; reference rings are small
        v = self.vertices
        n = len(v)
        segs = [(v[i], v[(i + 1) % n]) for i in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                if j == i or (j + 1) % n == i or (i + 1) % n == j:
                    continue
                if _segments_cross(*segs[i], *segs[j]):
                    return True
        return False


def _segments_cross(p0, p1, q0, q1) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q0, q1, p0), orient(q0, q1, p1)
    d3, d4 = orient(p0, p1, q0), orient(p0, p1, q1)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0


def rasterize(polygon: LabeledPolygon, geometry: GridGeometry) -> np.ndarray:
    """Flat row-major indices of pixels whose centers fall strictly inside.

    Centers exactly on a ring edge are excluded, so half-pixel-shifted
    polygons do not pick up boundary pixels.
    """
    v = polygon.vertices
    row_hi, col_hi = geometry.cell_of(v[:, 0].max(), v[:, 1].min())
    row_lo, col_lo = geometry.cell_of(v[:, 0].min(), v[:, 1].max())
    r0, r1 = max(int(row_lo), 0), min(int(row_hi) + 1, geometry.height)
    c0, c1 = max(int(col_lo), 0), min(int(col_hi) + 1, geometry.width)
    if r0 >= r1 or c0 >= c1:
        return np.empty(0, dtype=np.int64)
    rows, cols = np.meshgrid(np.arange(r0, r1), np.arange(c0, c1), indexing="ij")
    rows, cols = rows.ravel(), cols.ravel()
    px, py = geometry.pixel_center(rows, cols)
    keep = _points_strictly_inside(px, py, v)
    return (rows[keep] * geometry.width + cols[keep]).astype(np.int64)


def _points_strictly_inside(px: np.ndarray, py: np.ndarray, ring: np.ndarray) -> np.ndarray:
    """Even-odd crossing test with points on any edge excluded."""
    inside = np.zeros(px.shape, dtype=bool)
    on_edge = np.zeros(px.shape, dtype=bool)
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        cross = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
        within = (
            (px >= min(x0, x1)) & (px <= max(x0, x1))
            & (py >= min(y0, y1)) & (py <= max(y0, y1))
        )
        on_edge |= (cross == 0.0) & within
        hits = (y0 <= py) != (y1 <= py)
        if np.any(hits):
            t = np.zeros_like(py)
            np.divide(py - y0, y1 - y0, out=t, where=hits)
            x_at = x0 + t * (x1 - x0)
            inside[hits] ^= px[hits] < x_at[hits]
    return inside & ~on_edge


@dataclass
class SampleSet:
    """Feature rows extracted from a cube through reference polygons."""

    window: FeatureWindow
    mode: str  # "per-pixel" | "polygon-averaged"
    polygon_ids: np.ndarray
    labels: np.ndarray
    strata: np.ndarray
    features: np.ndarray
    dropped_polygons: int = 0

    def __post_init__(self):
        self.polygon_ids = np.asarray(self.polygon_ids, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.strata = np.asarray(self.strata, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=np.float64)
        n = len(self.polygon_ids)
        if not (len(self.labels) == len(self.strata) == self.features.shape[0] == n):
            raise SamplingError("sample arrays disagree in length")
        if n and self.features.shape[1] != self.window.n_features:
            raise SamplingError(
                f"feature length {self.features.shape[1]} != window {self.window.n_features}"
            )

    def __len__(self) -> int:
        return len(self.polygon_ids)

    def subset(self, mask: np.ndarray) -> "SampleSet":
        return SampleSet(
            window=self.window,
            mode=self.mode,
            polygon_ids=self.polygon_ids[mask],
            labels=self.labels[mask],
            strata=self.strata[mask],
            features=self.features[mask],
        )


def extract_samples(
    cube: DekadalCube,
    polygons: list[LabeledPolygon],
    window: FeatureWindow,
    mode: str = "per-pixel",
    require_full_window: bool = True,
) -> SampleSet:
    """Feature rows per polygon pixel (or one averaged row per polygon).

    A pixel contributes only when every dekad of the window is valid
    there; with require_full_window=False, pixels valid in at least one
    dekad are kept and missing dekads become NaN (useful when a later
    stage re-slices to shorter windows). Polygons with no usable pixel
    are dropped with a logged count. Output rows are ordered by
    (polygon id, row-major pixel index), independent of input order.
    """
    if mode not in ("per-pixel", "polygon-averaged"):
        raise SamplingError(f"unknown extraction mode {mode!r}")
    if not polygons:
        raise SamplingError("no polygons to extract")

    feats, valid = slice_window(cube, window)
    if not require_full_window:
        d0, d1 = window.start_dekad, window.end_dekad + 1
        any_valid = cube.valid[d0:d1].any(axis=0).reshape(-1)
        dekad_valid = cube.valid[d0:d1].reshape(d1 - d0, -1)
        feats = feats.astype(np.float64).copy()
        nan_cols = ~np.concatenate([dekad_valid.T] * len(window.bands), axis=1)
        feats[nan_cols] = np.nan
        valid = any_valid

    ids, labels, strata, rows = [], [], [], []
    dropped = 0
    for poly in sorted(polygons, key=lambda p: p.pid):
        idx = rasterize(poly, cube.geometry)
        idx = idx[valid[idx]]
        if idx.size == 0:
            dropped += 1
            continue
        block = feats[idx]
        if mode == "per-pixel":
            rows.append(block)
            ids.extend([poly.pid] * len(idx))
            labels.extend([poly.class_code] * len(idx))
            strata.extend([poly.stratum] * len(idx))
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                rows.append(np.nanmean(block, axis=0, keepdims=True))
            ids.append(poly.pid)
            labels.append(poly.class_code)
            strata.append(poly.stratum)
    if dropped:
        log.info("extract_samples: dropped %d polygon(s) with no valid pixel", dropped)
    if not rows:
        raise SamplingError("no polygon produced any valid sample")
    return SampleSet(
        window=window,
        mode=mode,
        polygon_ids=np.array(ids),
        labels=np.array(labels),
        strata=np.array(strata),
        features=np.vstack(rows),
        dropped_polygons=dropped,
    )


def assign_stratum(x: float, y: float, stratum_values: np.ndarray, stratum_geometry: GridGeometry) -> int:
    """Stratum code of the raster cell containing a point (half-open cells)."""
    row, col = stratum_geometry.cell_of(x, y)
    if not stratum_geometry.contains_cell(row, col):
        raise SamplingError(f"point ({x}, {y}) outside stratum raster coverage")
    value = int(np.asarray(stratum_values)[row, col])
    if value <= 0:
        raise SamplingError(f"stratum raster has no stratum at ({x}, {y})")
    return value


def split_polygons(samples: SampleSet, fraction: float = 0.8, seed: int = 0) -> tuple[SampleSet, SampleSet]:
    """Class-stratified train/test split on polygon ids.

    Every row of one polygon lands on the same side. Within each class the
    polygon count splits as close to `fraction` as rounding allows; a class
    with a single polygon goes entirely to train with a warning.
    """
    if not 0.0 < fraction < 1.0:
        raise SamplingError(f"split fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    train_ids: set[int] = set()
    for code in np.unique(samples.labels):
        pids = np.unique(samples.polygon_ids[samples.labels == code])
        if len(pids) == 1:
            warnings.warn(
                f"class {code} has a single polygon; assigned to train", stacklevel=2
            )
            train_ids.add(int(pids[0]))
            continue
        perm = rng.permutation(np.sort(pids))
        n_train = int(round(fraction * len(pids)))
        n_train = min(max(n_train, 1), len(pids) - 1)
        train_ids.update(int(p) for p in perm[:n_train])
    mask = np.isin(samples.polygon_ids, sorted(train_ids))
    return samples.subset(mask), samples.subset(~mask)


def sample_census(samples: SampleSet) -> list[tuple[int, int, int, int]]:
    """(class, stratum, polygon count, pixel/row count) table, sorted."""
    out = []
    for code in np.unique(samples.labels):
        for stratum in np.unique(samples.strata[samples.labels == code]):
            m = (samples.labels == code) & (samples.strata == stratum)
            out.append((int(code), int(stratum), len(np.unique(samples.polygon_ids[m])), int(m.sum())))
    return out


# ---------------------------------------------------------------------------
# Plain-text formats
# ---------------------------------------------------------------------------

def write_polygons(polygons: list[LabeledPolygon], path: str | Path):
    """One polygon per line: id, class, stratum, x0,y0;x1,y1;..."""
    lines = ["id\tclass\tstratum\tvertices"]
    for p in polygons:
        ring = ";".join(f"{x:g},{y:g}" for x, y in p.vertices)
        lines.append(f"{p.pid}\t{p.class_code}\t{p.stratum}\t{ring}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_polygons(path: str | Path) -> list[LabeledPolygon]:
    polygons = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.startswith("#") or line.startswith("id\t"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise SamplingError(f"{path}:{ln}: expected 4 columns")
        pid, code, stratum, ring = parts
        vertices = [tuple(float(c) for c in v.split(",")) for v in ring.split(";")]
        polygons.append(
            LabeledPolygon(
                pid=int(pid), class_code=int(code), stratum=int(stratum), vertices=np.array(vertices)
            )
        )
    return polygons


def write_samples(samples: SampleSet, path: str | Path):
    names = samples.window.feature_names()
    lines = [
        f"# window={samples.window.describe()}",
        f"# mode={samples.mode}",
        "polygon_id\tclass\tstratum\t" + "\t".join(names),
    ]
    for i in range(len(samples)):
        feats = "\t".join(repr(float(v)) for v in samples.features[i])
        lines.append(
            f"{samples.polygon_ids[i]}\t{samples.labels[i]}\t{samples.strata[i]}\t{feats}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_samples(path: str | Path) -> SampleSet:
    window = None
    mode = "per-pixel"
    ids, labels, strata, rows = [], [], [], []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# window="):
            window = FeatureWindow.parse(line.split("=", 1)[1])
            continue
        if line.startswith("# mode="):
            mode = line.split("=", 1)[1]
            continue
        if not line.strip() or line.startswith("#") or line.startswith("polygon_id\t"):
            continue
        parts = line.split("\t")
        ids.append(int(parts[0]))
        labels.append(int(parts[1]))
        strata.append(int(parts[2]))
        rows.append([float(v) for v in parts[3:]])
    if window is None:
        raise SamplingError(f"{path}: missing '# window=' header")
    return SampleSet(
        window=window,
        mode=mode,
        polygon_ids=np.array(ids),
        labels=np.array(labels),
        strata=np.array(strata),
        features=np.array(rows, dtype=np.float64),
    )
