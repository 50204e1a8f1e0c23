"""Gridded backscatter scenes and dekadal feature cubes.

Per-scene linear-power sigma0 grids are edge-masked, averaged into 36
dekadal composites per year (linear mean, then dB for VV/VH; linear mean
for the VH/VV ratio band), and sliced into per-pixel feature vectors for
classification.
"""

from __future__ import annotations

import calendar
import datetime as dt
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

DEKADS_PER_YEAR = 36

# Scene bands are linear power; cube bands carry their output unit in the name.
SCENE_BANDS = ("VV", "VH", "CR")
CUBE_BANDS = ("VV_dB", "VH_dB", "CR")

# scene band -> cube band it composites into
_COMPOSITE_BAND = {"VV": "VV_dB", "VH": "VH_dB", "CR": "CR"}
# cube bands averaged in linear power and converted to dB afterwards
_DB_BANDS = {"VV_dB", "VH_dB"}


class GridError(ValueError):
    """Invalid grid construction or mismatched grid operands."""


@dataclass(frozen=True)
class GridGeometry:
    """North-up pixel grid; origin is the map coordinate of the top-left corner."""

    width: int
    height: int
    pixel_size: float = 10.0
    origin_x: float = 0.0
    origin_y: float = 0.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise GridError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        if self.pixel_size <= 0:
            raise GridError(f"pixel_size must be > 0, got {self.pixel_size}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def pixel_area_ha(self) -> float:
        return self.pixel_size * self.pixel_size / 10_000.0

    def pixel_center(self, row, col):
        """Map coordinates of pixel centers; accepts scalars or arrays."""
        x = self.origin_x + (np.asarray(col) + 0.5) * self.pixel_size
        y = self.origin_y - (np.asarray(row) + 0.5) * self.pixel_size
        return x, y

    def cell_of(self, x, y):
        """(row, col) of the cell containing a map point.

        Half-open cells: a point exactly on a cell boundary belongs to the
        cell with the larger row/col index, so every point maps to exactly
        one cell.
        """
        col = np.floor((np.asarray(x, dtype=float) - self.origin_x) / self.pixel_size).astype(int)
        row = np.floor((self.origin_y - np.asarray(y, dtype=float)) / self.pixel_size).astype(int)
        return row, col

    def contains_cell(self, row, col):
        return (row >= 0) & (row < self.height) & (col >= 0) & (col < self.width)

    def crop(self, row0: int, row1: int, col0: int, col1: int) -> "GridGeometry":
        """Geometry of the [row0:row1, col0:col1] sub-window."""
        return GridGeometry(
            width=col1 - col0,
            height=row1 - row0,
            pixel_size=self.pixel_size,
            origin_x=self.origin_x + col0 * self.pixel_size,
            origin_y=self.origin_y - row0 * self.pixel_size,
        )


def dekad_of_date(date: dt.date) -> int:
    """Dekad index in [0, 35]: month-anchored thirds [1-10], [11-20], [21-end]."""
    return 3 * (date.month - 1) + min((date.day - 1) // 10, 2)


def dekad_bounds(year: int, dekad: int) -> tuple[dt.date, dt.date]:
    """Inclusive (first, last) calendar day of a dekad."""
    if not 0 <= dekad < DEKADS_PER_YEAR:
        raise GridError(f"dekad index out of range: {dekad}")
    month = dekad // 3 + 1
    third = dekad % 3
    last_dom = calendar.monthrange(year, month)[1]
    starts = (1, 11, 21)
    ends = (10, 20, last_dom)
    return dt.date(year, month, starts[third]), dt.date(year, month, ends[third])


@dataclass
class SceneGrid:
    """One acquisition of one band: linear-power sigma0 values plus validity."""

    date: dt.date
    band: str
    geometry: GridGeometry
    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        if self.band not in SCENE_BANDS:
            raise GridError(f"unknown scene band {self.band!r}")
        self.values = np.asarray(self.values, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.shape != self.geometry.shape or self.valid.shape != self.geometry.shape:
            raise GridError(
                f"array shape {self.values.shape} does not match geometry {self.geometry.shape}"
            )
        vals = self.values[self.valid]
        if vals.size and (not np.all(np.isfinite(vals)) or np.any(vals < 0)):
            raise GridError("valid scene values must be finite and >= 0 (linear power)")

    def crop(self, row0, row1, col0, col1) -> "SceneGrid":
        return SceneGrid(
            date=self.date,
            band=self.band,
            geometry=self.geometry.crop(row0, row1, col0, col1),
            values=self.values[row0:row1, col0:col1],
            valid=self.valid[row0:row1, col0:col1],
        )


def _check_paired(a: SceneGrid, b: SceneGrid):
    if a.geometry != b.geometry:
        raise GridError("paired scenes must share grid geometry")
    if a.date != b.date:
        raise GridError("paired scenes must share acquisition date")


def mask_scene_edges(
    vv: SceneGrid,
    vh: SceneGrid,
    threshold_db: float = -25.0,
    min_group: int = 1,
) -> tuple[SceneGrid, SceneGrid]:
    """Invalidate connected groups of low-return VV pixels in both bands.

    4-connected components of valid VV pixels below `threshold_db`, of size
    at least `min_group`, are marked invalid in VV and VH alike. Smaller
    groups are kept. Idempotent.
    """
    _check_paired(vv, vh)
    if vv.band != "VV" or vh.band != "VH":
        raise GridError(f"expected (VV, VH) scene pair, got ({vv.band}, {vh.band})")
    if min_group < 1:
        raise GridError("min_group must be >= 1")
    threshold_linear = 10.0 ** (threshold_db / 10.0)
    below = vv.valid & (vv.values < threshold_linear)
    # default scipy structure is 4-connectivity
    labels, n_groups = ndimage.label(below)
    if n_groups:
        sizes = np.bincount(labels.ravel())
        kill_label = sizes >= min_group
        kill_label[0] = False
        kill = kill_label[labels]
    else:
        kill = np.zeros_like(below)
    new_valid = ~kill
    return (
        replace(vv, valid=vv.valid & new_valid),
        replace(vh, valid=vh.valid & new_valid),
    )


@dataclass
class DekadalCube:
    """Per-year dekadal composites: values[dekad, band, row, col] plus a
    per-(dekad, pixel) validity mask shared by all bands."""

    year: int
    bands: tuple[str, ...]
    geometry: GridGeometry
    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.bands = tuple(self.bands)
        for b in self.bands:
            if b not in CUBE_BANDS:
                raise GridError(f"unknown cube band {b!r}")
        expected = (DEKADS_PER_YEAR, len(self.bands)) + self.geometry.shape
        self.values = np.asarray(self.values, dtype=np.float32)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.shape != expected:
            raise GridError(f"cube values shape {self.values.shape}, expected {expected}")
        if self.valid.shape != (DEKADS_PER_YEAR,) + self.geometry.shape:
            raise GridError("cube validity must be one plane per dekad")

    def band_index(self, band: str) -> int:
        try:
            return self.bands.index(band)
        except ValueError:
            raise GridError(f"band {band!r} not present in cube {self.bands}") from None

    def crop(self, row0, row1, col0, col1) -> "DekadalCube":
        return DekadalCube(
            year=self.year,
            bands=self.bands,
            geometry=self.geometry.crop(row0, row1, col0, col1),
            values=self.values[:, :, row0:row1, col0:col1],
            valid=self.valid[:, row0:row1, col0:col1],
        )


def compute_cr(vv: SceneGrid, vh: SceneGrid) -> SceneGrid:
    """Per-scene cross-polarization ratio, linear VH / linear VV.

    Invalid wherever either input is invalid or VV is zero. The ratio stays
    linear through compositing; it is never converted to dB.
    """
    _check_paired(vv, vh)
    if vv.band != "VV" or vh.band != "VH":
        raise GridError(f"expected (VV, VH) scene pair, got ({vv.band}, {vh.band})")
    valid = vv.valid & vh.valid & (vv.values != 0)
    values = np.zeros_like(vv.values)
    np.divide(vh.values, vv.values, out=values, where=valid)
    return SceneGrid(date=vv.date, band="CR", geometry=vv.geometry, values=values, valid=valid)


def composite_dekads(
    scenes: list[SceneGrid],
    year: int,
    *,
    geometry: GridGeometry | None = None,
    bands: tuple[str, ...] | None = None,
) -> DekadalCube:
    """Average scenes into 36 dekadal composites.

    Per pixel and dekad, the arithmetic mean of all valid linear
    contributions (ascending and descending pooled) is taken; VV/VH means
    are then converted to dB as 10*log10(mean), the CR mean stays linear.
    A dekad-pixel with no valid contribution in every requested band is
    invalid, never zero-filled. Permutation-invariant: means are computed
    from per-dekad sums, so scene order cannot change the result.
    """
    if not scenes:
        if geometry is None:
            raise GridError("empty scene list needs an explicit geometry")
        cube_bands = tuple(bands) if bands else ("VV_dB", "VH_dB")
        shape = (DEKADS_PER_YEAR, len(cube_bands)) + geometry.shape
        return DekadalCube(
            year=year,
            bands=cube_bands,
            geometry=geometry,
            values=np.zeros(shape, dtype=np.float32),
            valid=np.zeros((DEKADS_PER_YEAR,) + geometry.shape, dtype=bool),
        )

    geom = scenes[0].geometry
    scene_bands = []
    for s in scenes:
        if s.geometry != geom:
            raise GridError("all scenes must share one grid geometry")
        if s.date.year != year:
            raise GridError(f"scene dated {s.date} outside compositing year {year}")
        if s.band not in scene_bands:
            scene_bands.append(s.band)
    cube_bands = tuple(bands) if bands else tuple(_COMPOSITE_BAND[b] for b in SCENE_BANDS if b in scene_bands)

    h, w = geom.shape
    sums = np.zeros((DEKADS_PER_YEAR, len(cube_bands), h, w), dtype=np.float64)
    counts = np.zeros_like(sums)
    band_pos = {b: i for i, b in enumerate(cube_bands)}
    for s in scenes:
        target = _COMPOSITE_BAND[s.band]
        if target not in band_pos:
            continue
        d = dekad_of_date(s.date)
        bi = band_pos[target]
        sums[d, bi][s.valid] += s.values[s.valid]
        counts[d, bi][s.valid] += 1.0

    values = np.zeros_like(sums)
    have = counts > 0
    np.divide(sums, counts, out=values, where=have)
    for bi, b in enumerate(cube_bands):
        if b in _DB_BANDS:
            plane = values[:, bi]
            ok = have[:, bi] & (plane > 0)
            converted = np.full_like(plane, -np.inf)
            np.multiply(10.0, np.log10(plane, out=np.zeros_like(plane), where=ok), out=converted, where=ok)
            # a zero-power mean has no finite dB value; drop it
            have[:, bi] &= ok
            values[:, bi] = converted
    valid = have.all(axis=1)
    values = np.where(valid[:, None], values, 0.0)
    return DekadalCube(
        year=year,
        bands=cube_bands,
        geometry=geom,
        values=values.astype(np.float32),
        valid=valid,
    )


def composite_dekads_tiled(
    scenes: list[SceneGrid],
    year: int,
    tile_rows: int,
    *,
    workers: int = 1,
    geometry: GridGeometry | None = None,
    bands: tuple[str, ...] | None = None,
) -> DekadalCube:
    """Tile-parallel compositing; identical to the single-pass result.

    The grid is cut into horizontal bands composited independently (no
    shared mutable state) and stitched back together.
    """
    if not scenes:
        return composite_dekads(scenes, year, geometry=geometry, bands=bands)
    geom = scenes[0].geometry
    edges = list(range(0, geom.height, tile_rows)) + [geom.height]
    tiles = [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]

    def run(tile):
        r0, r1 = tile
        sub = [s.crop(r0, r1, 0, geom.width) for s in scenes]
        return composite_dekads(sub, year, bands=bands)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, tiles))
    else:
        parts = [run(t) for t in tiles]
    values = np.concatenate([p.values for p in parts], axis=2)
    valid = np.concatenate([p.valid for p in parts], axis=1)
    return DekadalCube(year=year, bands=parts[0].bands, geometry=geom, values=values, valid=valid)


@dataclass(frozen=True)
class FeatureWindow:
    """Contiguous dekad range and band subset defining one feature layout.

    Features are ordered band-major, dekad-minor: all dekads of the first
    band, then all dekads of the next.
    """

    start_dekad: int
    end_dekad: int
    bands: tuple[str, ...]

    def __post_init__(self):
        if not (0 <= self.start_dekad <= self.end_dekad < DEKADS_PER_YEAR):
            raise GridError(
                f"window [{self.start_dekad}, {self.end_dekad}] out of dekad range"
            )
        object.__setattr__(self, "bands", tuple(self.bands))

    @property
    def n_dekads(self) -> int:
        return self.end_dekad - self.start_dekad + 1

    @property
    def n_features(self) -> int:
        return len(self.bands) * self.n_dekads

    def feature_names(self) -> list[str]:
        return [
            f"{band}_{d:02d}"
            for band in self.bands
            for d in range(self.start_dekad, self.end_dekad + 1)
        ]

    def describe(self) -> str:
        return f"{self.start_dekad}:{self.end_dekad}/" + ",".join(self.bands)

    @staticmethod
    def parse(text: str) -> "FeatureWindow":
        span, bands = text.split("/")
        a, b = span.split(":")
        return FeatureWindow(int(a), int(b), tuple(bands.split(",")))

    def column_subset(self, sub: "FeatureWindow") -> np.ndarray:
        """Column indices of `sub` inside this window's feature layout."""
        names = {n: i for i, n in enumerate(self.feature_names())}
        try:
            return np.array([names[n] for n in sub.feature_names()], dtype=int)
        except KeyError as e:
            raise GridError(f"feature {e.args[0]} not covered by window {self.describe()}") from None


# Paper-default configuration: VV+VH over January..July, 44 features.
DEFAULT_WINDOW = FeatureWindow(0, 21, ("VV_dB", "VH_dB"))


def slice_window(cube: DekadalCube, window: FeatureWindow) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel feature matrix for one window.

    Returns (features, valid): features has one row per pixel in row-major
    order, shape (height*width, n_features); a row is valid only when every
    dekad of the window is valid at that pixel.
    """
    band_idx = [cube.band_index(b) for b in window.bands]
    d0, d1 = window.start_dekad, window.end_dekad + 1
    block = cube.values[d0:d1][:, band_idx]           # (nd, nb, h, w)
    block = np.moveaxis(block, (0, 1), (1, 0))        # (nb, nd, h, w)
    n_px = cube.geometry.height * cube.geometry.width
    features = block.reshape(window.n_features, n_px).T.copy()
    valid = cube.valid[d0:d1].all(axis=0).reshape(n_px)
    return features, valid


# ---------------------------------------------------------------------------
# On-disk formats: key=value manifest + flat little-endian binaries,
# validity as packed bitsets.
# ---------------------------------------------------------------------------

def _write_manifest(path: Path, entries: dict):
    lines = [f"{k}={v}" for k, v in entries.items()]
    path.write_text("\n".join(lines) + "\n")


def _read_manifest(path: Path) -> dict:
    entries = {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise GridError(f"malformed manifest line in {path}: {line!r}")
        k, v = line.split("=", 1)
        entries[k.strip()] = v.strip()
    return entries


def _geometry_entries(geom: GridGeometry) -> dict:
    return {
        "width": geom.width,
        "height": geom.height,
        "pixel_size": repr(geom.pixel_size),
        "origin_x": repr(geom.origin_x),
        "origin_y": repr(geom.origin_y),
    }


def _geometry_from(entries: dict) -> GridGeometry:
    return GridGeometry(
        width=int(entries["width"]),
        height=int(entries["height"]),
        pixel_size=float(entries["pixel_size"]),
        origin_x=float(entries["origin_x"]),
        origin_y=float(entries["origin_y"]),
    )


def _pack_bits(mask: np.ndarray) -> bytes:
    return np.packbits(mask.reshape(-1).astype(np.uint8)).tobytes()


def _unpack_bits(raw: bytes, shape: tuple[int, int]) -> np.ndarray:
    n = shape[0] * shape[1]
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), count=n)
    return bits.astype(bool).reshape(shape)


def save_scene(scene: SceneGrid, directory: str | Path):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = _geometry_entries(scene.geometry)
    entries.update({"date": scene.date.isoformat(), "band": scene.band, "byte_order": "little-endian"})
    _write_manifest(directory / "scene.txt", entries)
    (directory / "values.f32").write_bytes(scene.values.astype("<f4").tobytes())
    (directory / "valid.bits").write_bytes(_pack_bits(scene.valid))


def load_scene(directory: str | Path) -> SceneGrid:
    directory = Path(directory)
    entries = _read_manifest(directory / "scene.txt")
    geom = _geometry_from(entries)
    values = np.frombuffer((directory / "values.f32").read_bytes(), dtype="<f4").reshape(geom.shape)
    valid = _unpack_bits((directory / "valid.bits").read_bytes(), geom.shape)
    return SceneGrid(
        date=dt.date.fromisoformat(entries["date"]),
        band=entries["band"],
        geometry=geom,
        values=values.astype(np.float64),
        valid=valid,
    )


def save_cube(cube: DekadalCube, directory: str | Path):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = _geometry_entries(cube.geometry)
    entries.update({"year": cube.year, "bands": ",".join(cube.bands), "byte_order": "little-endian"})
    _write_manifest(directory / "cube.txt", entries)
    for d in range(DEKADS_PER_YEAR):
        for bi, band in enumerate(cube.bands):
            (directory / f"d{d:02d}_{band}.f32").write_bytes(cube.values[d, bi].astype("<f4").tobytes())
        (directory / f"d{d:02d}_valid.bits").write_bytes(_pack_bits(cube.valid[d]))


def load_cube(directory: str | Path) -> DekadalCube:
    directory = Path(directory)
    entries = _read_manifest(directory / "cube.txt")
    geom = _geometry_from(entries)
    bands = tuple(entries["bands"].split(","))
    values = np.zeros((DEKADS_PER_YEAR, len(bands)) + geom.shape, dtype=np.float32)
    valid = np.zeros((DEKADS_PER_YEAR,) + geom.shape, dtype=bool)
    for d in range(DEKADS_PER_YEAR):
        for bi, band in enumerate(bands):
            raw = (directory / f"d{d:02d}_{band}.f32").read_bytes()
            values[d, bi] = np.frombuffer(raw, dtype="<f4").reshape(geom.shape)
        valid[d] = _unpack_bits((directory / f"d{d:02d}_valid.bits").read_bytes(), geom.shape)
    return DekadalCube(year=int(entries["year"]), bands=bands, geometry=geom, values=values, valid=valid)


_GRID_DTYPES = {"f32": "<f4", "u8": "u1", "u16": "<u2", "i16": "<i2"}


def save_grid(values: np.ndarray, geometry: GridGeometry, directory: str | Path, dtype: str = "f32"):
    """Single-plane raster (DEM, stratum layer, region ids, ...)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = _geometry_entries(geometry)
    entries.update({"dtype": dtype, "byte_order": "little-endian"})
    _write_manifest(directory / "grid.txt", entries)
    (directory / f"values.{dtype}").write_bytes(np.asarray(values).astype(_GRID_DTYPES[dtype]).tobytes())


def load_grid(directory: str | Path) -> tuple[np.ndarray, GridGeometry]:
    directory = Path(directory)
    entries = _read_manifest(directory / "grid.txt")
    geom = _geometry_from(entries)
    dtype = entries["dtype"]
    raw = (directory / f"values.{dtype}").read_bytes()
    values = np.frombuffer(raw, dtype=_GRID_DTYPES[dtype]).reshape(geom.shape)
    return values.copy(), geom
