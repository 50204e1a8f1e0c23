"""Synthetic dekadal cubes with known ground truth.

Each crop gets a double-logistic seasonal curve per band (smooth green-up
to a plateau, smooth senescence back to baseline) plus Gaussian dB noise;
southern-stratum parcels use time-shifted curves (negative shift = earlier
season). Rectangular parcels keep the rasterization oracle trivial while
exercising every downstream stage. Generation is deterministic per seed:
each parcel draws from its own (seed, parcel id) stream, so parallel
generation and parcel order cannot change the output.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grids import DekadalCube, DEKADS_PER_YEAR, GridGeometry
from .sampling import LabeledPolygon


class SynthError(ValueError):
    """Overlapping parcels or inconsistent scenario definitions."""


@dataclass(frozen=True)
class BandCurve:
    """Double-logistic seasonal curve: baseline + amplitude * (rise - fall)."""

    baseline_db: float
    amplitude_db: float
    onset_dekad: float
    peak_dekad: float
    senescence_dekad: float

    def __post_init__(self):
        if not self.onset_dekad < self.peak_dekad < self.senescence_dekad:
            raise SynthError(
                f"curve needs onset < peak < senescence, got "
                f"({self.onset_dekad}, {self.peak_dekad}, {self.senescence_dekad})"
            )

    def value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        rise_mid = 0.5 * (self.onset_dekad + self.peak_dekad)
        rise_w = max((self.peak_dekad - self.onset_dekad) / 8.0, 0.125)
        fall_w = max((self.senescence_dekad - self.peak_dekad) / 4.0, 0.25)
        rise = 1.0 / (1.0 + np.exp(-(t - rise_mid) / rise_w))
        fall = 1.0 / (1.0 + np.exp(-(t - self.senescence_dekad) / fall_w))
        return self.baseline_db + self.amplitude_db * (rise - fall)


@dataclass(frozen=True)
class CropSignature:
    """Per-band curves, the southern time shift, and the noise level."""

    code: int
    vv: BandCurve
    vh: BandCurve
    stratum2_shift_dekads: float = -3.0
    noise_sigma_db: float = 1.5

    def __post_init__(self):
        if self.noise_sigma_db < 0:
            raise SynthError("noise sigma must be >= 0")

    def curve_values(self, band: str, stratum: int) -> np.ndarray:
        curve = self.vv if band == "VV_dB" else self.vh
        t = np.arange(DEKADS_PER_YEAR, dtype=np.float64)
        if stratum == 2:
            # negative shift moves the season earlier in the south
            t = t - self.stratum2_shift_dekads
        return curve.value(t)


# Arable baseline shared by all crops; separability starts at each crop's
# onset. Amplitude pairs (VV, VH) are mutually distinct with at least a
# 4.5 dB gap in one band, i.e. 3 sigma per dekad at the default 1.5 dB noise.
_VV_BASE = -13.0
_VH_BASE = -18.5

# (onset dekad, VV amplitude, VH amplitude); onsets come in pairs so the
# in-season hindcast sees two crops become separable every month Feb..Jul.
_CROP_PARAMS = {
    232: (4, 9.0, 10.0),    # early VH rise and strong VV return
    211: (4, -9.0, 0.0),    # winter cereal VV drop
    213: (7, -9.0, 10.0),
    212: (7, 4.5, 0.0),
    214: (10, -4.5, 10.0),
    215: (10, 9.0, 0.0),
    218: (13, -9.0, 5.0),
    221: (13, 9.0, 5.0),
    222: (16, 4.5, 10.0),
    231: (16, -4.5, 0.0),
    216: (19, 4.5, 5.0),    # summer crops turn separable last
    233: (19, -4.5, 5.0),
}

MAIN_CROPS = tuple(sorted(_CROP_PARAMS))


def default_signatures(noise_sigma_db: float = 1.5) -> dict[int, CropSignature]:
    """Hand-tuned illustrative signatures for the 12 main crops.

    Qualitative, not physical: early winter-crop onsets, VV drops for
    cereals, VH rises for broadleaf crops, baselines inside [-25, -5] dB,
    and a negative (earlier) southern-stratum shift.
    """
    out = {}
    for code, (onset, vv_amp, vh_amp) in _CROP_PARAMS.items():
        out[code] = CropSignature(
            code=code,
            vv=BandCurve(_VV_BASE, vv_amp, onset, onset + 2, onset + 12),
            vh=BandCurve(_VH_BASE, vh_amp, onset, onset + 2, onset + 12),
            noise_sigma_db=noise_sigma_db,
        )
    return out


def landcover_signatures(noise_sigma_db: float = 1.5) -> dict[int, CropSignature]:
    """Woodland and grassland backdrops for two-phase scenarios."""
    return {
        300: CropSignature(
            code=300,
            vv=BandCurve(-7.5, 0.0, 10, 14, 24),
            vh=BandCurve(-12.5, 0.0, 10, 14, 24),
            noise_sigma_db=noise_sigma_db,
        ),
        500: CropSignature(
            code=500,
            vv=BandCurve(-10.5, 1.5, 6, 12, 30),
            vh=BandCurve(-16.0, 1.5, 6, 12, 30),
            noise_sigma_db=noise_sigma_db,
        ),
    }


@dataclass(frozen=True)
class ParcelSpec:
    """Grid-aligned rectangular parcel."""

    pid: int
    code: int
    stratum: int
    row0: int
    col0: int
    n_rows: int
    n_cols: int


@dataclass
class SyntheticScenario:
    geometry: GridGeometry
    year: int
    seed: int
    stratum_boundary_col: int
    signatures: dict[int, CropSignature]
    parcels: list[ParcelSpec]
    bands: tuple[str, ...] = ("VV_dB", "VH_dB")

    def __post_init__(self):
        occupied = np.zeros(self.geometry.shape, dtype=bool)
        for p in self.parcels:
            if p.code not in self.signatures:
                raise SynthError(f"parcel {p.pid}: no signature for class {p.code}")
            if p.row0 < 0 or p.col0 < 0 or p.row0 + p.n_rows > self.geometry.height \
                    or p.col0 + p.n_cols > self.geometry.width:
                raise SynthError(f"parcel {p.pid} falls outside the grid")
            block = occupied[p.row0:p.row0 + p.n_rows, p.col0:p.col0 + p.n_cols]
            if block.any():
                raise SynthError(f"parcel {p.pid} overlaps another parcel")
            block[:] = True
            expected = 1 if p.col0 + p.n_cols <= self.stratum_boundary_col else 2
            if p.col0 < self.stratum_boundary_col < p.col0 + p.n_cols:
                raise SynthError(f"parcel {p.pid} straddles the stratum boundary")
            if p.stratum != expected:
                raise SynthError(
                    f"parcel {p.pid} declares stratum {p.stratum} but lies in stratum {expected}"
                )

    def stratum_values(self) -> np.ndarray:
        values = np.ones(self.geometry.shape, dtype=np.uint8)
        values[:, self.stratum_boundary_col:] = 2
        return values


def _parcel_ring(geometry: GridGeometry, p: ParcelSpec) -> np.ndarray:
    ps = geometry.pixel_size
    x0 = geometry.origin_x + p.col0 * ps
    x1 = geometry.origin_x + (p.col0 + p.n_cols) * ps
    y_top = geometry.origin_y - p.row0 * ps
    y_bot = geometry.origin_y - (p.row0 + p.n_rows) * ps
    return np.array([(x0, y_top), (x1, y_top), (x1, y_bot), (x0, y_bot)], dtype=float)


def generate(scenario: SyntheticScenario) -> tuple[DekadalCube, list[LabeledPolygon], np.ndarray]:
    """Cube, labeled polygons, and the truth class raster for a scenario.

    Background pixels (outside every parcel) are invalid in the cube and 0
    in the truth map. Bit-identical for a given seed.
    """
    geom = scenario.geometry
    n_bands = len(scenario.bands)
    values = np.zeros((DEKADS_PER_YEAR, n_bands, geom.height, geom.width), dtype=np.float64)
    valid = np.zeros((DEKADS_PER_YEAR, geom.height, geom.width), dtype=bool)
    truth = np.zeros(geom.shape, dtype=np.uint16)
    polygons = []

    for p in sorted(scenario.parcels, key=lambda q: q.pid):
        sig = scenario.signatures[p.code]
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=scenario.seed, spawn_key=(p.pid,))
        )
        rs, cs = slice(p.row0, p.row0 + p.n_rows), slice(p.col0, p.col0 + p.n_cols)
        noise = rng.normal(0.0, sig.noise_sigma_db, size=(DEKADS_PER_YEAR, 2, p.n_rows, p.n_cols))
        vv = sig.curve_values("VV_dB", p.stratum)[:, None, None] + noise[:, 0]
        vh = sig.curve_values("VH_dB", p.stratum)[:, None, None] + noise[:, 1]
        for bi, band in enumerate(scenario.bands):
            if band == "VV_dB":
                values[:, bi, rs, cs] = vv
            elif band == "VH_dB":
                values[:, bi, rs, cs] = vh
            elif band == "CR":
                values[:, bi, rs, cs] = 10.0 ** ((vh - vv) / 10.0)
            else:
                raise SynthError(f"cannot synthesize band {band!r}")
        valid[:, rs, cs] = True
        truth[rs, cs] = p.code
        polygons.append(
            LabeledPolygon(
                pid=p.pid, class_code=p.code, stratum=p.stratum,
                vertices=_parcel_ring(geom, p),
            )
        )

    cube = DekadalCube(
        year=scenario.year, bands=scenario.bands, geometry=geom,
        values=values.astype(np.float32), valid=valid,
    )
    return cube, polygons, truth


def desk_scenario(seed: int = 7, noise_sigma_db: float = 1.5) -> SyntheticScenario:
    """Committed end-to-end scenario: 64x64 grid, 81 parcels, 12 crops.

    A 9x9 lattice of 6x6-pixel parcels with 1-pixel gaps; the four
    westmost lattice columns are stratum 1, the rest stratum 2. Every crop
    appears in both strata (2 + 3 parcels); woodland and grassland fill
    the remaining slots so the level-1 phase has work to do.
    """
    geom = GridGeometry(width=64, height=64, pixel_size=10.0, origin_x=0.0, origin_y=640.0)
    signatures = default_signatures(noise_sigma_db)
    signatures.update(landcover_signatures(noise_sigma_db))

    crops = list(MAIN_CROPS)
    codes_str1 = crops * 2 + [300] * 6 + [500] * 6          # 36 slots
    codes_str2 = crops * 3 + [300] * 4 + [500] * 5          # 45 slots
    rng = np.random.default_rng(12345)
    codes_str1 = [codes_str1[i] for i in rng.permutation(len(codes_str1))]
    codes_str2 = [codes_str2[i] for i in rng.permutation(len(codes_str2))]

    parcels = []
    pid = 0
    i1 = i2 = 0
    for r in range(9):
        for c in range(9):
            pid += 1
            if c <= 3:
                code, stratum = codes_str1[i1], 1
                i1 += 1
            else:
                code, stratum = codes_str2[i2], 2
                i2 += 1
            parcels.append(
                ParcelSpec(pid=pid, code=code, stratum=stratum,
                           row0=1 + 7 * r, col0=1 + 7 * c, n_rows=6, n_cols=6)
            )
    return SyntheticScenario(
        geometry=geom, year=2018, seed=seed, stratum_boundary_col=29,
        signatures=signatures, parcels=parcels,
    )


# ---------------------------------------------------------------------------
# Scenario files: key=value header plus signature and parcel tables
# ---------------------------------------------------------------------------

def save_scenario(scenario: SyntheticScenario, path: str | Path):
    g = scenario.geometry
    lines = [
        "# synthetic scenario",
        f"width={g.width}",
        f"height={g.height}",
        f"pixel_size={g.pixel_size!r}",
        f"origin_x={g.origin_x!r}",
        f"origin_y={g.origin_y!r}",
        f"year={scenario.year}",
        f"seed={scenario.seed}",
        f"stratum_boundary_col={scenario.stratum_boundary_col}",
        f"bands={','.join(scenario.bands)}",
        "[signatures]",
        "code\tvv_base\tvv_amp\tvv_onset\tvv_peak\tvv_sen"
        "\tvh_base\tvh_amp\tvh_onset\tvh_peak\tvh_sen\tshift\tsigma",
    ]
    for code in sorted(scenario.signatures):
        s = scenario.signatures[code]
        lines.append(
            f"{code}\t{s.vv.baseline_db!r}\t{s.vv.amplitude_db!r}\t{s.vv.onset_dekad!r}"
            f"\t{s.vv.peak_dekad!r}\t{s.vv.senescence_dekad!r}"
            f"\t{s.vh.baseline_db!r}\t{s.vh.amplitude_db!r}\t{s.vh.onset_dekad!r}"
            f"\t{s.vh.peak_dekad!r}\t{s.vh.senescence_dekad!r}"
            f"\t{s.stratum2_shift_dekads!r}\t{s.noise_sigma_db!r}"
        )
    lines.append("[parcels]")
    lines.append("pid\tcode\tstratum\trow0\tcol0\tn_rows\tn_cols")
    for p in scenario.parcels:
        lines.append(f"{p.pid}\t{p.code}\t{p.stratum}\t{p.row0}\t{p.col0}\t{p.n_rows}\t{p.n_cols}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_scenario(path: str | Path) -> SyntheticScenario:
    header: dict[str, str] = {}
    signatures: dict[int, CropSignature] = {}
    parcels: list[ParcelSpec] = []
    section = "header"
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[signatures]":
            section = "signatures"
            continue
        if line == "[parcels]":
            section = "parcels"
            continue
        if section == "header":
            k, v = line.split("=", 1)
            header[k.strip()] = v.strip()
        elif section == "signatures":
            if line.startswith("code\t"):
                continue
            f = line.split("\t")
            code = int(f[0])
            signatures[code] = CropSignature(
                code=code,
                vv=BandCurve(*(float(x) for x in f[1:6])),
                vh=BandCurve(*(float(x) for x in f[6:11])),
                stratum2_shift_dekads=float(f[11]),
                noise_sigma_db=float(f[12]),
            )
        else:
            if line.startswith("pid\t"):
                continue
            f = [int(x) for x in line.split("\t")]
            parcels.append(ParcelSpec(*f))
    geom = GridGeometry(
        width=int(header["width"]), height=int(header["height"]),
        pixel_size=float(header["pixel_size"]),
        origin_x=float(header["origin_x"]), origin_y=float(header["origin_y"]),
    )
    return SyntheticScenario(
        geometry=geom,
        year=int(header["year"]),
        seed=int(header["seed"]),
        stratum_boundary_col=int(header["stratum_boundary_col"]),
        signatures=signatures,
        parcels=parcels,
        bands=tuple(header.get("bands", "VV_dB,VH_dB").split(",")),
    )
