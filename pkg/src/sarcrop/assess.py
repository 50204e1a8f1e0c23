"""Accuracy assessment: stratified area-weighted estimators, parcel-majority
comparison, zonal area checks, and the temporal hindcast/index benchmarks.

The stratified estimators convert sample counts n[map i][ref j] into area
proportions p[i][j] = W[i] * n[i][j] / n[i.], with user's/producer's/overall
accuracy and their standard errors taken from the standard stratified
variance formulas; reported SEs are scaled to the requested confidence
level (1.96 sigma at 95%).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .forest import Hyperparams, predict, train
from .grids import FeatureWindow
from .pipeline import ClassifiedMap, REASON_NONE
from .sampling import LabeledPolygon, SampleSet, rasterize, split_polygons

log = logging.getLogger(__name__)


class AssessError(ValueError):
    """Inconsistent confusion inputs or missing attributes."""


# ---------------------------------------------------------------------------
# Count-based confusion helpers
# ---------------------------------------------------------------------------

def count_metrics(counts: np.ndarray) -> dict:
    """Plain count-based OA/UA/PA from a square confusion matrix.

    Undefined entries (empty row or column) are NaN, never zero.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
        raise AssessError("confusion matrix must be square")
    if np.any(counts < 0):
        raise AssessError("confusion counts must be >= 0")
    row = counts.sum(axis=1)
    col = counts.sum(axis=0)
    total = counts.sum()
    diag = np.diag(counts)
    with np.errstate(divide="ignore", invalid="ignore"):
        ua = np.where(row > 0, diag / row, np.nan)
        pa = np.where(col > 0, diag / col, np.nan)
    oa = float(diag.sum() / total) if total > 0 else float("nan")
    return {"oa": oa, "ua": ua, "pa": pa, "row_totals": row, "col_totals": col}


def fscore(counts: np.ndarray, classes, code) -> float:
    """F1 for one class: harmonic mean of count-based UA (precision) and
    PA (recall); 0 when undefined."""
    classes = list(classes)
    if code not in classes:
        raise AssessError(f"class {code} not present in confusion matrix")
    i = classes.index(code)
    m = count_metrics(counts)
    p, r = m["ua"][i], m["pa"][i]
    if np.isnan(p) and np.isnan(r):
        return 0.0
    p = 0.0 if np.isnan(p) else float(p)
    r = 0.0 if np.isnan(r) else float(r)
    if p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)


# ---------------------------------------------------------------------------
# Stratified area-weighted estimators
# ---------------------------------------------------------------------------

@dataclass
class StratifiedConfusion:
    """Cross-tabulation of map vs reference with per-map-class area weights."""

    classes: list[int]
    counts: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.classes = [int(c) for c in self.classes]
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        c = len(self.classes)
        if self.counts.shape != (c, c):
            raise AssessError(f"counts must be {c}x{c}, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise AssessError("confusion counts must be >= 0")
        if len(self.weights) != c or np.any(self.weights < 0):
            raise AssessError("need one non-negative weight per map class")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise AssessError(f"weights must sum to 1, got {self.weights.sum()!r}")

    @staticmethod
    def proportional(classes, counts) -> "StratifiedConfusion":
        """Weights equal to sample shares, collapsing the estimators to
        plain count-based metrics."""
        counts = np.asarray(counts, dtype=np.int64)
        rows = counts.sum(axis=1).astype(np.float64)
        return StratifiedConfusion(classes, counts, rows / rows.sum())

    @staticmethod
    def from_mapped_areas(classes, counts, areas: dict[int, float]) -> "StratifiedConfusion":
        """Weights from mapped areas (hectares or pixel counts) per class."""
        a = np.array([float(areas.get(int(c), 0.0)) for c in classes])
        if a.sum() <= 0:
            raise AssessError("mapped areas must be positive for at least one class")
        return StratifiedConfusion(classes, counts, a / a.sum())


@dataclass
class AccuracyReport:
    classes: list[int]
    proportions: np.ndarray
    oa: float
    ua: np.ndarray
    pa: np.ndarray
    se_oa: float
    se_ua: np.ndarray
    se_pa: np.ndarray
    confidence: float
    z: float


def stratified_accuracy(conf: StratifiedConfusion, confidence: float = 0.95) -> AccuracyReport:
    """Area-weighted accuracy per the standard stratified estimator.

    p[i][j] = W[i] n[i][j] / n[i.]; OA = sum_i p[i][i];
    UA[i] = p[i][i] / p[i.]; PA[j] = p[j][j] / p[.j].
    V(UA[i]) = UA (1-UA) / (n[i.] - 1);
    V(OA) = sum_i W[i]^2 UA (1-UA) / (n[i.] - 1);
    V(PA[j]) propagates the estimated reference-class marginal:
      [ W_j^2 (1-PA)^2 V-term of the diagonal row
        + PA^2 sum_{i!=j} W_i^2 (n_ij/n_i.)(1-n_ij/n_i.)/(n_i.-1) ] / p[.j]^2.
    SEs are z * sqrt(V) at the requested confidence. Map classes with a
    single sample report NaN SEs (undefined, not zero); classes with no
    samples report NaN accuracy as well.
    """
    if not 0.0 < confidence < 1.0:
        raise AssessError("confidence must be in (0, 1)")
    z = float(norm.ppf(0.5 + confidence / 2.0))
    counts = conf.counts.astype(np.float64)
    W = conf.weights
    n_i = counts.sum(axis=1)
    c = len(conf.classes)

    has = n_i > 0
    p = np.zeros((c, c))
    p[has] = W[has, None] * counts[has] / n_i[has, None]
    p_col = p.sum(axis=0)

    with np.errstate(divide="ignore", invalid="ignore"):
        ua = np.where(has, np.diag(counts) / n_i, np.nan)
        pa = np.where(p_col > 0, np.diag(p) / p_col, np.nan)
    oa = float(np.trace(p))

    se_ok = n_i > 1
    v_ua = np.full(c, np.nan)
    v_ua[se_ok] = ua[se_ok] * (1.0 - ua[se_ok]) / (n_i[se_ok] - 1.0)
    # a weighted stratum with one sample makes the OA variance undefined;
    # unsampled strata (n=0) simply cannot contribute
    if not se_ok.any() or np.any((n_i == 1) & (W > 0)):
        v_oa = float("nan")
    else:
        v_oa = float(np.sum(W[se_ok] ** 2 * v_ua[se_ok]))

    v_pa = np.full(c, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(has[:, None], counts / n_i[:, None], 0.0)
    for j in range(c):
        if p_col[j] <= 0 or np.isnan(pa[j]):
            continue
        # every row feeding column j must support its variance term
        if (has[j] and n_i[j] <= 1) or np.any((counts[:, j] > 0) & (n_i <= 1)):
            continue  # leaves SE undefined, not zero
        part1 = W[j] ** 2 * (1.0 - pa[j]) ** 2 * v_ua[j] if has[j] else 0.0
        others = se_ok.copy()
        others[j] = False
        part2 = pa[j] ** 2 * np.sum(
            W[others] ** 2 * ratio[others, j] * (1.0 - ratio[others, j]) / (n_i[others] - 1.0)
        )
        v_pa[j] = (part1 + part2) / p_col[j] ** 2

    return AccuracyReport(
        classes=list(conf.classes),
        proportions=p,
        oa=oa,
        ua=ua,
        pa=pa,
        se_oa=z * np.sqrt(v_oa) if np.isfinite(v_oa) else float("nan"),
        se_ua=z * np.sqrt(v_ua),
        se_pa=z * np.sqrt(v_pa),
        confidence=confidence,
        z=z,
    )


def bootstrap_accuracy_se(
    conf: StratifiedConfusion, n_resamples: int = 10_000, seed: int = 0
) -> dict:
    """Monte-Carlo check of the analytic SEs: rows are resampled as
    multinomials with their sample sizes fixed (the stratified design).

    Returns unscaled (1-sigma) standard errors for OA, UA and PA.
    """
    rng = np.random.default_rng(seed)
    counts = conf.counts
    W = conf.weights
    c = len(conf.classes)
    n_i = counts.sum(axis=1)
    oa_draws = np.zeros(n_resamples)
    ua_draws = np.full((n_resamples, c), np.nan)
    p_draws = np.zeros((n_resamples, c, c))
    for i in range(c):
        if n_i[i] == 0:
            continue
        p_row = counts[i] / n_i[i]
        draws = rng.multinomial(n_i[i], p_row, size=n_resamples)
        ua_i = draws[:, i] / n_i[i]
        ua_draws[:, i] = ua_i
        oa_draws += W[i] * ua_i
        p_draws[:, i, :] = W[i] * draws / n_i[i]
    col = p_draws.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        pa_draws = np.where(col > 0, np.diagonal(p_draws, axis1=1, axis2=2) / col, np.nan)
    return {
        "oa": float(oa_draws.std(ddof=1)),
        "ua": np.nanstd(ua_draws, axis=0, ddof=1),
        "pa": np.nanstd(pa_draws, axis=0, ddof=1),
    }


# ---------------------------------------------------------------------------
# Point-based validation (survey core points)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RefPoint:
    x: float
    y: float
    class_code: int


def confusion_from_points(
    cmap: ClassifiedMap, points: list[RefPoint]
) -> tuple[list[int], np.ndarray, int]:
    """Cross-tabulate map class at each point against its reference class.

    Points outside the grid or on masked/unclassified pixels are excluded
    and counted. Returns (classes, counts[map][ref], excluded)."""
    mapped, referenced = [], []
    excluded = 0
    for pt in points:
        row, col = cmap.geometry.cell_of(pt.x, pt.y)
        if not cmap.geometry.contains_cell(row, col) or cmap.reason[row, col] != REASON_NONE:
            excluded += 1
            continue
        mapped.append(int(cmap.classes[row, col]))
        referenced.append(int(pt.class_code))
    if excluded:
        log.info("confusion_from_points: excluded %d point(s) on masked/invalid pixels", excluded)
    classes = sorted(set(mapped) | set(referenced))
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for m, r in zip(mapped, referenced):
        counts[index[m], index[r]] += 1
    return classes, counts, excluded


@dataclass(frozen=True)
class SurveyPoint:
    """Survey core point with the attributes the quality filter needs."""

    pid: int
    x: float
    y: float
    class_code: int
    observed_direct: bool
    observed_in_situ: bool
    parcel_area_ha: float
    homogeneous: bool
    used_for_training: bool = False


def filter_survey_points(
    points: list[SurveyPoint], min_parcel_ha: float = 0.1
) -> tuple[list[SurveyPoint], dict[str, int]]:
    """Keep only high-quality validation points.

    Criteria: direct observation, observed in situ, parcel at least
    `min_parcel_ha`, homogeneous land cover; points that fed training are
    excluded as well. Drop counts are per criterion and independent (one
    point may fail several).
    """
    drops = {
        "not_direct": 0,
        "not_in_situ": 0,
        "parcel_too_small": 0,
        "not_homogeneous": 0,
        "used_for_training": 0,
    }
    kept = []
    for pt in points:
        bad = False
        if not pt.observed_direct:
            drops["not_direct"] += 1
            bad = True
        if not pt.observed_in_situ:
            drops["not_in_situ"] += 1
            bad = True
        if pt.parcel_area_ha < min_parcel_ha:
            drops["parcel_too_small"] += 1
            bad = True
        if not pt.homogeneous:
            drops["not_homogeneous"] += 1
            bad = True
        if pt.used_for_training:
            drops["used_for_training"] += 1
            bad = True
        if not bad:
            kept.append(pt)
    return kept, drops


# LUCAS-style alias kept for callers speaking the survey's language
filter_lucas_points = filter_survey_points


# ---------------------------------------------------------------------------
# Parcel-majority validation (farmer declarations)
# ---------------------------------------------------------------------------

@dataclass
class ParcelRecord:
    pid: int
    region: str
    declared_code: str
    vertices: np.ndarray


EXCLUDE_FROM_PARCEL_METRICS = (300, 500)  # grassland/woodland rows+columns


@dataclass
class ParcelComparison:
    region: str
    classes: list[int]
    counts: np.ndarray
    ua: np.ndarray
    pa: np.ndarray
    parcels_used: int
    parcels_excluded: int
    dropped_classes: list[int]


def parcel_majority(
    cmap: ClassifiedMap,
    parcels: list[ParcelRecord],
    mapping=None,
    *,
    min_area_share: float = 0.01,
    max_masked_share: float = 0.5,
) -> dict[str, ParcelComparison]:
    """Mode-vs-declared confusion per region.

    Declared classes holding less than `min_area_share` of a region's
    declared area are dropped. Per parcel the modal reported map class is
    taken over the rasterized interior (ties to the lowest code); parcels
    with no reported pixel or more than `max_masked_share` masked are
    excluded and counted. Woodland and grassland rows/columns are removed
    before UA/PA. Results do not depend on pixel enumeration order.
    """
    from .legend import map_code

    regions: dict[str, list[tuple[ParcelRecord, int, LabeledPolygon]]] = {}
    unmapped = 0
    for parcel in parcels:
        declared = (
            map_code(mapping, parcel.declared_code) if mapping is not None
            else int(parcel.declared_code)
        )
        if declared is None:
            unmapped += 1
            continue
        poly = LabeledPolygon(pid=parcel.pid, class_code=declared, stratum=1, vertices=parcel.vertices)
        regions.setdefault(parcel.region, []).append((parcel, declared, poly))
    if unmapped:
        log.info("parcel_majority: skipped %d parcel(s) with unmapped declared codes", unmapped)

    out: dict[str, ParcelComparison] = {}
    for region in sorted(regions):
        entries = regions[region]
        area_by_class: dict[int, float] = {}
        for _, declared, poly in entries:
            area_by_class[declared] = area_by_class.get(declared, 0.0) + poly.area_ha
        total_area = sum(area_by_class.values())
        dropped_classes = sorted(
            c for c, a in area_by_class.items() if a / total_area < min_area_share
        )
        keep_declared = set(area_by_class) - set(dropped_classes)

        pairs = []
        excluded = 0
        for _, declared, poly in entries:
            if declared not in keep_declared:
                continue
            idx = rasterize(poly, cmap.geometry)
            if idx.size == 0:
                excluded += 1
                continue
            reported = cmap.reported.reshape(-1)[idx]
            if not reported.any() or (1.0 - reported.mean()) > max_masked_share:
                excluded += 1
                continue
            values = cmap.classes.reshape(-1)[idx][reported]
            codes, freq = np.unique(values, return_counts=True)
            mode = int(codes[np.argmax(freq)])  # unique() sorts: first max = lowest code
            pairs.append((mode, declared))
        if not pairs:
            out[region] = ParcelComparison(region, [], np.zeros((0, 0), np.int64),
                                           np.array([]), np.array([]), 0, excluded, dropped_classes)
            continue

        classes = sorted({m for m, _ in pairs} | {d for _, d in pairs})
        classes = [c for c in classes if c not in EXCLUDE_FROM_PARCEL_METRICS]
        index = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for m, d in pairs:
            if m in index and d in index:
                counts[index[m], index[d]] += 1
        metrics = count_metrics(counts)
        out[region] = ParcelComparison(
            region=region,
            classes=classes,
            counts=counts,
            ua=metrics["ua"],
            pa=metrics["pa"],
            parcels_used=len(pairs),
            parcels_excluded=excluded,
            dropped_classes=dropped_classes,
        )
    return out


# ---------------------------------------------------------------------------
# Zonal comparison against reported area statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegionAreaPair:
    region: str
    class_code: int
    reported_kha: float


@dataclass
class ZonalComparison:
    mapped_kha: dict[tuple[str, int], float]
    pearson_r: dict[int, float]
    relative_diff_pct: dict[tuple[str, int], float]
    undefined: list[tuple[str, int]]


def zonal_area_compare(
    cmap: ClassifiedMap,
    region_values: np.ndarray,
    region_ids: dict[int, str],
    reported: list[RegionAreaPair],
) -> ZonalComparison:
    """Compare pixel-counted class areas per region with reported areas.

    Mapped area is reported pixels x pixel area, in thousands of hectares.
    Pearson's r is computed per crop over regions; the relative difference
    is (reported - mapped) / reported * 100, undefined (and flagged) where
    the reported area is zero.
    """
    region_values = np.asarray(region_values)
    if region_values.shape != cmap.geometry.shape:
        raise AssessError("region raster is not aligned to the map")
    px_kha = cmap.geometry.pixel_area_ha / 1000.0
    reported_by_key = {(p.region, int(p.class_code)): p.reported_kha for p in reported}

    mapped: dict[tuple[str, int], float] = {}
    rep = cmap.reported
    for rid, rname in sorted(region_ids.items()):
        inside = rep & (region_values == rid)
        codes, freq = np.unique(cmap.classes[inside], return_counts=True)
        counts_of = dict(zip(codes.tolist(), freq.tolist()))
        for (region, code) in reported_by_key:
            if region == rname:
                mapped[(region, code)] = counts_of.get(code, 0) * px_kha

    pearson: dict[int, float] = {}
    for code in sorted({c for (_, c) in reported_by_key}):
        xs, ys = [], []
        for (region, c), rep_kha in reported_by_key.items():
            if c == code and (region, c) in mapped:
                xs.append(rep_kha)
                ys.append(mapped[(region, c)])
        if len(xs) >= 2:
            x, y = np.asarray(xs), np.asarray(ys)
            if x.std() == 0 or y.std() == 0:
                pearson[code] = float("nan")
            else:
                pearson[code] = float(np.corrcoef(x, y)[0, 1])

    rel: dict[tuple[str, int], float] = {}
    undefined: list[tuple[str, int]] = []
    for key, rep_kha in reported_by_key.items():
        if key not in mapped:
            continue
        if rep_kha == 0:
            undefined.append(key)
            rel[key] = float("nan")
        else:
            rel[key] = (rep_kha - mapped[key]) / rep_kha * 100.0
    return ZonalComparison(mapped_kha=mapped, pearson_r=pearson,
                           relative_diff_pct=rel, undefined=sorted(undefined))


# ---------------------------------------------------------------------------
# Hindcast and feature-set benchmarks
# ---------------------------------------------------------------------------

@dataclass
class HindcastResult:
    months: list[int]
    rows: list[tuple[int, str, int | None, str, float]]  # (month, stratum, class, metric, value)

    def oa(self, month: int, stratum: str = "all") -> float:
        for m, s, c, metric, v in self.rows:
            if m == month and s == stratum and metric == "oa":
                return v
        raise KeyError((month, stratum))

    def fscore_series(self, code: int, stratum: str = "all") -> dict[int, float]:
        return {
            m: v for m, s, c, metric, v in self.rows
            if s == stratum and c == code and metric == "fscore"
        }


def _month_window(samples: SampleSet, month: int) -> FeatureWindow:
    start = samples.window.start_dekad
    end = max(min(3 * month - 1, samples.window.end_dekad), start)
    return FeatureWindow(start, end, samples.window.bands)


def hindcast_series(
    samples: SampleSet,
    hp: Hyperparams,
    seed: int = 0,
    months: range = range(1, 13),
    fraction: float = 0.8,
    per_stratum: bool = False,
    n_jobs: int = 1,
) -> HindcastResult:
    """Accuracy vs time: retrain on [January .. end of month m] for each m.

    One 80/20 polygon split is drawn up front and reused for every month
    so the curves are comparable. Rows with missing features inside a
    month's window are dropped for that month (counts logged).
    """
    train_set, test_set = split_polygons(samples, fraction=fraction, seed=seed)
    rows: list[tuple[int, str, int | None, str, float]] = []
    strata = ["all"] if not per_stratum else sorted(str(s) for s in np.unique(samples.strata))
    classes = sorted(np.unique(samples.labels).tolist())
    index = {c: i for i, c in enumerate(classes)}
    for month in months:
        window = _month_window(samples, month)
        cols = samples.window.column_subset(window)
        for stratum in strata:
            if stratum == "all":
                tr, te = train_set, test_set
            else:
                tr = train_set.subset(train_set.strata == int(stratum))
                te = test_set.subset(test_set.strata == int(stratum))
            Xtr, Xte = tr.features[:, cols], te.features[:, cols]
            keep_tr = np.all(np.isfinite(Xtr), axis=1)
            keep_te = np.all(np.isfinite(Xte), axis=1)
            if keep_tr.sum() < len(Xtr) or keep_te.sum() < len(Xte):
                log.info(
                    "hindcast month %d stratum %s: dropped %d train / %d test rows with missing features",
                    month, stratum, len(Xtr) - keep_tr.sum(), len(Xte) - keep_te.sum(),
                )
            model = train(Xtr[keep_tr], tr.labels[keep_tr], hp=hp,
                          seed=seed, n_jobs=n_jobs, compute_oob=False)
            pred, _ = predict(model, Xte[keep_te])
            truth = te.labels[keep_te]
            rows.append((month, stratum, None, "oa", float(np.mean(pred == truth))))
            counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
            for p, t in zip(pred, truth):
                counts[index[int(p)], index[int(t)]] += 1
            for code in classes:
                rows.append((month, stratum, code, "fscore", fscore(counts, classes, code)))
    return HindcastResult(months=list(months), rows=rows)


def benchmark_indices(
    samples: SampleSet,
    feature_sets: list[tuple[str, ...]],
    hp: Hyperparams,
    seed: int = 0,
    fraction: float = 0.8,
    n_jobs: int = 1,
) -> list[tuple[str, float]]:
    """Overall accuracy per band set over one shared polygon split."""
    for bands in feature_sets:
        for b in bands:
            if b not in samples.window.bands:
                raise AssessError(f"band {b!r} not present in the sample set")
    train_set, test_set = split_polygons(samples, fraction=fraction, seed=seed)
    out = []
    for bands in feature_sets:
        window = FeatureWindow(samples.window.start_dekad, samples.window.end_dekad, bands)
        cols = samples.window.column_subset(window)
        model = train(train_set.features[:, cols], train_set.labels, hp=hp,
                      seed=seed, n_jobs=n_jobs, compute_oob=False)
        pred, _ = predict(model, test_set.features[:, cols])
        out.append(("+".join(bands), float(np.mean(pred == test_set.labels))))
    return out


# ---------------------------------------------------------------------------
# Report writers (delimited text mirroring the published table layouts)
# ---------------------------------------------------------------------------

def write_confusion(classes: list[int], counts: np.ndarray, path: str | Path):
    m = count_metrics(counts)
    lines = ["map\\ref\t" + "\t".join(str(c) for c in classes) + "\ttotal\tua"]
    for i, c in enumerate(classes):
        row = "\t".join(str(int(v)) for v in counts[i])
        ua = f"{m['ua'][i]:.6f}" if np.isfinite(m["ua"][i]) else "nan"
        lines.append(f"{c}\t{row}\t{int(m['row_totals'][i])}\t{ua}")
    lines.append("total\t" + "\t".join(str(int(v)) for v in m["col_totals"]) + "\t\t")
    pa = "\t".join(f"{v:.6f}" if np.isfinite(v) else "nan" for v in m["pa"])
    lines.append(f"pa\t{pa}\t\t")
    lines.append(f"oa\t{m['oa']:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_confusion(path: str | Path) -> tuple[list[int], np.ndarray]:
    lines = [l for l in Path(path).read_text().splitlines() if l.strip()]
    header = lines[0].split("\t")
    classes = [int(c) for c in header[1:] if c not in ("total", "ua", "")]
    counts = []
    for line in lines[1 : 1 + len(classes)]:
        parts = line.split("\t")
        counts.append([int(v) for v in parts[1 : 1 + len(classes)]])
    return classes, np.array(counts, dtype=np.int64)


def write_accuracy_report(report: AccuracyReport, path: str | Path):
    def fmt(v):
        return f"{v:.6f}" if np.isfinite(v) else "nan"

    lines = ["map\\ref\t" + "\t".join(str(c) for c in report.classes) + "\tua\tse_ua"]
    for i, c in enumerate(report.classes):
        row = "\t".join(fmt(v) for v in report.proportions[i])
        lines.append(f"{c}\t{row}\t{fmt(report.ua[i])}\t{fmt(report.se_ua[i])}")
    lines.append("pa\t" + "\t".join(fmt(v) for v in report.pa) + "\t\t")
    lines.append("se_pa\t" + "\t".join(fmt(v) for v in report.se_pa) + "\t\t")
    lines.append("")
    lines.append(f"oa={fmt(report.oa)}")
    lines.append(f"se_oa={fmt(report.se_oa)}")
    lines.append(f"confidence={report.confidence}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_hindcast(result: HindcastResult, path: str | Path):
    lines = ["month\tstratum\tclass\tmetric\tvalue"]
    for month, stratum, code, metric, value in result.rows:
        lines.append(f"{month}\t{stratum}\t{code if code is not None else ''}\t{metric}\t{value:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")
