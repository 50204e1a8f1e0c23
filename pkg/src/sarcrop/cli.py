"""Command-line entry point wiring all pipeline stages.

Each invocation runs exactly one stage and writes a run manifest (config
echo, input checksums, versions, wall time) beside its outputs. Stage
outputs are deterministic for identical config and inputs; the manifest
records wall time and is the one file allowed to differ between re-runs.

Exit codes: 0 success, 2 usage error, 3 missing input, 4 input format
violation, 5 any other failure.
"""

from __future__ import annotations

import argparse
import hashlib
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, assess, forest, grids, legend, pipeline, sampling, synth

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_FORMAT = 4
EXIT_FAILURE = 5

_FORMAT_ERRORS = (
    grids.GridError,
    legend.LegendError,
    sampling.SamplingError,
    forest.ForestError,
    pipeline.PipelineError,
    assess.AssessError,
    synth.SynthError,
)

# production defaults: Jan-Jul window, VV+VH, -25 dB edge threshold,
# 1000 m / 10 deg terrain limits, 100-candidate 3-fold tuning
DEFAULT_WINDOW_SPAN = "0:21"
DEFAULT_BANDS = "VV_dB,VH_dB"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _collect_files(p: Path) -> list[Path]:
    if p.is_dir():
        return sorted(q for q in p.rglob("*") if q.is_file())
    return [p]


def write_run_manifest(out: Path, stage: str, config: dict, inputs: list[Path], wall_time: float):
    """Manifest beside the output: run_manifest.txt inside an output
    directory, or <file>.manifest next to a single-file output."""
    if out.suffix == "" or out.is_dir():
        out.mkdir(parents=True, exist_ok=True)
        target = out / "run_manifest.txt"
    else:
        target = out.with_name(out.name + ".manifest")
    lines = [
        f"stage={stage}",
        f"sarcrop_version={__version__}",
        f"python={platform.python_version()}",
        f"numpy={np.__version__}",
        f"wall_time_s={wall_time:.3f}",
    ]
    for k in sorted(config):
        if k in ("func", "config"):
            continue
        lines.append(f"config.{k}={config[k]}")
    for inp in inputs:
        for f in _collect_files(Path(inp)):
            lines.append(f"input.{f}={_sha256(f)}")
    target.write_text("\n".join(lines) + "\n")


def _parse_window(span: str, bands: str) -> grids.FeatureWindow:
    a, b = span.split(":")
    return grids.FeatureWindow(int(a), int(b), tuple(bands.split(",")))


def _load_scenes(scene_root: Path) -> list[grids.SceneGrid]:
    dirs = sorted(d for d in scene_root.iterdir() if (d / "scene.txt").exists())
    if not dirs:
        raise FileNotFoundError(f"no scene manifests under {scene_root}")
    return [grids.load_scene(d) for d in dirs]


# ---------------------------------------------------------------------------
# Stage implementations
# ---------------------------------------------------------------------------

def cmd_composite(args) -> list[Path]:
    scenes = _load_scenes(Path(args.scenes))
    by_date: dict = {}
    for s in scenes:
        by_date.setdefault(s.date, {})[s.band] = s
    prepared: list[grids.SceneGrid] = []
    for date in sorted(by_date):
        pair = by_date[date]
        if "VV" in pair and "VH" in pair and not args.no_edge_mask:
            vv, vh = grids.mask_scene_edges(
                pair["VV"], pair["VH"],
                threshold_db=args.edge_threshold_db, min_group=args.edge_min_group,
            )
        else:
            vv, vh = pair.get("VV"), pair.get("VH")
        if vv is not None:
            prepared.append(vv)
        if vh is not None:
            prepared.append(vh)
        if args.with_cr and vv is not None and vh is not None:
            prepared.append(grids.compute_cr(vv, vh))
    if args.tile_rows:
        cube = grids.composite_dekads_tiled(
            prepared, args.year, args.tile_rows, workers=args.threads
        )
    else:
        cube = grids.composite_dekads(prepared, args.year)
    grids.save_cube(cube, args.out)
    return [Path(args.scenes)]


def cmd_synth(args) -> list[Path]:
    if args.scenario == "builtin:desk64":
        scenario = synth.desk_scenario()
        inputs: list[Path] = []
    else:
        scenario = synth.load_scenario(args.scenario)
        inputs = [Path(args.scenario)]
    if args.seed is not None:
        scenario.seed = args.seed
    cube, polygons, truth = synth.generate(scenario)
    out = Path(args.out)
    grids.save_cube(cube, out / "cube")
    sampling.write_polygons(polygons, out / "polygons.tsv")
    grids.save_grid(truth, scenario.geometry, out / "truth", dtype="u16")
    grids.save_grid(scenario.stratum_values(), scenario.geometry, out / "strata", dtype="u8")
    return inputs


def cmd_extract(args) -> list[Path]:
    cube = grids.load_cube(args.cube)
    polygons = sampling.read_polygons(args.polygons)
    window = _parse_window(args.window, args.bands)
    samples = sampling.extract_samples(
        cube, polygons, window, mode=args.mode,
        require_full_window=not args.allow_partial,
    )
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    sampling.write_samples(samples, args.out)
    return [Path(args.cube), Path(args.polygons)]


def _values_list(text: str, cast):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if cast is int and tok.lower() == "none":
            out.append(None)
        elif cast is bool:
            out.append(tok.lower() == "true")
        else:
            out.append(cast(tok))
    return out


def cmd_tune(args) -> list[Path]:
    samples = sampling.read_samples(args.samples)
    a, b, step = (int(v) for v in args.ntrees.split(":"))
    grid = {
        "n_estimators": list(range(a, b + 1, step)),
        "max_features_rule": [v.strip() for v in args.mtry.split(",")],
        "min_samples_leaf": _values_list(args.min_samples_leaf, int),
        "min_samples_split": _values_list(args.min_samples_split, int),
        "max_depth": _values_list(args.max_depth, int),
        "criterion": ["gini"],
        "bootstrap": _values_list(args.bootstrap, bool),
    }
    result = forest.random_search_cv(
        samples, grid=grid, n_candidates=args.n_candidates,
        k_folds=args.folds, seed=args.seed, n_jobs=args.threads,
    )
    lines = ["rank\tmean_accuracy\t" + "\t".join(f"fold{k}" for k in range(args.folds)) + "\thyperparams"]
    order = np.argsort(-result.mean_scores, kind="stable")
    for rank, ci in enumerate(order, start=1):
        hp = result.candidates[ci]
        folds = "\t".join(f"{v:.6f}" for v in result.fold_scores[ci])
        lines.append(f"{rank}\t{result.mean_scores[ci]:.6f}\t{folds}\t{hp}")
    lines.append(f"# n_fits={result.n_fits}")
    lines.append(f"# best={result.best}")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text("\n".join(lines) + "\n")
    return [Path(args.samples)]


def _hp_from_args(args) -> forest.Hyperparams:
    return forest.Hyperparams(
        n_estimators=args.ntrees,
        max_features_rule=args.mtry,
        min_samples_leaf=args.min_samples_leaf,
        min_samples_split=args.min_samples_split,
        max_depth=None if str(args.max_depth).lower() == "none" else int(args.max_depth),
        bootstrap=not args.no_bootstrap,
    )


def cmd_train(args) -> list[Path]:
    samples = sampling.read_samples(args.samples)
    if args.stratum is not None:
        samples = samples.subset(samples.strata == args.stratum)
        if len(samples) == 0:
            raise forest.ForestError(f"no samples in stratum {args.stratum}")
    labels = samples.labels
    if args.level == 1:
        labels = np.array([legend.level1_of(int(c)) for c in labels])
    else:
        arable = np.array([legend.level1_of(int(c)) == 200 for c in labels])
        samples = samples.subset(arable)
        labels = samples.labels
    model = forest.train(
        samples.features, labels, hp=_hp_from_args(args), seed=args.seed,
        n_jobs=args.threads, level=args.level, stratum=args.stratum,
    )
    model.window = samples.window.describe()
    model.feature_names = tuple(samples.window.feature_names())
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    forest.save_model(model, args.out)
    if model.oob_accuracy is not None:
        print(f"oob_accuracy={model.oob_accuracy:.4f}")
    return [Path(args.samples)]


def cmd_predict(args) -> list[Path]:
    model = forest.load_model(args.model)
    samples = sampling.read_samples(args.samples)
    pred, votes = forest.predict(model, samples.features)
    lines = ["polygon_id\tpredicted\t" + "\t".join(str(c) for c in model.classes)]
    for i in range(len(pred)):
        frac = "\t".join(f"{v:.6f}" for v in votes[i])
        lines.append(f"{samples.polygon_ids[i]}\t{pred[i]}\t{frac}")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text("\n".join(lines) + "\n")
    return [Path(args.model), Path(args.samples)]


def _load_models(model_dir: Path) -> tuple[dict, dict]:
    l1, l2 = {}, {}
    for s in (1, 2):
        p1 = model_dir / f"level1_str{s}.bin"
        p2 = model_dir / f"level2_str{s}.bin"
        if p1.exists():
            l1[s] = forest.load_model(p1)
        if p2.exists():
            l2[s] = forest.load_model(p2)
    if not l1 or not l2:
        raise FileNotFoundError(f"no level1_str*/level2_str* models under {model_dir}")
    return l1, l2


def cmd_classify(args) -> list[Path]:
    cube = grids.load_cube(args.cube)
    l1, l2 = _load_models(Path(args.models))
    strata, sgeom = grids.load_grid(args.strata)
    window = _parse_window(args.window, args.bands)
    cmap = pipeline.classify_two_phase(
        cube, l1, l2, strata, sgeom, window,
        tile_rows=args.tile_rows, workers=args.threads,
    )
    inputs = [Path(args.cube), Path(args.models), Path(args.strata)]
    layers = []
    for spec in args.mask_layer or []:
        kind, path = _parse_layer(spec)
        values, geom = grids.load_grid(path)
        layers.append(pipeline.MaskLayer(kind, geom, values.astype(bool)))
        inputs.append(Path(path))
    dem = slope = None
    if args.dem:
        dem, dgeom = grids.load_grid(args.dem)
        if dgeom != cmap.geometry:
            raise pipeline.PipelineError("DEM grid is not aligned to the map")
        slope = pipeline.compute_slope(dem, dgeom.pixel_size)
        inputs.append(Path(args.dem))
    if layers or dem is not None:
        cmap = pipeline.apply_masks(
            cmap, layers, dem=dem, slope=slope,
            elevation_limit=args.elevation_limit, slope_limit=args.slope_limit,
        )
    pipeline.save_map(cmap, args.out)
    return inputs


def _parse_layer(spec: str) -> tuple[str, str]:
    kind, _, path = spec.partition("=")
    if not path:
        raise pipeline.PipelineError(f"mask layer must be kind=path, got {spec!r}")
    return kind, path


def cmd_mask(args) -> list[Path]:
    cmap = pipeline.load_map(args.map)
    inputs = [Path(args.map)]
    layers = []
    for spec in args.mask_layer or []:
        kind, path = _parse_layer(spec)
        values, geom = grids.load_grid(path)
        layers.append(pipeline.MaskLayer(kind, geom, values.astype(bool)))
        inputs.append(Path(path))
    dem = slope = None
    if args.dem:
        dem, dgeom = grids.load_grid(args.dem)
        slope = pipeline.compute_slope(dem, dgeom.pixel_size)
        inputs.append(Path(args.dem))
    masked = pipeline.apply_masks(
        cmap, layers, dem=dem, slope=slope,
        elevation_limit=args.elevation_limit, slope_limit=args.slope_limit,
    )
    pipeline.save_map(masked, args.out)
    return inputs


def _read_points(path: Path) -> list[assess.RefPoint]:
    points = []
    for line in path.read_text().splitlines():
        if not line.strip() or line.startswith("#") or line.startswith("x\t"):
            continue
        x, y, code = line.split("\t")[:3]
        points.append(assess.RefPoint(float(x), float(y), int(code)))
    return points


def _read_parcels(path: Path) -> list[assess.ParcelRecord]:
    parcels = []
    for line in path.read_text().splitlines():
        if not line.strip() or line.startswith("#") or line.startswith("pid\t"):
            continue
        pid, region, code, ring = line.split("\t")
        vertices = np.array([tuple(float(c) for c in v.split(",")) for v in ring.split(";")])
        parcels.append(assess.ParcelRecord(int(pid), region, code, vertices))
    return parcels


def cmd_assess(args) -> list[Path]:
    cmap = pipeline.load_map(args.map)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = [Path(args.map)]
    if args.mode == "points":
        points = _read_points(Path(args.points))
        inputs.append(Path(args.points))
        classes, counts, excluded = assess.confusion_from_points(cmap, points)
        assess.write_confusion(classes, counts, out / "confusion.tsv")
        if args.weights == "mapped-area":
            conf = assess.StratifiedConfusion.from_mapped_areas(
                classes, counts, pipeline.area_census(cmap)
            )
        else:
            conf = assess.StratifiedConfusion.proportional(classes, counts)
        report = assess.stratified_accuracy(conf, confidence=args.confidence)
        assess.write_accuracy_report(report, out / "accuracy.tsv")
        (out / "summary.txt").write_text(
            f"points={len(points)}\nexcluded={excluded}\noa={report.oa:.6f}\n"
            f"se_oa={report.se_oa:.6f}\nconfidence={args.confidence}\n"
        )
    elif args.mode == "parcels":
        parcels = _read_parcels(Path(args.parcels))
        inputs.append(Path(args.parcels))
        mapping = None
        if args.mapping:
            mapping = legend.load_scheme(args.mapping, args.scheme)
            inputs.append(Path(args.mapping))
        results = assess.parcel_majority(
            cmap, parcels, mapping,
            min_area_share=args.min_area_share, max_masked_share=args.max_masked_share,
        )
        for region, res in results.items():
            assess.write_confusion(res.classes, res.counts, out / f"{region}_confusion.tsv")
        summary = [
            f"{r}\tparcels_used={v.parcels_used}\texcluded={v.parcels_excluded}"
            f"\tdropped_classes={v.dropped_classes}"
            for r, v in results.items()
        ]
        (out / "summary.txt").write_text("\n".join(summary) + "\n")
    else:  # zonal
        region_values, _ = grids.load_grid(args.regions)
        inputs += [Path(args.regions), Path(args.reported)]
        region_ids = {}
        reported = []
        for line in Path(args.reported).read_text().splitlines():
            if not line.strip() or line.startswith("#") or line.startswith("region_id\t"):
                continue
            rid, region, code, kha = line.split("\t")
            region_ids[int(rid)] = region
            reported.append(assess.RegionAreaPair(region, int(code), float(kha)))
        result = assess.zonal_area_compare(cmap, region_values, region_ids, reported)
        lines = ["region\tclass\treported_kha\tmapped_kha\trelative_diff_pct"]
        for pair in reported:
            key = (pair.region, pair.class_code)
            mapped = result.mapped_kha.get(key, float("nan"))
            rel = result.relative_diff_pct.get(key, float("nan"))
            lines.append(f"{pair.region}\t{pair.class_code}\t{pair.reported_kha}\t{mapped:.6f}\t{rel:.6f}")
        lines.append("")
        for code, r in sorted(result.pearson_r.items()):
            lines.append(f"pearson_r.{code}={r:.6f}")
        (out / "zonal.tsv").write_text("\n".join(lines) + "\n")
    return inputs


def cmd_hindcast(args) -> list[Path]:
    samples = sampling.read_samples(args.samples)
    a, b = (int(v) for v in args.months.split(":"))
    result = assess.hindcast_series(
        samples, _hp_from_args(args), seed=args.seed, months=range(a, b + 1),
        fraction=args.split, per_stratum=args.per_stratum, n_jobs=args.threads,
    )
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    assess.write_hindcast(result, args.out)
    return [Path(args.samples)]


def cmd_benchmark_indices(args) -> list[Path]:
    samples = sampling.read_samples(args.samples)
    sets = [tuple(s.split(",")) for s in args.sets.split(";")]
    rows = assess.benchmark_indices(
        samples, sets, _hp_from_args(args), seed=args.seed,
        fraction=args.split, n_jobs=args.threads,
    )
    lines = ["bands\toverall_accuracy"]
    lines += [f"{name}\t{oa:.6f}" for name, oa in rows]
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text("\n".join(lines) + "\n")
    return [Path(args.samples)]


def cmd_report(args) -> list[Path]:
    classes, counts = assess.read_confusion(args.confusion)
    inputs = [Path(args.confusion)]
    if args.weights and args.weights not in ("proportional",):
        areas = {}
        for line in Path(args.weights).read_text().splitlines():
            if not line.strip() or line.startswith("#") or line.startswith("class\t"):
                continue
            code, area = line.split("\t")[:2]
            areas[int(code)] = float(area)
        conf = assess.StratifiedConfusion.from_mapped_areas(classes, counts, areas)
        inputs.append(Path(args.weights))
    else:
        conf = assess.StratifiedConfusion.proportional(classes, counts)
    report = assess.stratified_accuracy(conf, confidence=args.confidence)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    assess.write_accuracy_report(report, out / "accuracy.tsv")
    (out / "summary.txt").write_text(
        f"oa={report.oa:.6f}\nse_oa={report.se_oa:.6f}\nconfidence={args.confidence}\n"
    )
    return inputs


def cmd_legend(args) -> list[Path]:
    rows = legend.read_mapping_rows(args.mapping) if args.mapping else legend.gsaa_rows()
    print(legend.coverage_report(rows))
    return [Path(args.mapping)] if args.mapping else []


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sarcrop",
        description="Dekadal SAR compositing, two-phase crop classification, accuracy assessment",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--config", help="key=value file; flags override config, config overrides defaults")
        p.add_argument("--threads", type=int, default=1, help="parallel workers (results identical to 1)")
        return p

    p = add("composite", cmd_composite, "average scenes into a dekadal cube")
    p.add_argument("--scenes", required=True)
    p.add_argument("--year", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--edge-threshold-db", type=float, default=-25.0)
    p.add_argument("--edge-min-group", type=int, default=1)
    p.add_argument("--no-edge-mask", action="store_true")
    p.add_argument("--with-cr", action="store_true")
    p.add_argument("--tile-rows", type=int, default=0)

    p = add("synth", cmd_synth, "generate a synthetic cube with known truth")
    p.add_argument("--scenario", required=True, help="scenario file or builtin:desk64")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--out", required=True)

    p = add("extract", cmd_extract, "extract labeled samples from a cube")
    p.add_argument("--cube", required=True)
    p.add_argument("--polygons", required=True)
    p.add_argument("--window", default=DEFAULT_WINDOW_SPAN)
    p.add_argument("--bands", default=DEFAULT_BANDS)
    p.add_argument("--mode", choices=("per-pixel", "polygon-averaged"), default="per-pixel")
    p.add_argument("--allow-partial", action="store_true")
    p.add_argument("--out", required=True)

    p = add("tune", cmd_tune, "randomized-search cross-validation")
    p.add_argument("--samples", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-candidates", type=int, default=100)
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--ntrees", default="300:1200:100")
    p.add_argument("--mtry", default="sqrt,log2")
    p.add_argument("--min-samples-leaf", default="1,2,4")
    p.add_argument("--min-samples-split", default="2,3,5")
    p.add_argument("--max-depth", default="none,10,20,30")
    p.add_argument("--bootstrap", default="true")
    p.add_argument("--out", required=True)

    p = add("train", cmd_train, "train one forest model")
    p.add_argument("--samples", required=True)
    p.add_argument("--level", type=int, choices=(1, 2), required=True)
    p.add_argument("--stratum", type=int, choices=(1, 2))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--ntrees", type=int, default=100)
    p.add_argument("--mtry", default="sqrt")
    p.add_argument("--min-samples-leaf", type=int, default=1)
    p.add_argument("--min-samples-split", type=int, default=2)
    p.add_argument("--max-depth", default="none")
    p.add_argument("--no-bootstrap", action="store_true")
    p.add_argument("--out", required=True)

    p = add("predict", cmd_predict, "apply a saved model to a sample file")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--out", required=True)

    p = add("classify", cmd_classify, "two-phase classification of a cube")
    p.add_argument("--cube", required=True)
    p.add_argument("--models", required=True, help="directory with level{1,2}_str{1,2}.bin")
    p.add_argument("--strata", required=True, help="stratum raster directory")
    p.add_argument("--window", default=DEFAULT_WINDOW_SPAN)
    p.add_argument("--bands", default=DEFAULT_BANDS)
    p.add_argument("--dem", help="optional DEM grid; applies the terrain mask")
    p.add_argument("--elevation-limit", type=float, default=1000.0)
    p.add_argument("--slope-limit", type=float, default=10.0)
    p.add_argument("--mask-layer", action="append", help="kind=griddir (builtup/water/auxiliary)")
    p.add_argument("--tile-rows", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("mask", cmd_mask, "apply terrain/auxiliary masks to a map")
    p.add_argument("--map", required=True)
    p.add_argument("--dem")
    p.add_argument("--elevation-limit", type=float, default=1000.0)
    p.add_argument("--slope-limit", type=float, default=10.0)
    p.add_argument("--mask-layer", action="append", help="kind=griddir (builtup/water/auxiliary)")
    p.add_argument("--out", required=True)

    p = add("assess", cmd_assess, "accuracy assessment against reference data")
    p.add_argument("--mode", choices=("points", "parcels", "zonal"), required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--points")
    p.add_argument("--parcels")
    p.add_argument("--mapping")
    p.add_argument("--scheme")
    p.add_argument("--regions")
    p.add_argument("--reported")
    p.add_argument("--weights", default="proportional", choices=("proportional", "mapped-area"))
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--min-area-share", type=float, default=0.01)
    p.add_argument("--max-masked-share", type=float, default=0.5)
    p.add_argument("--out", required=True)

    p = add("hindcast", cmd_hindcast, "accuracy vs in-season time")
    p.add_argument("--samples", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--months", default="1:12")
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--per-stratum", action="store_true")
    p.add_argument("--ntrees", type=int, default=50)
    p.add_argument("--mtry", default="sqrt")
    p.add_argument("--min-samples-leaf", type=int, default=1)
    p.add_argument("--min-samples-split", type=int, default=2)
    p.add_argument("--max-depth", default="none")
    p.add_argument("--no-bootstrap", action="store_true")
    p.add_argument("--out", required=True)

    p = add("benchmark-indices", cmd_benchmark_indices, "accuracy per band set")
    p.add_argument("--samples", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--sets", default="VV_dB;VH_dB;CR;VV_dB,VH_dB;VV_dB,VH_dB,CR")
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--ntrees", type=int, default=50)
    p.add_argument("--mtry", default="sqrt")
    p.add_argument("--min-samples-leaf", type=int, default=1)
    p.add_argument("--min-samples-split", type=int, default=2)
    p.add_argument("--max-depth", default="none")
    p.add_argument("--no-bootstrap", action="store_true")
    p.add_argument("--out", required=True)

    p = add("report", cmd_report, "stratified accuracy report from saved counts")
    p.add_argument("--confusion", required=True)
    p.add_argument("--weights", default="proportional", help="'proportional' or a class\\tarea file")
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--out", required=True)

    p = add("legend", cmd_legend, "validate a mapping table and print coverage")
    p.add_argument("--mapping", help="mapping file (defaults to the shipped parcel-scheme tables)")

    return parser


def _apply_config(args: argparse.Namespace, argv: list[str]):
    if not getattr(args, "config", None):
        return
    explicit = {tok.split("=")[0] for tok in argv if tok.startswith("--")}
    for line in Path(args.config).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if f"--{key}" in explicit:
            continue  # flags beat config
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise argparse.ArgumentTypeError(f"config key {key!r} unknown for this stage")
        current = getattr(args, dest)
        if isinstance(current, bool):
            setattr(args, dest, value.lower() == "true")
        elif isinstance(current, int):
            setattr(args, dest, int(value))
        elif isinstance(current, float):
            setattr(args, dest, float(value))
        else:
            setattr(args, dest, value)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, argv)
        t0 = time.perf_counter()
        inputs = args.func(args)
        wall = time.perf_counter() - t0
        out = getattr(args, "out", None)
        if out is not None:
            write_run_manifest(Path(out), args.command, vars(args), inputs, wall)
        return EXIT_OK
    except FileNotFoundError as e:
        print(f"error: code=missing-input {e}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except _FORMAT_ERRORS as e:
        print(f"error: code=format-violation {e}", file=sys.stderr)
        return EXIT_FORMAT
    except argparse.ArgumentTypeError as e:
        print(f"error: code=bad-config {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001 - the CLI boundary reports and exits
        print(f"error: code=failure {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
