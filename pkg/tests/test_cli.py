"""Command-line stages: wiring, exit codes, manifests, determinism."""

import datetime as dt
from pathlib import Path

import numpy as np
import pytest

from sarcrop import cli, grids, pipeline, sampling, synth
from sarcrop.synth import BandCurve, CropSignature, ParcelSpec, SyntheticScenario


def mini_scenario(noise=1.0, seed=5):
    """Three classes (two crops + woodland), one stratum, 20x12 grid."""
    geom = grids.GridGeometry(width=20, height=12, pixel_size=10.0, origin_x=0.0, origin_y=120.0)
    signatures = {
        211: CropSignature(211, BandCurve(-13.0, -8.0, 4, 6, 16), BandCurve(-18.0, 0.001, 4, 6, 16),
                           noise_sigma_db=noise),
        216: CropSignature(216, BandCurve(-13.0, 8.0, 10, 12, 22), BandCurve(-18.0, 6.0, 10, 12, 22),
                           noise_sigma_db=noise),
        300: CropSignature(300, BandCurve(-7.5, 0.001, 10, 12, 22), BandCurve(-12.5, 0.001, 10, 12, 22),
                           noise_sigma_db=noise),
    }
    parcels = []
    pid = 0
    codes = [211, 216, 300]
    for r in range(0, 12, 4):
        for c in range(0, 20, 4):
            pid += 1
            parcels.append(ParcelSpec(pid, codes[pid % 3], 1, r + 1, c + 1, 3, 3))
    return SyntheticScenario(geometry=geom, year=2018, seed=seed,
                             stratum_boundary_col=20, signatures=signatures, parcels=parcels)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """synth -> extract -> train(level1, level2) -> classify, via the CLI."""
    root = tmp_path_factory.mktemp("ws")
    scenario_file = root / "scenario.txt"
    synth.save_scenario(mini_scenario(), scenario_file)

    assert cli.main(["synth", "--scenario", str(scenario_file), "--out", str(root / "data")]) == 0
    assert cli.main([
        "extract", "--cube", str(root / "data/cube"), "--polygons", str(root / "data/polygons.tsv"),
        "--window", "0:21", "--bands", "VV_dB,VH_dB", "--out", str(root / "samples.tsv"),
    ]) == 0
    for level in (1, 2):
        assert cli.main([
            "train", "--samples", str(root / "samples.tsv"), "--level", str(level),
            "--stratum", "1", "--seed", "3", "--ntrees", "25",
            "--out", str(root / f"models/level{level}_str1.bin"),
        ]) == 0
    assert cli.main([
        "classify", "--cube", str(root / "data/cube"), "--models", str(root / "models"),
        "--strata", str(root / "data/strata"), "--window", "0:21",
        "--bands", "VV_dB,VH_dB", "--out", str(root / "map"),
    ]) == 0
    return root


def test_full_synthetic_pipeline_recovers_truth(workspace):
    cmap = pipeline.load_map(workspace / "map")
    truth, _ = grids.load_grid(workspace / "data/truth")
    labeled = truth > 0
    assert cmap.reported[labeled].all()
    oa = np.mean(cmap.classes[labeled] == truth[labeled])
    assert oa >= 0.95
    # background pixels were never classified
    assert (cmap.reason[~labeled] == pipeline.REASON_NO_DATA).all()


def test_assess_points_stage_emits_accuracy_report(workspace, tmp_path):
    truth, geom = grids.load_grid(workspace / "data/truth")
    lines = ["x\ty\tclass"]
    rng = np.random.default_rng(0)
    rows, cols = np.nonzero(truth > 0)
    for i in rng.choice(len(rows), size=60, replace=False):
        x, y = geom.pixel_center(rows[i], cols[i])
        lines.append(f"{float(x)}\t{float(y)}\t{int(truth[rows[i], cols[i]])}")
    points_file = tmp_path / "points.tsv"
    points_file.write_text("\n".join(lines) + "\n")
    out = tmp_path / "assess"
    assert cli.main([
        "assess", "--mode", "points", "--map", str(workspace / "map"),
        "--points", str(points_file), "--out", str(out),
    ]) == 0
    summary = (out / "summary.txt").read_text()
    assert "oa=" in summary
    oa = float([l for l in summary.splitlines() if l.startswith("oa=")][0].split("=")[1])
    assert oa >= 0.9
    assert (out / "confusion.tsv").exists() and (out / "accuracy.tsv").exists()
    assert (out / "run_manifest.txt").exists()


def test_report_stage_from_saved_confusion(workspace, tmp_path):
    from sarcrop.assess import write_confusion
    counts = np.array([[90, 10], [5, 95]])
    conf_file = tmp_path / "counts.tsv"
    write_confusion([211, 216], counts, conf_file)
    out = tmp_path / "report"
    assert cli.main(["report", "--confusion", str(conf_file), "--out", str(out)]) == 0
    text = (out / "summary.txt").read_text()
    assert "oa=0.925" in text


def test_missing_required_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["classify", "--cube", "somewhere"])
    assert exc.value.code == 2


def test_missing_input_exit_code(tmp_path):
    code = cli.main([
        "extract", "--cube", str(tmp_path / "nope"), "--polygons", str(tmp_path / "nope.tsv"),
        "--out", str(tmp_path / "s.tsv"),
    ])
    assert code == cli.EXIT_MISSING_INPUT


def test_format_violation_exit_code(tmp_path):
    bad = tmp_path / "bad_scenario.txt"
    bad.write_text("width=0\nheight=4\npixel_size=10\norigin_x=0\norigin_y=0\nyear=2018\nseed=1\nstratum_boundary_col=0\n")
    code = cli.main(["synth", "--scenario", str(bad), "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_FORMAT


def test_stage_reruns_are_byte_identical(workspace, tmp_path):
    scenario_file = workspace / "scenario.txt"
    for out in ("a", "b"):
        assert cli.main(["synth", "--scenario", str(scenario_file), "--out", str(tmp_path / out)]) == 0
    for rel in ("cube/cube.txt", "cube/d05_VV_dB.f32", "polygons.tsv", "truth/values.u16"):
        a = (tmp_path / "a" / rel).read_bytes()
        b = (tmp_path / "b" / rel).read_bytes()
        assert a == b, rel
    # the run manifest (wall time) is the only file allowed to differ


def test_run_manifest_contents(workspace):
    manifest = (workspace / "map" / "run_manifest.txt").read_text()
    assert "stage=classify" in manifest
    assert "config.window=0:21" in manifest
    assert "input." in manifest and "wall_time_s=" in manifest
    assert "sarcrop_version=" in manifest
    # single-file outputs get a sidecar manifest, one per output file
    assert (workspace / "samples.tsv.manifest").exists()
    assert "stage=extract" in (workspace / "samples.tsv.manifest").read_text()


def test_stages_do_not_mutate_inputs(workspace, tmp_path):
    import hashlib

    cube_files = sorted((workspace / "data/cube").rglob("*"))
    before = {f: hashlib.sha256(f.read_bytes()).hexdigest() for f in cube_files if f.is_file()}
    assert cli.main([
        "extract", "--cube", str(workspace / "data/cube"),
        "--polygons", str(workspace / "data/polygons.tsv"),
        "--out", str(tmp_path / "again.tsv"),
    ]) == 0
    after = {f: hashlib.sha256(f.read_bytes()).hexdigest() for f in cube_files if f.is_file()}
    assert before == after


def test_config_file_precedence(workspace, tmp_path):
    config = tmp_path / "cfg"
    config.write_text("window=0:9\nbands=VV_dB,VH_dB\n")
    out = tmp_path / "s2.tsv"
    assert cli.main([
        "extract", "--cube", str(workspace / "data/cube"),
        "--polygons", str(workspace / "data/polygons.tsv"),
        "--config", str(config), "--out", str(out),
    ]) == 0
    samples = sampling.read_samples(out)
    assert samples.window.end_dekad == 9  # config beat the default
    out2 = tmp_path / "s3.tsv"
    assert cli.main([
        "extract", "--cube", str(workspace / "data/cube"),
        "--polygons", str(workspace / "data/polygons.tsv"),
        "--config", str(config), "--window", "0:4", "--out", str(out2),
    ]) == 0
    assert sampling.read_samples(out2).window.end_dekad == 4  # flag beat config


def test_tune_stage_counts_fits(workspace, tmp_path):
    out = tmp_path / "cv.tsv"
    assert cli.main([
        "tune", "--samples", str(workspace / "samples.tsv"), "--seed", "2",
        "--n-candidates", "4", "--folds", "2", "--ntrees", "4:8:4",
        "--max-depth", "none", "--min-samples-leaf", "1", "--min-samples-split", "2",
        "--out", str(out),
    ]) == 0
    text = out.read_text()
    assert "# n_fits=8" in text
    assert "# best=" in text


def test_hindcast_and_benchmark_stages(workspace, tmp_path):
    hc = tmp_path / "hindcast.tsv"
    assert cli.main([
        "hindcast", "--samples", str(workspace / "samples.tsv"), "--seed", "4",
        "--months", "1:3", "--ntrees", "8", "--out", str(hc),
    ]) == 0
    assert hc.read_text().startswith("month\tstratum\tclass\tmetric\tvalue")
    bm = tmp_path / "bench.tsv"
    assert cli.main([
        "benchmark-indices", "--samples", str(workspace / "samples.tsv"), "--seed", "4",
        "--sets", "VV_dB;VH_dB;VV_dB,VH_dB", "--ntrees", "8", "--out", str(bm),
    ]) == 0
    assert len(bm.read_text().splitlines()) == 4


def test_predict_stage(workspace, tmp_path):
    out = tmp_path / "pred.tsv"
    assert cli.main([
        "predict", "--model", str(workspace / "models/level1_str1.bin"),
        "--samples", str(workspace / "samples.tsv"), "--out", str(out),
    ]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("polygon_id\tpredicted")


def test_legend_stage_prints_coverage(capsys):
    assert cli.main(["legend"]) == 0
    out = capsys.readouterr().out
    assert "scheme bevl2018" in out and "CONFLICT" in out


def test_composite_stage_round_trip(tmp_path):
    # write two scene pairs, composite via the CLI, check the dekad mean
    geom = grids.GridGeometry(width=4, height=4, pixel_size=10.0, origin_y=40.0)
    scenes_dir = tmp_path / "scenes"
    for i, (day, value) in enumerate([(2, 0.1), (9, 0.2)]):
        for band in ("VV", "VH"):
            s = grids.SceneGrid(date=dt.date(2018, 5, day), band=band, geometry=geom,
                                values=np.full((4, 4), value), valid=np.ones((4, 4), bool))
            grids.save_scene(s, scenes_dir / f"s{i}_{band}")
    out = tmp_path / "cube"
    assert cli.main(["composite", "--scenes", str(scenes_dir), "--year", "2018",
                     "--out", str(out)]) == 0
    cube = grids.load_cube(out)
    assert cube.valid[12].all()
    got = cube.values[12, cube.band_index("VV_dB"), 0, 0]
    assert got == pytest.approx(-8.2391, abs=1e-3)


def test_composite_stage_tiled_with_cr(tmp_path):
    geom = grids.GridGeometry(width=6, height=9, pixel_size=10.0, origin_y=90.0)
    scenes_dir = tmp_path / "scenes"
    rng = np.random.default_rng(1)
    for i, day in enumerate((3, 8, 14)):
        vv = rng.uniform(0.02, 0.4, geom.shape)
        for band, values in (("VV", vv), ("VH", vv * 0.3)):
            s = grids.SceneGrid(date=dt.date(2018, 6, day), band=band, geometry=geom,
                                values=values, valid=np.ones(geom.shape, bool))
            grids.save_scene(s, scenes_dir / f"s{i}_{band}")
    plain, tiled = tmp_path / "plain", tmp_path / "tiled"
    assert cli.main(["composite", "--scenes", str(scenes_dir), "--year", "2018",
                     "--with-cr", "--out", str(plain)]) == 0
    assert cli.main(["composite", "--scenes", str(scenes_dir), "--year", "2018",
                     "--with-cr", "--tile-rows", "4", "--threads", "3",
                     "--out", str(tiled)]) == 0
    a, b = grids.load_cube(plain), grids.load_cube(tiled)
    assert a.bands == ("VV_dB", "VH_dB", "CR")
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.valid, b.valid)
    cr = a.values[15, a.band_index("CR")][a.valid[15]]
    np.testing.assert_allclose(cr, 0.3, atol=1e-6)  # ratio band stays linear


def test_assess_parcels_stage(workspace, tmp_path):
    truth, geom = grids.load_grid(workspace / "data/truth")
    scenario = mini_scenario()
    lines = ["pid\tregion\tcode\tvertices"]
    for p in scenario.parcels:
        ps = geom.pixel_size
        x0, x1 = geom.origin_x + p.col0 * ps, geom.origin_x + (p.col0 + p.n_cols) * ps
        yt, yb = geom.origin_y - p.row0 * ps, geom.origin_y - (p.row0 + p.n_rows) * ps
        ring = f"{x0},{yt};{x1},{yt};{x1},{yb};{x0},{yb}"
        lines.append(f"{p.pid}\tmini\t{p.code}\t{ring}")
    parcel_file = tmp_path / "parcels.tsv"
    parcel_file.write_text("\n".join(lines) + "\n")
    out = tmp_path / "parcels_out"
    assert cli.main([
        "assess", "--mode", "parcels", "--map", str(workspace / "map"),
        "--parcels", str(parcel_file), "--min-area-share", "0.0", "--out", str(out),
    ]) == 0
    assert (out / "mini_confusion.tsv").exists()
    from sarcrop.assess import count_metrics, read_confusion
    classes, counts = read_confusion(out / "mini_confusion.tsv")
    assert 300 not in classes  # woodland excluded from parcel metrics
    assert count_metrics(counts)["oa"] >= 0.9


def test_assess_zonal_stage(workspace, tmp_path):
    cmap = pipeline.load_map(workspace / "map")
    regions = np.ones(cmap.geometry.shape, dtype=np.uint8)
    regions[:, 10:] = 2
    regions_dir = tmp_path / "regions"
    grids.save_grid(regions, cmap.geometry, regions_dir, dtype="u8")
    truth, _ = grids.load_grid(workspace / "data/truth")
    px_kha = cmap.geometry.pixel_area_ha / 1000.0
    lines = ["region_id\tregion\tclass\tkha"]
    for rid, name in ((1, "west"), (2, "east")):
        for code in (211, 216):
            area = float(((truth == code) & (regions == rid)).sum()) * px_kha
            lines.append(f"{rid}\t{name}\t{code}\t{area}")
    reported_file = tmp_path / "reported.tsv"
    reported_file.write_text("\n".join(lines) + "\n")
    out = tmp_path / "zonal_out"
    assert cli.main([
        "assess", "--mode", "zonal", "--map", str(workspace / "map"),
        "--regions", str(regions_dir), "--reported", str(reported_file),
        "--out", str(out),
    ]) == 0
    text = (out / "zonal.tsv").read_text()
    assert "pearson_r.211=" in text and "pearson_r.216=" in text


def test_mask_stage(workspace, tmp_path):
    dem_dir = tmp_path / "dem"
    cmap = pipeline.load_map(workspace / "map")
    dem = np.zeros(cmap.geometry.shape)
    dem[:, :3] = 1500.0
    dem[0, :] = 1500.0  # corner is high; slope from the step edge is steep
    grids.save_grid(dem, cmap.geometry, dem_dir, dtype="f32")
    out = tmp_path / "masked"
    assert cli.main(["mask", "--map", str(workspace / "map"), "--dem", str(dem_dir),
                     "--out", str(out)]) == 0
    masked = pipeline.load_map(out)
    assert (masked.reason == pipeline.REASON_TERRAIN).any()
