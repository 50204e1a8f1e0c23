"""Raster core: dekad calendar, edge masking, compositing, window slicing, IO."""

import calendar
import datetime as dt

import numpy as np
import pytest

from sarcrop import grids
from sarcrop.grids import (
    DekadalCube,
    FeatureWindow,
    GridGeometry,
    GridError,
    SceneGrid,
    composite_dekads,
    composite_dekads_tiled,
    compute_cr,
    dekad_of_date,
    load_cube,
    load_scene,
    mask_scene_edges,
    save_cube,
    save_scene,
    slice_window,
)


def scene(values, band="VV", date=dt.date(2018, 1, 5), valid=None, pixel_size=10.0):
    values = np.asarray(values, dtype=float)
    geom = GridGeometry(width=values.shape[1], height=values.shape[0], pixel_size=pixel_size)
    if valid is None:
        valid = np.ones(values.shape, dtype=bool)
    return SceneGrid(date=date, band=band, geometry=geom, values=values, valid=valid)


def db(x):
    return 10.0 ** (x / 10.0)


# --- dekad calendar ---------------------------------------------------------

def test_dekad_examples():
    assert dekad_of_date(dt.date(2018, 3, 25)) == 8  # third dekad of March
    assert dekad_of_date(dt.date(2018, 1, 1)) == 0
    assert dekad_of_date(dt.date(2018, 12, 31)) == 35


def test_dekad_calendar_brute_force_2018():
    # independent oracle: enumerate the [1-10], [11-20], [21-end] windows
    oracle = {}
    idx = 0
    for month in range(1, 13):
        last = calendar.monthrange(2018, month)[1]
        for lo, hi in ((1, 10), (11, 20), (21, last)):
            for day in range(lo, hi + 1):
                oracle[dt.date(2018, month, day)] = idx
            idx += 1
    assert idx == 36
    assert len(oracle) == 365
    for date, expected in oracle.items():
        assert dekad_of_date(date) == expected, date
    # every dekad bin is non-empty and bounds agree
    for d in range(36):
        lo, hi = grids.dekad_bounds(2018, d)
        assert oracle[lo] == d and oracle[hi] == d


# --- edge masking -----------------------------------------------------------

def test_edge_mask_nothing_below_threshold():
    vv = scene(np.full((4, 4), db(-10.0)))
    vh = scene(np.full((4, 4), db(-14.0)), band="VH")
    mvv, mvh = mask_scene_edges(vv, vh, threshold_db=-25.0, min_group=1)
    assert mvv.valid.all() and mvh.valid.all()
    np.testing.assert_array_equal(mvv.values, vv.values)


def test_edge_mask_corner_block():
    # hand-enumerated component: a 2x2 corner block below -25 dB
    vals = np.full((5, 5), db(-10.0))
    vals[:2, :2] = db(-30.0)
    vv = scene(vals)
    vh = scene(np.full((5, 5), db(-15.0)), band="VH")
    mvv, mvh = mask_scene_edges(vv, vh, threshold_db=-25.0, min_group=2)
    expected = np.ones((5, 5), dtype=bool)
    expected[:2, :2] = False
    np.testing.assert_array_equal(mvv.valid, expected)
    np.testing.assert_array_equal(mvh.valid, expected)


def test_edge_mask_isolated_pixel_survives_min_group():
    vals = np.full((5, 5), db(-10.0))
    vals[2, 2] = db(-30.0)
    vv = scene(vals)
    vh = scene(np.full((5, 5), db(-15.0)), band="VH")
    mvv, _ = mask_scene_edges(vv, vh, threshold_db=-25.0, min_group=2)
    assert mvv.valid.all()


def test_edge_mask_uses_4_connectivity():
    # two diagonal pixels are separate components under 4-connectivity
    vals = np.full((4, 4), db(-10.0))
    vals[1, 1] = vals[2, 2] = db(-30.0)
    vv = scene(vals)
    vh = scene(np.full((4, 4), db(-15.0)), band="VH")
    mvv, _ = mask_scene_edges(vv, vh, min_group=2)
    assert mvv.valid.all()


def test_edge_mask_idempotent():
    rng = np.random.default_rng(3)
    vals = db(rng.uniform(-35, -5, size=(16, 16)))
    vv = scene(vals)
    vh = scene(vals * 0.5, band="VH")
    once = mask_scene_edges(vv, vh, min_group=3)
    twice = mask_scene_edges(*once, min_group=3)
    np.testing.assert_array_equal(once[0].valid, twice[0].valid)
    np.testing.assert_array_equal(once[1].valid, twice[1].valid)


def test_edge_mask_rejects_geometry_mismatch():
    vv = scene(np.ones((4, 4)))
    vh = scene(np.ones((5, 5)), band="VH")
    with pytest.raises(GridError):
        mask_scene_edges(vv, vh)


# --- compositing ------------------------------------------------------------

def test_composite_unity_is_zero_db():
    vv = scene(np.ones((2, 2)))
    vh = scene(np.ones((2, 2)), band="VH")
    cube = composite_dekads([vv, vh], 2018)
    assert cube.values[0, cube.band_index("VV_dB"), 0, 0] == pytest.approx(0.0)


def test_composite_linear_mean_then_db():
    # two scenes in one dekad: mean(0.1, 0.2) = 0.15 -> -8.2391 dB; the
    # dB-of-each-then-average value (-8.4949) must NOT appear (Jensen gap)
    date1, date2 = dt.date(2018, 5, 2), dt.date(2018, 5, 9)
    scenes = [
        scene(np.full((2, 2), 0.1), date=date1),
        scene(np.full((2, 2), 0.1), band="VH", date=date1),
        scene(np.full((2, 2), 0.2), date=date2),
        scene(np.full((2, 2), 0.2), band="VH", date=date2),
    ]
    cube = composite_dekads(scenes, 2018)
    got = float(cube.values[12, cube.band_index("VV_dB"), 0, 0])
    assert got == pytest.approx(10 * np.log10(0.15), abs=1e-3)
    assert got == pytest.approx(-8.2391, abs=1e-3)
    assert abs(got - (10 * np.log10(0.1) + 10 * np.log10(0.2)) / 2) > 0.2


def test_composite_scene_day25_march_lands_in_dekad_8():
    s = scene(np.ones((2, 2)), date=dt.date(2018, 3, 25))
    sh = scene(np.ones((2, 2)), band="VH", date=dt.date(2018, 3, 25))
    cube = composite_dekads([s, sh], 2018)
    assert cube.valid[8].all()
    assert not cube.valid[7].any() and not cube.valid[9].any()


def test_composite_permutation_invariant():
    rng = np.random.default_rng(11)
    scenes = []
    for day in (1, 4, 7, 12, 21):
        date = dt.date(2018, 6, day)
        scenes.append(scene(rng.uniform(0.01, 0.5, (6, 6)), date=date))
        scenes.append(scene(rng.uniform(0.01, 0.5, (6, 6)), band="VH", date=date))
    a = composite_dekads(scenes, 2018)
    b = composite_dekads(scenes[::-1], 2018)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.valid, b.valid)


def test_composite_partial_validity_still_composites():
    # pixel invalid in one scene still gets a composite from the other
    date1, date2 = dt.date(2018, 2, 1), dt.date(2018, 2, 8)
    v1 = np.ones((2, 2), dtype=bool)
    v1[0, 0] = False
    scenes = [
        scene(np.full((2, 2), 0.1), date=date1, valid=v1),
        scene(np.full((2, 2), 0.1), band="VH", date=date1, valid=v1),
        scene(np.full((2, 2), 0.3), date=date2),
        scene(np.full((2, 2), 0.3), band="VH", date=date2),
    ]
    cube = composite_dekads(scenes, 2018)
    assert cube.valid[3].all()
    bi = cube.band_index("VV_dB")
    assert cube.values[3, bi, 0, 0] == pytest.approx(10 * np.log10(0.3), abs=1e-5)
    assert cube.values[3, bi, 0, 1] == pytest.approx(10 * np.log10(0.2), abs=1e-5)


def test_composite_empty_dekads_are_invalid_not_zero():
    s = scene(np.full((2, 2), 0.5))
    sh = scene(np.full((2, 2), 0.5), band="VH")
    cube = composite_dekads([s, sh], 2018)
    assert cube.valid[0].all()
    assert not cube.valid[1:].any()


def test_composite_empty_scene_list():
    geom = GridGeometry(width=3, height=2)
    cube = composite_dekads([], 2018, geometry=geom)
    assert not cube.valid.any()
    with pytest.raises(GridError):
        composite_dekads([], 2018)


def test_composite_rejects_wrong_year():
    s = scene(np.ones((2, 2)), date=dt.date(2017, 3, 1))
    with pytest.raises(GridError):
        composite_dekads([s], 2018)


def test_composite_tiled_matches_single_pass():
    rng = np.random.default_rng(5)
    scenes = []
    for day in (2, 9, 15, 28):
        date = dt.date(2018, 7, day)
        scenes.append(scene(rng.uniform(0.01, 0.6, (13, 7)), date=date))
        scenes.append(scene(rng.uniform(0.01, 0.6, (13, 7)), band="VH", date=date))
    whole = composite_dekads(scenes, 2018)
    tiled = composite_dekads_tiled(scenes, 2018, tile_rows=4, workers=3)
    np.testing.assert_array_equal(whole.values, tiled.values)
    np.testing.assert_array_equal(whole.valid, tiled.valid)


# --- cross-ratio ------------------------------------------------------------

def test_cr_identity_ratio():
    vv = scene(np.full((3, 3), 0.2))
    vh = scene(np.full((3, 3), 0.2), band="VH")
    cr = compute_cr(vv, vh)
    np.testing.assert_allclose(cr.values[cr.valid], 1.0)


def test_cr_quarter_ratio():
    vv = scene(np.full((2, 2), 0.2))
    vh = scene(np.full((2, 2), 0.05), band="VH")
    cr = compute_cr(vv, vh)
    np.testing.assert_allclose(cr.values[cr.valid], 0.25)


def test_cr_zero_vv_invalid():
    vals = np.full((2, 2), 0.2)
    vals[0, 0] = 0.0
    cr = compute_cr(scene(vals), scene(np.full((2, 2), 0.05), band="VH"))
    assert not cr.valid[0, 0]
    assert cr.valid[1, 1]


def test_cr_stays_linear_through_compositing():
    # CR dekad mean is the arithmetic mean of per-scene ratios, no dB step
    date1, date2 = dt.date(2018, 4, 2), dt.date(2018, 4, 9)
    pairs = [(0.2, 0.05), (0.4, 0.3)]
    scenes = []
    for date, (vv_val, vh_val) in zip((date1, date2), pairs):
        vv = scene(np.full((2, 2), vv_val), date=date)
        vh = scene(np.full((2, 2), vh_val), band="VH", date=date)
        scenes += [vv, vh, compute_cr(vv, vh)]
    cube = composite_dekads(scenes, 2018)
    expected = (0.05 / 0.2 + 0.3 / 0.4) / 2
    assert cube.values[9, cube.band_index("CR"), 0, 0] == pytest.approx(expected, abs=1e-6)


# --- window slicing ---------------------------------------------------------

def make_cube(h=3, w=4, bands=("VV_dB", "VH_dB", "CR")):
    rng = np.random.default_rng(2)
    values = rng.normal(-12, 3, size=(36, len(bands), h, w)).astype(np.float32)
    valid = np.ones((36, h, w), dtype=bool)
    return DekadalCube(year=2018, bands=bands, geometry=GridGeometry(width=w, height=h),
                       values=values, valid=valid)


def test_window_feature_counts():
    assert FeatureWindow(0, 35, ("VV_dB", "VH_dB", "CR")).n_features == 108
    assert FeatureWindow(0, 21, ("VV_dB", "VH_dB")).n_features == 44
    assert FeatureWindow(5, 5, ("CR",)).n_features == 1


def test_window_band_major_dekad_minor_order():
    cube = make_cube()
    window = FeatureWindow(2, 4, ("VH_dB", "CR"))
    X, valid = slice_window(cube, window)
    assert X.shape == (12, 6)
    assert valid.all()
    px = 5  # row 1, col 1
    r, c = divmod(px, 4)
    expected = np.concatenate([cube.values[2:5, 1, r, c], cube.values[2:5, 2, r, c]])
    np.testing.assert_allclose(X[px], expected, rtol=1e-6)
    assert window.feature_names() == ["VH_dB_02", "VH_dB_03", "VH_dB_04",
                                      "CR_02", "CR_03", "CR_04"]


def test_window_invalid_dekad_invalidates_rows():
    cube = make_cube()
    cube.valid[3, 0, 0] = False
    X, valid = slice_window(cube, FeatureWindow(2, 4, ("VV_dB",)))
    assert not valid[0]
    assert valid[1:].all()


def test_window_out_of_range_and_missing_band():
    cube = make_cube(bands=("VV_dB",))
    with pytest.raises(GridError):
        FeatureWindow(30, 36, ("VV_dB",))
    with pytest.raises(GridError):
        slice_window(cube, FeatureWindow(0, 3, ("VH_dB",)))


def test_window_column_subset():
    full = FeatureWindow(0, 35, ("VV_dB", "VH_dB"))
    sub = FeatureWindow(0, 2, ("VH_dB",))
    np.testing.assert_array_equal(full.column_subset(sub), [36, 37, 38])


# --- IO round trips ---------------------------------------------------------

def test_scene_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    valid = rng.random((5, 7)) > 0.3
    s = scene(rng.uniform(0.01, 0.9, (5, 7)), valid=valid, date=dt.date(2018, 8, 14))
    save_scene(s, tmp_path / "s")
    back = load_scene(tmp_path / "s")
    assert back.date == s.date and back.band == s.band and back.geometry == s.geometry
    np.testing.assert_allclose(back.values, s.values.astype(np.float32), rtol=1e-7)
    np.testing.assert_array_equal(back.valid, s.valid)


def test_cube_round_trip(tmp_path):
    cube = make_cube()
    cube.valid[7, 1, 2] = False
    save_cube(cube, tmp_path / "c")
    back = load_cube(tmp_path / "c")
    assert back.year == cube.year and back.bands == cube.bands and back.geometry == cube.geometry
    np.testing.assert_array_equal(back.values, cube.values)
    np.testing.assert_array_equal(back.valid, cube.valid)


def test_grid_geometry_validation():
    with pytest.raises(GridError):
        GridGeometry(width=0, height=3)
    with pytest.raises(GridError):
        GridGeometry(width=3, height=3, pixel_size=0)


def test_cell_of_half_open_convention():
    geom = GridGeometry(width=4, height=4, pixel_size=10.0, origin_x=0.0, origin_y=40.0)
    # a point exactly on the boundary between cols 0 and 1 belongs to col 1
    row, col = geom.cell_of(10.0, 35.0)
    assert (row, col) == (0, 1)
    # a point exactly on the row boundary belongs to the lower row
    row, col = geom.cell_of(5.0, 30.0)
    assert (row, col) == (1, 0)
