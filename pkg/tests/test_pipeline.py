"""Two-phase classification gating, slope computation, masking, census."""

import numpy as np
import pytest

from sarcrop.forest import Hyperparams, train
from sarcrop.grids import DekadalCube, FeatureWindow, GridGeometry
from sarcrop.pipeline import (
    REASON_AUXILIARY,
    REASON_NO_DATA,
    REASON_NONE,
    REASON_TERRAIN,
    REASON_WATER,
    ClassifiedMap,
    MaskLayer,
    PipelineError,
    apply_masks,
    area_census,
    classify_two_phase,
    compute_slope,
    load_map,
    save_map,
)

WINDOW = FeatureWindow(0, 3, ("VV_dB", "VH_dB"))

# class -> constant (VV, VH) level; trivially separable
LEVELS = {211: (-20.0, -24.0), 216: (-6.0, -10.0), 300: (-8.0, -13.0), 500: (-11.0, -16.0)}


def training_data(codes, n=60, seed=0):
    rng = np.random.default_rng(seed)
    X, y = [], []
    for code in codes:
        vv, vh = LEVELS[code]
        block = np.concatenate(
            [rng.normal(vv, 0.2, size=(n, 4)), rng.normal(vh, 0.2, size=(n, 4))], axis=1
        )
        X.append(block)
        y.append(np.full(n, code))
    return np.vstack(X), np.concatenate(y)


def make_models():
    hp = Hyperparams(n_estimators=15)
    X2, y2 = training_data([211, 216])
    X1 = X2.copy()
    y1 = np.full(len(y2), 200)
    Xn, yn = training_data([300, 500], seed=1)
    level1 = train(np.vstack([X1, Xn]), np.concatenate([y1, yn]), hp=hp, seed=0,
                   level=1, compute_oob=False)
    level2 = train(X2, y2, hp=hp, seed=0, level=2, compute_oob=False)
    return level1, level2


def make_cube(class_grid: np.ndarray) -> DekadalCube:
    h, w = class_grid.shape
    values = np.zeros((36, 2, h, w), dtype=np.float32)
    for code, (vv, vh) in LEVELS.items():
        m = class_grid == code
        values[:, 0][:, m] = vv
        values[:, 1][:, m] = vh
    valid = np.ones((36, h, w), dtype=bool)
    geom = GridGeometry(width=w, height=h, pixel_size=10.0, origin_x=0.0, origin_y=h * 10.0)
    return DekadalCube(year=2018, bands=("VV_dB", "VH_dB"), geometry=geom,
                       values=values, valid=valid)


@pytest.fixture(scope="module")
def models():
    return make_models()


def class_grid():
    grid = np.zeros((8, 8), dtype=np.uint16)
    grid[:4, :4] = 211
    grid[:4, 4:] = 216
    grid[4:, :4] = 300
    grid[4:, 4:] = 500
    return grid


def test_two_phase_gating_and_composition(models):
    level1, level2 = models
    grid = class_grid()
    cube = make_cube(grid)
    strata = np.ones(grid.shape, dtype=np.uint8)
    cmap = classify_two_phase(cube, {1: level1}, {1: level2}, strata, cube.geometry, WINDOW)
    np.testing.assert_array_equal(cmap.classes, grid)
    # level-2 ran only on the pixels level-1 called arable
    assert cmap.provenance["level2_pixels"] == 32
    assert cmap.reported.all()


def test_no_level2_code_without_arable_level1(models):
    from sarcrop.legend import level1_of

    level1, level2 = models
    cube = make_cube(class_grid())
    strata = np.ones((8, 8), dtype=np.uint8)
    cmap = classify_two_phase(cube, {1: level1}, {1: level2}, strata, cube.geometry, WINDOW)
    for code in np.unique(cmap.classes[cmap.reported]):
        if level1_of(int(code)) == 200:
            assert int(code) != 200  # arable pixels always carry a level-2 code


def test_invalid_features_stay_unclassified(models):
    level1, level2 = models
    cube = make_cube(class_grid())
    cube.valid[2, 0, 0] = False  # one dekad missing at one pixel
    strata = np.ones((8, 8), dtype=np.uint8)
    cmap = classify_two_phase(cube, {1: level1}, {1: level2}, strata, cube.geometry, WINDOW)
    assert cmap.reason[0, 0] == REASON_NO_DATA
    assert not cmap.valid[0, 0]
    assert cmap.reported.sum() == 63


def test_stratum_gap_raises(models):
    level1, level2 = models
    cube = make_cube(class_grid())
    strata = np.full((8, 8), 2, dtype=np.uint8)
    with pytest.raises(PipelineError, match="stratum 2"):
        classify_two_phase(cube, {1: level1}, {1: level2}, strata, cube.geometry, WINDOW)


def test_model_window_mismatch_raises(models):
    level1, level2 = models
    cube = make_cube(class_grid())
    strata = np.ones((8, 8), dtype=np.uint8)
    with pytest.raises(PipelineError, match="features"):
        classify_two_phase(cube, {1: level1}, {1: level2}, strata, cube.geometry,
                           FeatureWindow(0, 5, ("VV_dB", "VH_dB")))


def test_tiled_classification_bit_identical(models):
    level1, level2 = models
    cube = make_cube(class_grid())
    strata = np.ones((8, 8), dtype=np.uint8)
    whole = classify_two_phase(cube, {1: level1}, {1: level2}, strata, cube.geometry, WINDOW)
    tiled = classify_two_phase(cube, {1: level1}, {1: level2}, strata, cube.geometry, WINDOW,
                               tile_rows=3, workers=4)
    np.testing.assert_array_equal(whole.classes, tiled.classes)
    np.testing.assert_array_equal(whole.reason, tiled.reason)
    assert whole.provenance["level2_pixels"] == tiled.provenance["level2_pixels"]


# --- slope ------------------------------------------------------------------

def test_slope_constant_dem_is_zero():
    np.testing.assert_allclose(compute_slope(np.full((6, 6), 250.0), 10.0), 0.0)


def test_slope_analytic_plane_one_in_ten():
    cols = np.arange(8, dtype=float)
    dem = np.tile(cols, (8, 1))  # rises 1 m per 10 m pixel in x
    slope = compute_slope(dem, 10.0)
    interior = slope[1:-1, 1:-1]
    np.testing.assert_allclose(interior, np.degrees(np.arctan(0.1)), atol=0.01)
    assert interior[0, 0] == pytest.approx(5.71, abs=0.01)


def test_slope_analytic_plane_two_in_ten_exceeds_limit():
    cols = np.arange(8, dtype=float) * 2.0
    slope = compute_slope(np.tile(cols, (8, 1)), 10.0)
    interior = slope[1:-1, 1:-1]
    np.testing.assert_allclose(interior, np.degrees(np.arctan(0.2)), atol=0.01)
    assert (interior > 10.0).all()
    assert interior[0, 0] == pytest.approx(11.31, abs=0.01)


def test_slope_diagonal_plane_uses_both_gradients():
    rows = np.arange(6, dtype=float)[:, None]
    cols = np.arange(6, dtype=float)[None, :]
    dem = rows * 1.0 + cols * 1.0
    slope = compute_slope(dem, 10.0)
    expected = np.degrees(np.arctan(np.hypot(0.1, 0.1)))
    np.testing.assert_allclose(slope[1:-1, 1:-1], expected, atol=0.01)


def test_slope_rejects_tiny_grid():
    with pytest.raises(PipelineError):
        compute_slope(np.zeros((2, 5)), 10.0)


# --- masks ------------------------------------------------------------------

def simple_map(h=6, w=6):
    geom = GridGeometry(width=w, height=h, pixel_size=10.0, origin_x=0.0, origin_y=h * 10.0)
    classes = np.full((h, w), 211, dtype=np.uint16)
    reason = np.zeros((h, w), dtype=np.uint8)
    return ClassifiedMap(geometry=geom, classes=classes, reason=reason)


def test_no_layers_infinite_limits_unchanged():
    cmap = simple_map()
    out = apply_masks(cmap, [], dem=np.full((6, 6), 2000.0), slope=np.full((6, 6), 45.0),
                      elevation_limit=np.inf, slope_limit=np.inf)
    np.testing.assert_array_equal(out.reason, cmap.reason)
    np.testing.assert_array_equal(out.classes, cmap.classes)


def test_terrain_is_conjunction():
    cmap = simple_map()
    dem = np.full((6, 6), 500.0)
    slope = np.full((6, 6), 5.0)
    dem[0, 0] = 1200.0; slope[0, 0] = 12.0   # high AND steep -> masked
    dem[0, 1] = 1200.0; slope[0, 1] = 5.0    # high only -> kept
    dem[0, 2] = 500.0;  slope[0, 2] = 12.0   # steep only -> kept
    out = apply_masks(cmap, [], dem=dem, slope=slope)
    assert out.reason[0, 0] == REASON_TERRAIN
    assert out.reason[0, 1] == REASON_NONE
    assert out.reason[0, 2] == REASON_NONE
    assert out.classes[0, 0] == 211  # class kept for audit


def test_terrain_exact_hand_enumerated_set():
    cmap = simple_map()
    dem = np.zeros((6, 6)); slope = np.zeros((6, 6))
    expected = {(1, 1), (2, 3), (4, 4)}
    for r, c in expected:
        dem[r, c] = 1500.0
        slope[r, c] = 20.0
    dem[5, 5] = 1500.0   # high but flat
    slope[0, 5] = 20.0   # steep but low
    out = apply_masks(cmap, [], dem=dem, slope=slope)
    got = {tuple(rc) for rc in np.argwhere(out.reason == REASON_TERRAIN)}
    assert got == expected


def test_aux_layers_take_their_reason_and_first_reason_wins():
    cmap = simple_map()
    water = np.zeros((6, 6), dtype=bool); water[0, :2] = True
    aux = np.zeros((6, 6), dtype=bool); aux[0, 1:3] = True
    layers = [
        MaskLayer("water", cmap.geometry, water),
        MaskLayer("auxiliary", cmap.geometry, aux),
    ]
    out = apply_masks(cmap, layers)
    assert out.reason[0, 0] == REASON_WATER
    assert out.reason[0, 1] == REASON_WATER      # overlap: first applied wins
    assert out.reason[0, 2] == REASON_AUXILIARY
    assert out.provenance["masks_applied"] == ["water", "auxiliary"]


def test_mask_idempotent_and_order_independent_for_disjoint():
    cmap = simple_map()
    water = np.zeros((6, 6), dtype=bool); water[1, 1] = True
    builtup = np.zeros((6, 6), dtype=bool); builtup[2, 2] = True
    lw = MaskLayer("water", cmap.geometry, water)
    lb = MaskLayer("builtup", cmap.geometry, builtup)
    once = apply_masks(cmap, [lw, lb])
    twice = apply_masks(once, [lw, lb])
    np.testing.assert_array_equal(once.reason, twice.reason)
    swapped = apply_masks(cmap, [lb, lw])
    np.testing.assert_array_equal(once.reason, swapped.reason)


def test_boolean_elevation_slope_layers_conjoin():
    cmap = simple_map()
    high = np.zeros((6, 6), dtype=bool); high[3, :2] = True
    steep = np.zeros((6, 6), dtype=bool); steep[3, 1:3] = True
    out = apply_masks(cmap, [
        MaskLayer("elevation", cmap.geometry, high),
        MaskLayer("slope", cmap.geometry, steep),
    ])
    assert out.reason[3, 1] == REASON_TERRAIN
    assert out.reason[3, 0] == REASON_NONE
    assert out.reason[3, 2] == REASON_NONE


def test_misaligned_layer_rejected():
    cmap = simple_map()
    other = GridGeometry(width=5, height=5)
    with pytest.raises(PipelineError):
        apply_masks(cmap, [MaskLayer("water", other, np.zeros((5, 5), dtype=bool))])


# --- census and IO ----------------------------------------------------------

def test_area_census_pixel_counting():
    cmap = simple_map()
    cmap.classes[0:2, :] = 216  # 12 pixels
    water = np.zeros((6, 6), dtype=bool); water[0, 0] = True
    out = apply_masks(cmap, [MaskLayer("water", cmap.geometry, water)])
    census = area_census(out)
    # one 10 m pixel = 0.01 ha; the masked pixel no longer counts
    assert census[216] == pytest.approx(11 * 0.01)
    assert census[211] == pytest.approx(24 * 0.01)


def test_map_round_trip(tmp_path):
    cmap = simple_map()
    cmap.classes[3, 3] = 216
    cmap.reason[1, 1] = REASON_WATER
    cmap.provenance["window"] = "0:3/VV_dB,VH_dB"
    save_map(cmap, tmp_path / "m")
    back = load_map(tmp_path / "m")
    np.testing.assert_array_equal(back.classes, cmap.classes)
    np.testing.assert_array_equal(back.reason, cmap.reason)
    assert back.geometry == cmap.geometry
    assert back.provenance["window"] == "0:3/VV_dB,VH_dB"


def test_classified_map_rejects_non_legend_codes():
    geom = GridGeometry(width=2, height=2)
    with pytest.raises(PipelineError):
        ClassifiedMap(geometry=geom, classes=np.full((2, 2), 123, np.uint16),
                      reason=np.zeros((2, 2), np.uint8))
