"""Two-strata, two-phase classification on the committed synthetic scene.

Trains the four forests (level 1 and level 2 per stratum), classifies the
cube hierarchically, applies a terrain mask, and scores against the truth
map. Everything is seeded, so repeated runs print identical numbers.

    python3 demos/03_two_phase_classification.py
"""

import numpy as np

from sarcrop import legend, synth
from sarcrop.assess import count_metrics, fscore
from sarcrop.forest import Hyperparams, train
from sarcrop.grids import FeatureWindow
from sarcrop.pipeline import apply_masks, area_census, classify_two_phase, compute_slope
from sarcrop.sampling import extract_samples, sample_census

scenario = synth.desk_scenario()
cube, polygons, truth = synth.generate(scenario)
window = FeatureWindow(0, 21, ("VV_dB", "VH_dB"))  # January..July, VV+VH

# ---------------------------------------------------------------------------
# 1. Extract per-pixel training samples and show the census table shape.
# ---------------------------------------------------------------------------
samples = extract_samples(cube, polygons, window)
print(f"{len(samples)} training pixels from {len(polygons)} polygons")
print("class stratum polygons pixels (first rows of the census):")
for row in sample_census(samples)[:6]:
    print("  {:>4} {:>7} {:>8} {:>6}".format(*row))

# ---------------------------------------------------------------------------
# 2. Train 2 strata x 2 levels. Level 1 sees broad classes; level 2 is
#    trained on arable pixels only.
# ---------------------------------------------------------------------------
hp = Hyperparams(n_estimators=60)
level1, level2 = {}, {}
for stratum in (1, 2):
    sub = samples.subset(samples.strata == stratum)
    broad = np.array([legend.level1_of(int(c)) for c in sub.labels])
    level1[stratum] = train(sub.features, broad, hp=hp, seed=11,
                            level=1, stratum=stratum, compute_oob=False)
    arable = broad == 200
    level2[stratum] = train(sub.features[arable], sub.labels[arable], hp=hp,
                            seed=12, level=2, stratum=stratum, compute_oob=False)
    print(f"stratum {stratum}: level-1 classes {level1[stratum].classes.tolist()}, "
          f"level-2 {len(level2[stratum].classes)} crop types")

# ---------------------------------------------------------------------------
# 3. Classify. Level 2 only runs where level 1 said "arable".
# ---------------------------------------------------------------------------
cmap = classify_two_phase(cube, level1, level2, scenario.stratum_values(),
                          scenario.geometry, window)
total_classified = int(cmap.reported.sum())
print(f"\nclassified {total_classified} pixels; "
      f"level-2 invoked on {cmap.provenance['level2_pixels']} "
      f"({cmap.provenance['level2_pixels'] / total_classified:.0%} of them)")

# ---------------------------------------------------------------------------
# 4. Terrain mask: elevation > 1000 m AND slope > 10 degrees.
# ---------------------------------------------------------------------------
dem = np.zeros(scenario.geometry.shape)
cols = np.arange(scenario.geometry.width, dtype=float)
dem[:8, :] = 1200.0 + 5.0 * cols  # high, steep mountain flank across the top
slope = compute_slope(dem, scenario.geometry.pixel_size)
masked = apply_masks(cmap, [], dem=dem, slope=slope,
                     elevation_limit=1000.0, slope_limit=10.0)
print(f"terrain-masked pixels: {(masked.reason == 2).sum()} "
      f"(high AND steep; flat or low ground is kept)")

# ---------------------------------------------------------------------------
# 5. Score against the truth map.
# ---------------------------------------------------------------------------
labeled = (truth > 0) & masked.reported
classes = sorted(np.unique(truth[truth > 0]).tolist())
index = {c: i for i, c in enumerate(classes)}
counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
for m, t in zip(masked.classes[labeled], truth[labeled]):
    counts[index[int(m)], index[int(t)]] += 1
print(f"\noverall accuracy vs truth: {count_metrics(counts)['oa']:.4f}")
print("per-crop F-scores:")
for code in synth.MAIN_CROPS:
    print(f"  {code}: {fscore(counts, classes, code):.3f}")

census = area_census(masked)
print("\npixel-counting area census (hectares, 1 px = 0.01 ha):")
for code, ha in sorted(census.items()):
    print(f"  {code}: {ha:8.2f} ha")
