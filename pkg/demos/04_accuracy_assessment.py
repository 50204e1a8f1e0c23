"""Three-tier accuracy assessment on the synthetic map.

Tier 1: stratified area-weighted estimates from reference points
        (area proportions, UA/PA/OA with confidence-scaled SEs).
Tier 2: parcel-majority comparison against declared crops.
Tier 3: zonal pixel-counted areas vs reported statistics (Pearson r,
        relative differences).

    python3 demos/04_accuracy_assessment.py
"""

import numpy as np

from sarcrop import legend, synth
from sarcrop.assess import (
    ParcelRecord,
    RefPoint,
    RegionAreaPair,
    StratifiedConfusion,
    bootstrap_accuracy_se,
    confusion_from_points,
    parcel_majority,
    stratified_accuracy,
    zonal_area_compare,
)
from sarcrop.forest import Hyperparams, train
from sarcrop.grids import FeatureWindow
from sarcrop.pipeline import area_census, classify_two_phase
from sarcrop.sampling import extract_samples

rng = np.random.default_rng(7)

# --- build a classified map (same recipe as demo 03, smaller forests) -------
scenario = synth.desk_scenario()
cube, polygons, truth = synth.generate(scenario)
window = FeatureWindow(0, 21, ("VV_dB", "VH_dB"))
samples = extract_samples(cube, polygons, window)
hp = Hyperparams(n_estimators=40)
level1, level2 = {}, {}
for stratum in (1, 2):
    sub = samples.subset(samples.strata == stratum)
    broad = np.array([legend.level1_of(int(c)) for c in sub.labels])
    level1[stratum] = train(sub.features, broad, hp=hp, seed=1, compute_oob=False)
    level2[stratum] = train(sub.features[broad == 200], sub.labels[broad == 200],
                            hp=hp, seed=2, compute_oob=False)
cmap = classify_two_phase(cube, level1, level2, scenario.stratum_values(),
                          scenario.geometry, window)

# ---------------------------------------------------------------------------
# Tier 1: reference points -> stratified area-weighted accuracy.
# Weights default to mapped-area proportions from the map itself.
# ---------------------------------------------------------------------------
rows, cols = np.nonzero(truth > 0)
pick = rng.choice(len(rows), size=250, replace=False)
points = []
for i in pick:
    x, y = scenario.geometry.pixel_center(rows[i], cols[i])
    code = int(truth[rows[i], cols[i]])
    if rng.random() < 0.08:  # sprinkle disagreement so the matrix is not diagonal
        code = int(rng.choice([c for c in (211, 213, 500) if c != code]))
    points.append(RefPoint(float(x), float(y), code))

classes, counts, excluded = confusion_from_points(cmap, points)
conf = StratifiedConfusion.from_mapped_areas(classes, counts, area_census(cmap))
report = stratified_accuracy(conf, confidence=0.95)
print(f"tier 1: {len(points)} points, {excluded} excluded")
print(f"  area-weighted OA = {report.oa:.3f} +/- {report.se_oa:.3f} (95%)")
print("  class     UA+/-SE         PA+/-SE")
for i, code in enumerate(classes[:8]):
    print(f"   {code:>4}  {report.ua[i]:.3f}+/-{report.se_ua[i]:.3f}   "
          f"{report.pa[i]:.3f}+/-{report.se_pa[i]:.3f}")
boot = bootstrap_accuracy_se(conf, n_resamples=2000, seed=0)
print(f"  bootstrap check: analytic 1-sigma OA SE {report.se_oa / report.z:.4f} "
      f"vs resampled {boot['oa']:.4f}")

# ---------------------------------------------------------------------------
# Tier 2: parcel majority vote vs declared crops (two fake regions).
# ---------------------------------------------------------------------------
parcels = []
for p in scenario.parcels:
    ring = synth._parcel_ring(scenario.geometry, p)
    region = "west" if p.stratum == 1 else "east"
    declared = p.code
    if p.pid % 17 == 0:  # a few wrong declarations
        declared = 213 if p.code != 213 else 216
    parcels.append(ParcelRecord(p.pid, region, str(declared), ring))
results = parcel_majority(cmap, parcels, mapping=None, min_area_share=0.01)
print("\ntier 2: parcel-majority comparison")
for region, res in results.items():
    diag = np.trace(res.counts)
    print(f"  {region}: {res.parcels_used} parcels, {diag} modal agreements, "
          f"{res.parcels_excluded} excluded, dropped classes {res.dropped_classes}")

# ---------------------------------------------------------------------------
# Tier 3: zonal areas vs 'reported' statistics (truth-derived, oracle-exact).
# ---------------------------------------------------------------------------
regions = np.zeros(scenario.geometry.shape, dtype=np.uint8)
regions[:, :22] = 1
regions[:, 22:43] = 2
regions[:, 43:] = 3
names = {1: "R1", 2: "R2", 3: "R3"}
px_kha = scenario.geometry.pixel_area_ha / 1000.0
reported = []
for rid, name in names.items():
    for code in (211, 216, 232):
        true_area = float(((truth == code) & (regions == rid)).sum()) * px_kha
        reported.append(RegionAreaPair(name, code, true_area))
res = zonal_area_compare(cmap, regions, names, reported)
print("\ntier 3: zonal comparison against truth-derived reported areas")
for code in (211, 216, 232):
    print(f"  crop {code}: Pearson r = {res.pearson_r[code]:.4f}")
worst = max(res.relative_diff_pct.items(), key=lambda kv: abs(kv[1]))
print(f"  largest relative difference: {worst[1]:+.2f}% at {worst[0]}")
