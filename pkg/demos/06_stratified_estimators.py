"""Stratified area-weighted estimators, step by step.

Shows how sample counts and mapped-area weights combine into area
proportions, why UA is weight-free while PA and OA are not, how the
estimator collapses to plain count metrics under proportional weights,
and how the analytic standard errors line up with a resampling check.

    python3 demos/06_stratified_estimators.py
"""

import numpy as np

from sarcrop.assess import (
    StratifiedConfusion,
    bootstrap_accuracy_se,
    count_metrics,
    stratified_accuracy,
)

# A small three-class example: rows = mapped class, columns = reference.
# The third class is rare in the sample but dominates the mapped area.
classes = [211, 216, 500]
counts = np.array([
    [90, 10, 5],
    [8, 120, 2],
    [2, 3, 45],
])
areas = {211: 1_000.0, 216: 1_500.0, 500: 12_000.0}

print("sample counts (rows: map, cols: reference):")
print(counts)
m = count_metrics(counts)
print(f"\nplain count metrics: OA {m['oa']:.4f}, UA {np.round(m['ua'], 3)}, "
      f"PA {np.round(m['pa'], 3)}")

# ---------------------------------------------------------------------------
# Area weighting: p[i][j] = W[i] * n[i][j] / n[i.]. The grassland stratum
# is undersampled relative to its area, so weighting pulls OA toward its
# (high) accuracy and shifts PA where off-diagonal mass sits.
# ---------------------------------------------------------------------------
conf = StratifiedConfusion.from_mapped_areas(classes, counts, areas)
report = stratified_accuracy(conf, confidence=0.95)
print(f"\nmapped-area weights: {np.round(conf.weights, 4)}")
print("area-proportion matrix (each row sums to its weight):")
print(np.round(report.proportions, 4))
print(f"weighted OA {report.oa:.4f} vs count OA {m['oa']:.4f}")
print(f"weighted PA {np.round(report.pa, 3)} vs count PA {np.round(m['pa'], 3)}")
print(f"UA is weight-free: {np.allclose(report.ua, m['ua'])}")

# ---------------------------------------------------------------------------
# Collapse: proportional weights make the weighted estimators identical to
# the count-based ones.
# ---------------------------------------------------------------------------
prop = stratified_accuracy(StratifiedConfusion.proportional(classes, counts))
print(f"\nproportional weights collapse: "
      f"|OA diff| = {abs(prop.oa - m['oa']):.2e}, "
      f"max |PA diff| = {np.nanmax(np.abs(prop.pa - m['pa'])):.2e}")

# ---------------------------------------------------------------------------
# Standard errors: analytic vs 10k-resample bootstrap (rows resampled as
# multinomials with their sample sizes fixed). Reported SEs carry the
# 95% z factor; the bootstrap works at 1 sigma.
# ---------------------------------------------------------------------------
boot = bootstrap_accuracy_se(conf, n_resamples=10_000, seed=0)
print(f"\nOA standard error: analytic {report.se_oa / report.z:.4f} (1 sigma), "
      f"bootstrap {boot['oa']:.4f}")
for i, code in enumerate(classes):
    print(f"UA({code}) SE: analytic {report.se_ua[i] / report.z:.4f}, "
          f"bootstrap {boot['ua'][i]:.4f}")
print(f"\nreported at 95% confidence (z = {report.z:.4f}): "
      f"OA {report.oa:.4f} +/- {report.se_oa:.4f}")
