"""Synthetic scenario tour: seasonal signatures and the committed test scene.

Plots the per-crop VV/VH curves (with the southern-stratum time shift) and
renders the 64x64 committed scenario's truth map. Writes PNGs next to this
script when matplotlib is available, otherwise prints summaries only.

    python3 demos/02_synthetic_scenario.py
"""

from pathlib import Path

import numpy as np

from sarcrop import synth
from sarcrop.grids import DEKADS_PER_YEAR

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# ---------------------------------------------------------------------------
# 1. Default signatures: 12 crops, staggered onsets, unique amplitude pairs.
# ---------------------------------------------------------------------------
signatures = synth.default_signatures(noise_sigma_db=1.5)
print(f"{len(signatures)} crop signatures; onsets by crop:")
for code in sorted(signatures, key=lambda c: signatures[c].vv.onset_dekad):
    sig = signatures[code]
    print(f"  {code}: onset dekad {sig.vv.onset_dekad:>4.1f}, "
          f"amplitudes VV {sig.vv.amplitude_db:+.1f} dB / VH {sig.vh.amplitude_db:+.1f} dB, "
          f"southern shift {sig.stratum2_shift_dekads:+.1f} dekads")

t = np.arange(DEKADS_PER_YEAR)
try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(3, 4, figsize=(16, 9), sharex=True, sharey=True)
    for ax, code in zip(axes.ravel(), sorted(signatures)):
        sig = signatures[code]
        ax.plot(t, sig.curve_values("VV_dB", 1), label="VV north", color="tab:blue")
        ax.plot(t, sig.curve_values("VH_dB", 1), label="VH north", color="tab:orange")
        ax.plot(t, sig.curve_values("VV_dB", 2), "--", color="tab:blue", alpha=0.6, label="VV south")
        ax.plot(t, sig.curve_values("VH_dB", 2), "--", color="tab:orange", alpha=0.6, label="VH south")
        ax.set_title(str(code))
        ax.set_ylim(-25, -3)
    axes[0, 0].legend(fontsize=7)
    fig.suptitle("Seasonal backscatter signatures (solid: north, dashed: south)")
    fig.supxlabel("dekad")
    fig.supylabel("dB")
    fig.tight_layout()
    fig.savefig(OUT / "signatures.png", dpi=110)
    print(f"wrote {OUT / 'signatures.png'}")
except ImportError:
    print("matplotlib not available; skipping the curve plot")

# ---------------------------------------------------------------------------
# 2. The committed scenario: 81 parcels on a 64x64 grid, two strata.
# ---------------------------------------------------------------------------
scenario = synth.desk_scenario()
cube, polygons, truth = synth.generate(scenario)
print(f"\ncommitted scenario: {len(scenario.parcels)} parcels, "
      f"{(truth > 0).sum()} labeled pixels, noise 1.5 dB")
print(f"stratum boundary at pixel column {scenario.stratum_boundary_col} "
      f"(west: stratum 1, east: stratum 2)")
counts = {}
for p in scenario.parcels:
    counts[p.code] = counts.get(p.code, 0) + 1
print("parcels per class:", dict(sorted(counts.items())))

try:
    import matplotlib.pyplot as plt

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(12, 5))
    ax1.imshow(np.where(truth > 0, truth, np.nan), cmap="tab20", interpolation="nearest")
    ax1.axvline(scenario.stratum_boundary_col - 0.5, color="k", lw=1)
    ax1.set_title("truth map (classes; line = stratum boundary)")
    ax2.imshow(cube.values[15, 0], cmap="gray", interpolation="nearest")
    ax2.set_title("VV composite, dekad 15 (early June)")
    fig.tight_layout()
    fig.savefig(OUT / "scenario.png", dpi=110)
    print(f"wrote {OUT / 'scenario.png'}")
except ImportError:
    pass
