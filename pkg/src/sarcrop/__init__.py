"""SAR time-series crop-type mapping at desk scale.

Pipeline stages: dekadal compositing of backscatter scenes, labeled-sample
extraction through reference polygons, two-strata two-phase random-forest
classification, post-classification masking, and a three-tier accuracy
assessment (stratified area-weighted estimators, parcel-majority
comparison, zonal area checks) plus hindcast/feature-set benchmarks.
"""

__version__ = "0.1.0"

from . import assess, forest, grids, legend, pipeline, sampling, synth  # noqa: F401
