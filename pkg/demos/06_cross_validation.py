# # End-to-end cross-validation
#
# A pipeline goes from trials to tangent features, standardization, PCA and a
# bagged network. Every fitted piece, including the reference covariance for
# the tangent map, is refitted inside each training fold.
#
# The run below is a lighter version of the synthetic gate in the acceptance
# suite, so it finishes in a few seconds.

import tempfile
from pathlib import Path

import numpy as np

from isdecode import (BaggingSpec, FeatureSpec, PipelineSpec, SynthSpec, TrainConfig,
                      cross_validate, export_2d, mean_covariance, pca_fit, read_2d,
                      synth_trialset, tangent_features, trial_covariances)

ts = synth_trialset(SynthSpec(n_classes=2, trials_per_class=80, n_channels=8, seed=7,
                              mixing_strength=0.06))
spec = PipelineSpec(features=FeatureSpec("tangent"), pca=10,
                    classifier=TrainConfig(hidden=50, epochs=40), bagging=BaggingSpec(5), seed=1)
report = cross_validate(ts, spec, k=5)

print("fold accuracies:", np.round(report.fold_accuracies, 3))
print("summary:", report.table1, "chance:", report.chance_level, "auc:", round(report.auc, 3))
print("confusion:\n", report.confusion)

# Each fold kept its own reference covariance.
means = [fr.artifacts["covariance_mean"] for fr in report.folds]
print("fold 0 vs fold 1 reference differ by", round(float(np.abs(means[0] - means[1]).max()), 5))

# ## Feature-space picture
#
# For plotting, tangent features of all trials go through a 2-component PCA and
# land in a small CSV.

covs = trial_covariances(ts.data)
F = tangent_features(covs, mean_covariance(covs))
path = Path(tempfile.mkdtemp()) / "points.csv"
export_2d(pca_fit(F, 2), F, ts.labels, path)
coords, labels = read_2d(path)
for c in range(ts.n_classes):
    print(f"class {c} centroid:", np.round(coords[labels == c].mean(axis=0), 3))
