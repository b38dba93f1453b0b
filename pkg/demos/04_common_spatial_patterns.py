# # Common spatial patterns
#
# CSP solves A1 l = w A2 l for the two class-average covariances. Filters at
# the top of the spectrum maximize class 1 variance relative to class 2 and
# those at the bottom do the opposite, so the log-variance of filtered trials
# is a compact two-class feature.

import numpy as np

from isdecode import (NearestClassMean, SynthSpec, class_covariances, csp_fit, synth_trialset,
                      trial_covariances, variance_features)

ts = synth_trialset(SynthSpec(n_classes=2, trials_per_class=60, n_channels=8, seed=4,
                              mixing_strength=0.3))
covs = trial_covariances(ts.data)
A1, A2 = class_covariances(covs, ts.labels)

filters = csp_fit(A1, A2, n_filters=4)
print("generalized eigenvalues:", np.round(filters.eigenvalues, 3))

# Every filter is scaled so that l.T A2 l = 1.
print("normalization:", np.round(np.einsum("ij,jk,ik->i", filters.L, A2, filters.L), 6))

F = variance_features(ts, filters, log_scale=True)
half = ts.n_trials // 2
order = np.random.default_rng(0).permutation(ts.n_trials)
train, test = order[:half], order[half:]
# Fitting CSP on all trials leaks label information into the test half. The
# cross-validation driver refits it per fold; here we only look at the shape.
clf = NearestClassMean().fit(F[train], ts.labels[train])
print("held-out accuracy (optimistic):", np.mean(clf.predict(F[test]) == ts.labels[test]))
