# # Covariance matrices in tangent space
#
# Trial covariances are symmetric positive definite. We average them with the
# affine-invariant (geometric) mean, map every trial to the tangent space at
# that mean and flatten the upper triangle. Off-diagonal entries are scaled by
# sqrt(2) so Euclidean distances between vectors match the tangent norm.

import numpy as np

from isdecode import (SynthSpec, distance_riemann, mean_covariance, synth_trialset,
                      tangent_features, tangent_project, trial_covariances, vectorize_tangent)

ts = synth_trialset(SynthSpec(n_classes=2, trials_per_class=30, n_channels=6, seed=2))
covs = trial_covariances(ts.data, shrinkage=0.05)

Cm, info = mean_covariance(covs, return_info=True)
print("fixed point converged in", info["n_iter"], "iterations")

# The geometric mean minimizes the summed squared Riemannian distance, so it
# should beat the arithmetic mean on that score.
arith = covs.mean(axis=0)
for name, M in (("geometric", Cm), ("arithmetic", arith)):
    print(f"{name:>10}: {np.sum(distance_riemann(covs, M) ** 2):.4f}")

print("projection of the mean onto itself:", np.abs(tangent_project(Cm, Cm)).max())

F = tangent_features(covs, Cm)
print("feature width for 6 channels:", F.shape[1])
print("feature width for 60 channels:", vectorize_tangent(np.eye(60)).size)

# Class means in tangent space are already apart for this generator.
d = np.linalg.norm(F[ts.labels == 0].mean(0) - F[ts.labels == 1].mean(0))
print("distance between class centroids:", round(float(d), 3))
