"""Feature standardization, PCA and 2-D projection export."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError

__all__ = [
    "PcaModel", "Standardizer", "pca_fit", "pca_transform", "pca_inverse",
    "standardize_fit", "standardize_apply", "export_2d", "read_2d",
]

STD_FLOOR = 1e-12


def _as_matrix(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ParameterError(f"expected a 2-D feature matrix, got shape {X.shape}")
    return X


@dataclass(frozen=True)
class Standardizer:
    """Training-set column statistics.

    Columns whose training std fell below the floor are degenerate: they are
    mapped to zero for any input, so values never seen during fitting cannot
    leak through them.
    """

    mean: np.ndarray
    std: np.ndarray
    degenerate: np.ndarray


def standardize_fit(X) -> Standardizer:
    X = _as_matrix(X)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    degenerate = std < STD_FLOOR
    return Standardizer(mean, np.maximum(std, STD_FLOOR), degenerate)


def standardize_apply(s: Standardizer, X):
    X = _as_matrix(X)
    if X.shape[1] != s.mean.size:
        raise ParameterError(f"feature width {X.shape[1]} != fitted width {s.mean.size}")
    Z = (X - s.mean) / s.std
    Z[:, s.degenerate] = 0.0
    return Z


@dataclass(frozen=True)
class PcaModel:
    """Principal axes of a centered feature matrix.

    Attributes
    ----------
    mean : (n_features,) ndarray
    components : (n_components, n_features) ndarray
        Orthonormal rows, by decreasing explained variance.
    explained_variance : (n_components,) ndarray
        Eigenvalues of the ``1/m`` covariance.
    total_variance : float
        Sum of all eigenvalues (total centered variance).
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    total_variance: float

    @property
    def n_components(self):
        return self.components.shape[0]


def pca_fit(X, n_components) -> PcaModel:
    """Fit PCA through an SVD of the centered data.

    The covariance is normalized by ``1/m``. Each component's largest-magnitude
    entry is made positive.
    """
    X = _as_matrix(X)
    m, n = X.shape
    k = int(n_components)
    if not 1 <= k <= min(m, n):
        raise ParameterError(f"n_components must be in [1, {min(m, n)}], got {k}")
    mean = X.mean(axis=0)
    _, s, Vt = np.linalg.svd(X - mean, full_matrices=False)
    eig = s ** 2 / m
    comps = Vt[:k]
    signs = np.sign(comps[np.arange(k), np.argmax(np.abs(comps), axis=1)])
    signs[signs == 0] = 1.0
    return PcaModel(mean, comps * signs[:, None], eig[:k], float(eig.sum()))


def pca_transform(model: PcaModel, X):
    X = _as_matrix(X)
    if X.shape[1] != model.mean.size:
        raise ParameterError(f"feature width {X.shape[1]} != fitted width {model.mean.size}")
    return (X - model.mean) @ model.components.T


def pca_inverse(model: PcaModel, Z):
    """Map reduced coordinates back to feature space."""
    return model.mean + np.asarray(Z, dtype=np.float64) @ model.components


def export_2d(model: PcaModel, X, labels, path):
    """Write the 2-D PCA projection of ``X`` as ``x,y,label`` CSV."""
    if model.n_components != 2:
        raise ParameterError(f"export needs a 2-component model, got {model.n_components}")
    Z = pca_transform(model, X)
    labels = np.asarray(labels)
    if labels.shape[0] != Z.shape[0]:
        raise ParameterError(f"{labels.shape[0]} labels for {Z.shape[0]} rows")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "label"])
        for (x, y), lab in zip(Z, labels):
            w.writerow([repr(float(x)), repr(float(y)), int(lab)])


def read_2d(path):
    """Read a file written by :func:`export_2d`; returns ``(coords, labels)``."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["x", "y", "label"]:
        raise ParameterError(f"{path}: missing x,y,label header")
    body = rows[1:]
    coords = np.array([[float(r[0]), float(r[1])] for r in body]).reshape(-1, 2)
    labels = np.array([int(r[2]) for r in body], dtype=np.int64)
    return coords, labels
