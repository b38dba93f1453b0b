"""Spatial covariance estimation and Common Spatial Patterns."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .dataset import TrialSet
from .errors import DataError, NotPositiveDefiniteError, ParameterError
from .riemann import check_spd

__all__ = [
    "CspFilters", "trial_covariance", "trial_covariances", "class_covariances",
    "csp_fit", "csp_transform", "variance_features",
]

LOG_FLOOR = 1e-300


def _shrink(C, shrinkage):
    c = C.shape[-1]
    mu = np.trace(C, axis1=-2, axis2=-1)[..., None, None] / c
    C = (1 - shrinkage) * C + shrinkage * mu * np.eye(c)
    return 0.5 * (C + np.swapaxes(C, -1, -2))


def trial_covariances(X, shrinkage=0.05):
    """Shrunk sample covariance for each trial of ``X``.

    Parameters
    ----------
    X : (n_trials, n_channels, n_samples) array_like
    shrinkage : float in [0, 1]
        ``C <- (1 - s) C + s * trace(C) / c * I``.

    Returns
    -------
    (n_trials, n_channels, n_channels) ndarray

    Raises
    ------
    NotPositiveDefiniteError
        If any result is not positive definite.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if not 0 <= shrinkage <= 1:
        raise ParameterError(f"shrinkage must be in [0, 1], got {shrinkage}")
    t = X.shape[-1]
    if t < 2:
        raise ParameterError("covariance needs at least 2 samples")
    Xc = X - X.mean(axis=-1, keepdims=True)
    C = _shrink(Xc @ np.swapaxes(Xc, -1, -2) / (t - 1), shrinkage)
    w = np.linalg.eigvalsh(C)
    smallest = w[..., 0]
    # eigenvalues at rounding level relative to the spectrum count as zero
    if not np.all(smallest > 1e-12 * np.maximum(w[..., -1], np.finfo(float).tiny)):
        raise NotPositiveDefiniteError(
            "trial covariance is not positive definite; "
            "the trial is rank deficient (use shrinkage > 0 on a nonzero trial)")
    return C


def trial_covariance(trial, shrinkage=0.05):
    """Covariance of one ``(n_channels, n_samples)`` trial; see :func:`trial_covariances`."""
    trial = np.asarray(trial, dtype=np.float64)
    if trial.ndim != 2:
        raise ParameterError(f"expected a (channels, samples) trial, got shape {trial.shape}")
    return trial_covariances(trial[None], shrinkage)[0]


def class_covariances(covs, labels, classes=None):
    """Arithmetic mean covariance per class, stacked in class order."""
    covs = np.asarray(covs, dtype=np.float64)
    labels = np.asarray(labels)
    if classes is None:
        classes = np.unique(labels)
    out = []
    for c in classes:
        sel = labels == c
        if not sel.any():
            raise ParameterError(f"class {c} has no covariance matrices")
        out.append(covs[sel].mean(axis=0))
    return np.stack(out)


@dataclass(frozen=True)
class CspFilters:
    """CSP spatial filters.

    Attributes
    ----------
    L : (j, c) ndarray
        One filter per row, normalized so ``l.T @ A2 @ l = 1``.
    eigenvalues : (j,) ndarray
        Generalized eigenvalues, descending.
    """

    L: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n_filters(self):
        return self.L.shape[0]

    @property
    def n_channels(self):
        return self.L.shape[1]


def csp_fit(A1, A2, n_filters=None):
    """Solve ``A1 l = w A2 l`` for CSP filters.

    ``A2`` is Cholesky-factored as ``R R.T``; the symmetric problem
    ``R^-1 A1 R^-T u = w u`` is then solved and ``l = R^-T u``. When
    ``n_filters < c`` the filters with the ``n_filters / 2`` largest and
    ``n_filters / 2`` smallest eigenvalues are kept.

    Each filter's sign is fixed so its largest-magnitude entry is positive.
    """
    A1 = check_spd(A1)
    A2 = check_spd(A2)
    if A1.ndim != 2 or A1.shape != A2.shape:
        raise ParameterError(f"dimension mismatch: {A1.shape} vs {A2.shape}")
    c = A1.shape[0]
    j = c if n_filters is None else int(n_filters)
    if not 1 <= j <= c:
        raise ParameterError(f"n_filters must be in [1, {c}], got {j}")
    if j < c and j % 2:
        raise ParameterError("n_filters must be even when fewer than all filters are kept")
    R = np.linalg.cholesky(A2)
    Ri_A1 = solve_triangular(R, A1, lower=True)
    M = solve_triangular(R, Ri_A1.T, lower=True)
    M = 0.5 * (M + M.T)
    w, U = np.linalg.eigh(M)
    w, U = w[::-1], U[:, ::-1]
    L = solve_triangular(R.T, U, lower=False).T
    if j < c:
        keep = np.r_[np.arange(j // 2), np.arange(c - j // 2, c)]
        w, L = w[keep], L[keep]
    rows = np.arange(L.shape[0])
    signs = np.sign(L[rows, np.argmax(np.abs(L), axis=1)])
    return CspFilters(L * signs[:, None], w)


def csp_transform(trial, filters: CspFilters):
    """Apply the filters: ``(c, t)`` -> ``(j, t)``. Stacks of trials also work."""
    trial = np.asarray(trial, dtype=np.float64)
    if trial.shape[-2] != filters.n_channels:
        raise ParameterError(
            f"trial has {trial.shape[-2]} channels, filters expect {filters.n_channels}")
    return filters.L @ trial


def variance_features(ts, filters: CspFilters, log_scale=False):
    """Variance of each CSP-filtered channel, one row per trial.

    ``ts`` may be a TrialSet or a raw ``(n_trials, c, t)`` array. Variances
    use the unbiased estimator. With ``log_scale`` the natural log is taken;
    zero variances are floored at 1e-300 with a RuntimeWarning.
    """
    data = ts.data if isinstance(ts, TrialSet) else np.asarray(ts, dtype=np.float64)
    if data.ndim != 3:
        raise DataError(f"expected (trials, channels, samples), got {data.shape}")
    var = np.var(csp_transform(data, filters), axis=-1, ddof=1)
    if not log_scale:
        return var
    if np.any(var < LOG_FLOOR):
        warnings.warn("zero-variance CSP channel; log feature floored", RuntimeWarning,
                      stacklevel=2)
        var = np.maximum(var, LOG_FLOOR)
    return np.log(var)
