"""SPD matrix functions, covariance means and tangent-space projection.

Every function accepts a single ``(n, n)`` matrix or a stack ``(..., n, n)``.
All matrix functions go through one symmetric eigendecomposition.
"""
from __future__ import annotations

import warnings

import numpy as np

from .errors import ConvergenceWarning, NotPositiveDefiniteError, ParameterError

__all__ = [
    "check_symmetric", "check_spd", "spd_eigh", "spd_func",
    "logm", "expm", "sqrtm", "invsqrtm", "invm",
    "mean_covariance", "tangent_project", "tangent_unproject",
    "vectorize_tangent", "unvectorize_tangent", "tangent_features",
    "distance_riemann",
]

_FUNCS = {
    "log": np.log,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "invsqrt": lambda w: 1.0 / np.sqrt(w),
    "inv": lambda w: 1.0 / w,
}


def check_symmetric(C, tol=1e-10):
    """Raise ParameterError unless ``C`` is square and symmetric to ``tol * max|C|``."""
    C = np.asarray(C, dtype=np.float64)
    if C.ndim < 2 or C.shape[-1] != C.shape[-2]:
        raise ParameterError(f"expected square matrices, got shape {C.shape}")
    scale = np.max(np.abs(C)) if C.size else 0.0
    if np.max(np.abs(C - np.swapaxes(C, -1, -2)), initial=0.0) > tol * max(scale, np.finfo(float).tiny):
        raise ParameterError("matrix is not symmetric")
    return C


def check_spd(C, tol=1e-10):
    """Validate symmetry and positive definiteness; return ``C`` as float64."""
    C = check_symmetric(C, tol)
    w = np.linalg.eigvalsh(C)
    if not np.all(w[..., 0] > 0):
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite (smallest eigenvalue {np.min(w[..., 0]):.3g})")
    return C


def spd_eigh(C):
    """Eigenvalues in descending order and matching orthonormal eigenvectors.

    Returns
    -------
    w : (..., n) ndarray
    V : (..., n, n) ndarray
        Columns are eigenvectors, ``C = V @ diag(w) @ V.T``.
    """
    C = check_symmetric(C)
    w, V = np.linalg.eigh(C)
    return w[..., ::-1], V[..., ::-1]


def spd_func(C, func):
    """Apply a scalar function to the eigenvalues of a symmetric matrix.

    Parameters
    ----------
    C : (..., n, n) array_like
        SPD matrices; any symmetric matrix is accepted for ``"exp"``.
    func : {"log", "exp", "sqrt", "invsqrt", "inv"}

    Returns
    -------
    (..., n, n) ndarray
        ``V @ diag(func(w)) @ V.T``, exactly symmetric.
    """
    try:
        f = _FUNCS[func]
    except KeyError:
        raise ParameterError(f"unknown matrix function {func!r}") from None
    w, V = spd_eigh(C)
    if func != "exp" and not np.all(w > 0):
        raise NotPositiveDefiniteError(
            f"{func}m needs positive eigenvalues (smallest {np.min(w):.3g})")
    out = (V * f(w)[..., None, :]) @ np.swapaxes(V, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def logm(C):
    return spd_func(C, "log")


def expm(C):
    return spd_func(C, "exp")


def sqrtm(C):
    return spd_func(C, "sqrt")


def invsqrtm(C):
    return spd_func(C, "invsqrt")


def invm(C):
    return spd_func(C, "inv")


def _congruence(A, C):
    out = A @ C @ np.swapaxes(A, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def mean_covariance(covs, mode="geometric", tol=1e-8, max_iter=50, return_info=False):
    """Mean of a set of SPD matrices.

    Parameters
    ----------
    covs : (n_matrices, n, n) array_like
    mode : {"geometric", "arithmetic"}
        ``"geometric"`` is the affine-invariant Frechet mean computed by the
        fixed-point iteration
        ``C <- C^1/2 expm(mean_i logm(C^-1/2 C_i C^-1/2)) C^1/2``
        started at the arithmetic mean.
    tol : float
        Stop once the Frobenius norm of the mean tangent step is <= tol.
    max_iter : int
    return_info : bool
        Also return ``{"n_iter", "step_norm", "converged"}``.

    Warns
    -----
    ConvergenceWarning
        When ``max_iter`` is reached; the last iterate is returned.
    """
    covs = np.asarray(covs, dtype=np.float64)
    if covs.ndim == 2:
        covs = covs[None]
    if covs.ndim != 3 or covs.shape[0] == 0:
        raise ParameterError("need a non-empty stack of square matrices")
    check_spd(covs)
    C = 0.5 * (covs.mean(axis=0) + covs.mean(axis=0).T)
    info = {"n_iter": 0, "step_norm": 0.0, "converged": True}
    if mode == "arithmetic" or covs.shape[0] == 1:
        if mode not in ("arithmetic", "geometric"):
            raise ParameterError(f"unknown mean mode {mode!r}")
        return (C, info) if return_info else C
    if mode != "geometric":
        raise ParameterError(f"unknown mean mode {mode!r}")
    info["converged"] = False
    for it in range(1, int(max_iter) + 1):
        w, V = spd_eigh(C)
        half = (V * np.sqrt(w)) @ V.T
        ihalf = (V / np.sqrt(w)) @ V.T
        step = logm(_congruence(ihalf, covs)).mean(axis=0)
        C = _congruence(half, expm(step))
        norm = float(np.linalg.norm(step))
        info.update(n_iter=it, step_norm=norm)
        if norm <= tol:
            info["converged"] = True
            break
    if not info["converged"]:
        warnings.warn(f"geometric mean did not converge in {max_iter} iterations "
                      f"(last step norm {info['step_norm']:.3g})", ConvergenceWarning,
                      stacklevel=2)
    return (C, info) if return_info else C


def tangent_project(C, Cm, whitened=False):
    """Project SPD matrices onto the tangent space at ``Cm``.

    ``P = Cm^1/2 logm(Cm^-1/2 C Cm^-1/2) Cm^1/2``. With ``whitened=True`` the
    outer congruence by ``Cm^1/2`` is dropped, giving
    ``logm(Cm^-1/2 C Cm^-1/2)``.
    """
    Cm = check_spd(Cm)
    w, V = spd_eigh(Cm)
    ihalf = (V / np.sqrt(w)) @ V.T
    P = logm(_congruence(ihalf, np.asarray(C, dtype=np.float64)))
    if whitened:
        return P
    half = (V * np.sqrt(w)) @ V.T
    return _congruence(half, P)


def tangent_unproject(P, Cm, whitened=False):
    """Inverse of :func:`tangent_project`."""
    Cm = check_spd(Cm)
    w, V = spd_eigh(Cm)
    half = (V * np.sqrt(w)) @ V.T
    P = np.asarray(P, dtype=np.float64)
    if not whitened:
        P = _congruence((V / np.sqrt(w)) @ V.T, P)
    return _congruence(half, expm(P))


def vectorize_tangent(P):
    """Flatten symmetric matrices to their weighted upper triangle.

    Entries are taken row-major from the upper triangle; off-diagonal entries
    are scaled by sqrt(2) so the Euclidean norm of the vector equals the
    Frobenius norm of the matrix. Output length is ``n (n + 1) / 2``.
    """
    P = check_symmetric(P)
    n = P.shape[-1]
    rows, cols = np.triu_indices(n)
    weights = np.where(rows == cols, 1.0, np.sqrt(2.0))
    return P[..., rows, cols] * weights


def unvectorize_tangent(v):
    v = np.asarray(v, dtype=np.float64)
    m = v.shape[-1]
    n = int(round((np.sqrt(8 * m + 1) - 1) / 2))
    if n * (n + 1) // 2 != m:
        raise ParameterError(f"length {m} is not a triangular number")
    rows, cols = np.triu_indices(n)
    vals = v / np.where(rows == cols, 1.0, np.sqrt(2.0))
    P = np.zeros(v.shape[:-1] + (n, n))
    P[..., rows, cols] = vals
    P[..., cols, rows] = vals
    return P


def tangent_features(covs, Cm, whitened=False):
    """Tangent vectors of ``covs`` at base point ``Cm``, one row per matrix."""
    covs = np.asarray(covs, dtype=np.float64)
    if covs.ndim == 2:
        covs = covs[None]
    return vectorize_tangent(tangent_project(covs, Cm, whitened=whitened))


def distance_riemann(A, B):
    """Affine-invariant distance ``||logm(A^-1/2 B A^-1/2)||_F``."""
    w = np.linalg.eigvalsh(_congruence(invsqrtm(A), np.asarray(B, dtype=np.float64)))
    return np.sqrt(np.sum(np.log(w) ** 2, axis=-1))
