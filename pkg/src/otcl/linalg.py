"""Symmetric positive definite helpers for the Gaussian closed forms."""

import numpy as np

EIG_FLOOR = 1e-14


def check_spd(a, name="covariance"):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.allclose(a, a.T, atol=1e-12, rtol=0):
        raise ValueError(f"{name} must be symmetric")
    if np.any(np.linalg.eigvalsh(a) <= 0):
        raise ValueError(f"{name} must be positive definite")
    return a


def sym_eig(a):
    """Eigendecomposition of the symmetrized matrix with eigenvalues clamped
    at ``EIG_FLOOR``.  Returns ``(evals, evecs, n_clamped)``."""
    s = 0.5 * (a + a.T)
    w, v = np.linalg.eigh(s)
    clamped = int(np.sum(w < EIG_FLOOR))
    return np.maximum(w, EIG_FLOOR), v, clamped


def spd_power(a, p):
    w, v, clamped = sym_eig(a)
    return (v * w**p) @ v.T, clamped


def spd_sqrt(a):
    return spd_power(a, 0.5)


def logdet(a):
    sign, val = np.linalg.slogdet(a)
    if sign <= 0:
        raise ValueError("matrix is not positive definite")
    return float(val)
