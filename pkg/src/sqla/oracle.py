"""Dense brute-force reference values.

Nothing in this module touches the sampling structures; the tests and the
CLI compare randomized outputs against these.
"""
import numpy as np
import scipy.linalg

from .errors import ConvergenceFailure, DimensionMismatch, ZeroImage


def _vec(x):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ValueError("entries must be finite")
    return x


def _mat(A):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("entries must be finite")
    return A


def exact_dot(x, y):
    x, y = _vec(x), _vec(y)
    if x.size != y.size:
        raise DimensionMismatch(f"{x.size} != {y.size}")
    # np.sum reduces with pairwise summation
    return float(np.sum(x * y))


def exact_matvec(V, w):
    V, w = _mat(V), _vec(w)
    if V.shape[1] != w.size:
        raise DimensionMismatch(f"matrix has {V.shape[1]} columns, vector length {w.size}")
    return np.sum(V * w, axis=1)


def exact_frobenius(A):
    A = _mat(A)
    return float(np.sqrt(np.sum(A * A)))


def exact_svd(A):
    """Full SVD ``(U, s, Vt)`` by LAPACK's QR-iteration driver (gesvd)."""
    A = _mat(A)
    if min(A.shape) > 512:
        raise ValueError("exact_svd is meant for min(m, n) <= 512")
    try:
        return scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesvd")
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc


def exact_centroid_distance(V, u):
    """``||u - mean of the rows of V||**2``."""
    V, u = _mat(V), _vec(u)
    if V.shape[1] != u.size:
        raise DimensionMismatch(f"points have dimension {V.shape[1]}, query {u.size}")
    diff = u - np.mean(V, axis=0)
    return float(np.sum(diff * diff))


def exact_C(V, w):
    """Rejection overhead ``sum_i ||w_i V[:, i]||**2 / ||V w||**2``."""
    V, w = _mat(V), _vec(w)
    vw = exact_matvec(V, w)
    denom = float(np.sum(vw * vw))
    if denom == 0.0:
        raise ZeroImage("V w = 0")
    col_sq = np.sum(V * V, axis=0)
    return float(np.sum(w * w * col_sq)) / denom


def exact_low_rank_error(A, r):
    """``||A - A_r||_F**2``: the sum of squared discarded singular values."""
    s = exact_svd(A)[1]
    return float(np.sum(s[r:] ** 2))


def spectrum_gap(A, k):
    """Smallest ``(s_i**2 - s_{i+1}**2) / ||A||_F**2`` over ``i <= k``."""
    s = exact_svd(A)[1]
    s2 = np.concatenate([s ** 2, [0.0]])
    fro2 = float(np.sum(s ** 2))
    return float(np.min(s2[:k] - s2[1:k + 1]) / fro2)
