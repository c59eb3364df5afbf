"""Threshold low-rank approximation by two-stage length-squared sampling.

Rows ``i_1..i_q`` are drawn from the row-norm distribution of ``A`` and
rescaled to equal norm ``||A||_F / sqrt(q)``, giving ``S``. Columns
``j_1..j_q`` are drawn by picking a uniform row of ``S`` and then a column
from that row. ``W`` keeps the sampled columns of ``S``, column ``c`` divided
by ``sqrt(q F(j_c))``. The left singular vectors of ``W`` with singular value
above the threshold, with ``S``, describe

    V_hat = S^T U_hat diag(sigma_hat)^-1,   D = A V_hat V_hat^T.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .core import SqVector
from .errors import ConvergenceFailure, InvalidEpsilon, SingularSigma
from .fileio import read_sqm_blocks, write_sqm_blocks

# refuse to allocate a sample larger than this without an explicit q_override
MAX_THEORETICAL_Q = 10 ** 7


@dataclass(frozen=True)
class LowRankParams:
    """Threshold ``sigma``, accuracy ``eps`` and failure probability ``delta``.

    The sample size is ``q = theta_constant * K**4 / eps**2 * ln(1/delta)``
    with ``K = ||A||_F**2 / sigma**2`` unless ``q_override`` is given. That
    formula is far beyond desk scale for most inputs; in practice pass
    ``q_override``.
    """

    sigma: float
    eps: float
    delta: float
    q_override: int = None
    theta_constant: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.eps > 0:
            raise InvalidEpsilon(f"eps must be positive, got {self.eps}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.q_override is not None and int(self.q_override) < 1:
            raise ValueError("q_override must be a positive integer")

    def K(self, frobenius):
        return frobenius ** 2 / self.sigma ** 2

    def check_eps(self, frobenius):
        """Raise InvalidEpsilon unless eps is in (0, sqrt(sigma/||A||_F)/4]."""
        if self.q_override is not None:
            return
        upper = math.sqrt(self.sigma / frobenius) / 4.0
        if not 0.0 < self.eps <= upper:
            raise InvalidEpsilon(f"eps={self.eps} outside (0, {upper:.6g}]")

    def q(self, frobenius):
        if self.q_override is not None:
            return int(self.q_override)
        K = self.K(frobenius)
        q = math.ceil(self.theta_constant * K ** 4 / self.eps ** 2 * math.log(1.0 / self.delta))
        if q > MAX_THEORETICAL_Q:
            raise ValueError(
                f"theoretical sample size q={q:.3g} is impractical; pass q_override"
            )
        return max(1, q)


@dataclass
class LowRankDescription:
    """Implicit low-rank approximation of ``A``.

    ``S`` is SQ access to the rescaled sampled rows (``q x n``), ``U`` the
    ``q x ell`` left singular vectors of ``W`` and ``sigma_hat`` the matching
    singular values, all above the threshold. Indices are 1-based.
    """

    S: object
    U: np.ndarray
    sigma_hat: np.ndarray
    row_indices: np.ndarray
    col_indices: np.ndarray
    frobenius: float
    sigma: float
    meta: dict = field(default_factory=dict)

    @property
    def q(self):
        return self.S.m

    @property
    def ell(self):
        return self.sigma_hat.size

    def v_hat_dense(self):
        """``S^T U diag(sigma_hat)^-1`` as an ``n x ell`` array."""
        if self.ell == 0:
            return np.zeros((self.S.n, 0))
        if np.any(self.sigma_hat == 0):
            raise SingularSigma("a retained singular value is zero")
        return (self.S.dense().T @ self.U) / self.sigma_hat


def dense_svd(W):
    """Thin SVD ``(U, s, Vt)`` with nonincreasing ``s`` (LAPACK gesdd)."""
    W = np.asarray(W, dtype=np.float64)
    if not np.all(np.isfinite(W)):
        raise ValueError("entries must be finite")
    try:
        return np.linalg.svd(W, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc


def _uniform_norms(q, frobenius):
    # every row of S has norm ||A||_F / sqrt(q); report ||S||_F = ||A||_F exactly
    return SqVector(q, np.full(q, frobenius / math.sqrt(q)), norm=frobenius)


def low_rank_approx(A, params, rng):
    """Run the two-stage sampler on ``A`` (an SqMatrix) and truncate at ``sigma``.

    Returns a description with ``ell = 0`` when no singular value of ``W``
    exceeds the threshold.
    """
    fro = A.frobenius()
    if not fro > 0.0:
        raise ValueError("A is the zero matrix")
    params.check_eps(fro)
    q = params.q(fro)

    rows0 = A._sample_rows0(rng, q)
    row_norms = A.row_norms._query0(rows0)
    scale = fro / (math.sqrt(q) * row_norms)
    S = A.scaled_view(rows0, scale, _uniform_norms(q, fro))

    # F: uniform row of S, then a column from that row
    r = S._sample_rows0(rng, q)
    cols0 = S._sample_in_rows0(r, rng)

    uniq, counts = np.unique(cols0, return_counts=True)
    block = S._block0(np.arange(q), uniq)
    # charge the q queries per sampled column that computing F(j_c) costs
    S.stats.add(n_queries=q * (q - uniq.size))
    F = np.sum(block * block, axis=0) / (q * (fro * fro / q))
    # duplicate columns of W merge: W W^T = B B^T with B's columns scaled by sqrt(count)
    B = block * np.sqrt(counts / (q * F))
    U, s, _ = dense_svd(B)
    ell = int(np.count_nonzero(s > params.sigma))

    return LowRankDescription(
        S=S,
        U=np.ascontiguousarray(U[:, :ell]),
        sigma_hat=s[:ell].copy(),
        row_indices=rows0 + 1,
        col_indices=cols0 + 1,
        frobenius=fro,
        sigma=params.sigma,
        meta={"q": q, "eps": params.eps, "delta": params.delta,
              "theta_constant": params.theta_constant},
    )


def sq_access_to_S(desc):
    """SQ access to ``S``: uniform row-norm sampling, rows delegated to ``A``."""
    return desc.S


def reconstruct_D_dense(A, desc):
    """Materialize ``D = A V_hat V_hat^T`` for a dense ``A`` (test oracle)."""
    A = np.asarray(A, dtype=np.float64)
    if A.size > 10 ** 6:
        raise ValueError("reconstruct_D_dense is for m*n <= 1e6")
    V = desc.v_hat_dense()
    return (A @ V) @ V.T


def save_description(path, desc):
    """Write ``desc`` as concatenated SQM1 records.

    Records: header ``[q, ell, n, ||A||_F, sigma]``, row indices, column
    indices, row scales of ``S``, ``U`` (``q x ell``), ``sigma_hat``.
    The matrix ``A`` itself is not stored.
    """
    header = np.array([desc.q, desc.ell, desc.S.n, desc.frobenius, desc.sigma], dtype=np.float64)
    write_sqm_blocks(path, [
        header,
        desc.row_indices.astype(np.float64),
        desc.col_indices.astype(np.float64),
        desc.S.row_scale,
        desc.U if desc.ell else np.zeros((desc.q, 0)),
        desc.sigma_hat.reshape(1, -1),
    ])


def load_description(path, A):
    """Rebuild a description saved by :func:`save_description` against ``A``."""
    header, rows, cols, scales, U, sig = read_sqm_blocks(path)
    q, ell, n = (int(v) for v in header[0, :3])
    fro, sigma = float(header[0, 3]), float(header[0, 4])
    if n != A.n:
        raise ValueError(f"description is for n={n}, matrix has n={A.n}")
    rows1 = rows.reshape(-1).astype(np.int64)
    S = A.scaled_view(rows1 - 1, scales.reshape(-1), _uniform_norms(q, fro))
    return LowRankDescription(
        S=S,
        U=U.reshape(q, ell),
        sigma_hat=sig.reshape(-1),
        row_indices=rows1,
        col_indices=cols.reshape(-1).astype(np.int64),
        frobenius=fro,
        sigma=sigma,
        meta={"q": q},
    )
