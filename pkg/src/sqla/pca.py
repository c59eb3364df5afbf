"""Top-k eigenvalues of ``A^T A`` and SQ access to approximate eigenvectors.

The threshold low-rank sampler runs at a shifted threshold and accuracy
chosen from the gap and accuracy targets. Its retained singular values
estimate ``sigma_i``, and each eigenvector estimate ``S^T U_i / sigma_hat_i``
is exposed through the rejection-sampling matrix-vector handle.
"""
import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientRank, InvalidEpsilon
from .lowrank import LowRankParams, low_rank_approx
from .matvec import MatVecHandle
from .oracle import exact_svd

# range of eps_sigma, eps_v and delta covered by the guarantee
THEOREM_RANGE = (0.0, 0.01)
EIGVEC_NU = 0.01
EIGVEC_DELTA = 1e-3


@dataclass(frozen=True)
class PcaParams:
    """Targets for :func:`pca`.

    ``sigma`` lower-bounds the top ``k`` singular values, ``eta`` is the
    relative gap ``(s_i**2 - s_{i+1}**2) / ||A||_F**2``, ``eps_sigma`` and
    ``eps_v`` are the eigenvalue and eigenvector accuracies. Values of
    ``eps_sigma``, ``eps_v`` or ``delta`` outside ``(0, 0.01)`` are accepted
    with a warning.
    """

    sigma: float
    k: int
    eta: float
    eps_sigma: float
    eps_v: float
    delta: float
    q_override: int = None
    theta_constant: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0 or not self.eta > 0:
            raise ValueError("sigma and eta must be positive")
        if int(self.k) < 1:
            raise ValueError("k must be a positive integer")
        for name in ("eps_sigma", "eps_v", "delta"):
            if not getattr(self, name) > 0:
                raise InvalidEpsilon(f"{name} must be positive")
        if not self.delta < 1:
            raise ValueError("delta must be below 1")
        if not self.eps_sigma < self.eta:
            raise InvalidEpsilon(f"eps_sigma={self.eps_sigma} must be below eta={self.eta}")
        lo, hi = THEOREM_RANGE
        outside = [n for n in ("eps_sigma", "eps_v", "delta") if not lo < getattr(self, n) < hi]
        if outside:
            warnings.warn(
                f"{', '.join(outside)} outside stated theorem range (0, 0.01)",
                stacklevel=3,
            )

    def K(self, frobenius):
        return frobenius ** 2 / self.sigma ** 2

    def eps(self, frobenius):
        """``min(eps_sigma K**1.5, eps_v**2 eta, K**-0.5 / 4)``."""
        K = self.K(frobenius)
        return min(self.eps_sigma * K ** 1.5, self.eps_v ** 2 * self.eta, 0.25 / math.sqrt(K))

    def sigma_prime(self, frobenius):
        return self.sigma - self.eps(frobenius) * frobenius


@dataclass
class PcaResult:
    sigma_hat_sq: np.ndarray
    desc: object
    c_bound: float
    meta: dict = field(default_factory=dict)
    _handles: dict = field(default_factory=dict, repr=False)

    @property
    def k(self):
        return self.sigma_hat_sq.size

    def eigvec(self, i):
        return eigvec_access(self, i)


def pca(A, params, rng):
    """Estimate the top ``k`` eigenpairs of ``A^T A`` for an SqMatrix ``A``.

    Raises InsufficientRank when fewer than ``k`` singular values survive
    the threshold.
    """
    fro = A.frobenius()
    k = int(params.k)
    eps = params.eps(fro)
    sigma_p = params.sigma_prime(fro)
    lr = LowRankParams(sigma_p, eps, params.delta / k,
                       q_override=params.q_override, theta_constant=params.theta_constant)
    desc = low_rank_approx(A, lr, rng)
    if desc.ell < k:
        raise InsufficientRank(desc.ell, k)
    c_bound = fro ** 2 / (params.sigma ** 2 * (1.0 - eps))
    meta = {
        "sigma": params.sigma, "k": k, "eta": params.eta,
        "eps_sigma": params.eps_sigma, "eps_v": params.eps_v, "delta": params.delta,
        "eps": eps, "sigma_prime": sigma_p, "q": desc.q, "ell": desc.ell,
        "frobenius": fro, "handle_nu": EIGVEC_NU, "handle_delta": EIGVEC_DELTA,
    }
    seeds = rng.integers(0, 2 ** 63 - 1, size=k)
    meta["handle_seeds"] = [int(s) for s in seeds]
    return PcaResult(sigma_hat_sq=desc.sigma_hat[:k] ** 2, desc=desc, c_bound=c_bound, meta=meta)


def eigvec_access(res, i):
    """SQ^0.01 handle for the 1-based ``i``-th eigenvector estimate.

    Built lazily and cached. Its attempt budget comes from the bound
    ``C <= ||A||_F**2 / (sigma**2 (1 - eps))``.
    """
    if not 1 <= i <= res.k:
        raise IndexError(f"component {i} not in [1, {res.k}]")
    if i not in res._handles:
        desc = res.desc
        w = desc.U[:, i - 1] / desc.sigma_hat[i - 1]
        res._handles[i] = MatVecHandle(
            desc.S, w, delta=EIGVEC_DELTA, c_bound=res.c_bound, nu=EIGVEC_NU,
            seed=res.meta["handle_seeds"][i - 1],
        )
    return res._handles[i]


@dataclass
class EigvecDiagnostics:
    """Per-component errors against the dense SVD.

    ``errors[i]`` is ``min(||v_hat - v||, ||v_hat + v||)``, ``overlap_sq[i]``
    is ``<v_i, v_hat_i>**2`` and ``subspace_sq`` is ``||V_hat^T V_k||_F**2``.
    """

    errors: np.ndarray
    overlap_sq: np.ndarray
    subspace_sq: float
    sigma_exact_sq: np.ndarray


def eigvec_error_oracle(A, res):
    """Compare ``res`` with the dense SVD of ``A`` (no pass/fail judgement)."""
    _, s, Vt = exact_svd(A)
    k = res.k
    V_true = Vt[:k].T
    V_hat = res.desc.v_hat_dense()[:, :k]
    errors = np.minimum(np.linalg.norm(V_hat - V_true, axis=0),
                        np.linalg.norm(V_hat + V_true, axis=0))
    overlap = np.sum(V_hat * V_true, axis=0) ** 2
    subspace = float(np.sum((V_hat.T @ V_true) ** 2))
    s2 = np.zeros(k)
    s2[:min(k, s.size)] = s[:k] ** 2
    return EigvecDiagnostics(errors, overlap, subspace, s2)


PCA_CSV_COLUMNS = ("i", "sigma_hat_sq", "sigma_exact_sq", "vec_error",
                   "q", "seed", "eps", "eps_sigma", "eps_v", "eta")


def pca_rows(res, seed, A=None):
    """One dict per component; oracle columns only when dense ``A`` is given."""
    diag = eigvec_error_oracle(A, res) if A is not None else None
    rows = []
    for i in range(res.k):
        row = {"i": i + 1, "sigma_hat_sq": float(res.sigma_hat_sq[i])}
        if diag is not None:
            row["sigma_exact_sq"] = float(diag.sigma_exact_sq[i])
            row["vec_error"] = float(diag.errors[i])
        row.update(q=res.meta["q"], seed=seed, eps=res.meta["eps"],
                   eps_sigma=res.meta["eps_sigma"], eps_v=res.meta["eps_v"], eta=res.meta["eta"])
        rows.append(row)
    return rows


def write_pca_csv(path, res, seed, A=None):
    rows = pca_rows(res, seed, A)
    cols = [c for c in PCA_CSV_COLUMNS if c in rows[0]]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
