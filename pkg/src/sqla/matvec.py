"""SQ access to a matrix-vector product ``V w`` by rejection sampling.

The handle is given SQ access to ``V^T`` (the ``k`` columns of ``V`` as rows
of an :class:`~sqla.core.SqMatrix`) and query access to ``w``. One attempt:

1. draw a column ``i`` with probability proportional to ``w_i**2 ||V[:, i]||**2``;
2. draw a row ``s`` from column ``i``'s length-squared distribution;
3. accept ``s`` with probability ``(Vw)_s**2 / (k sum_j (V_sj w_j)**2)``.

An attempt succeeds with probability ``1 / (k C)`` where
``C = sum_i ||w_i V[:, i]||**2 / ||Vw||**2``, and accepted rows are exact
length-squared samples of ``V w``.
"""
import math

import numpy as np

from . import kernels
from .core import AccessStats, SqHandle, SqVector, build_matrix
from .errors import AbortedAfterBudget, DimensionMismatch, EmptySupport
from .oracle import exact_C

# attempts per kernel call are capped to bound memory
MAX_BATCH = 1 << 16


def overhead_C_exact(V, w):
    """Exact ``C(V, w)`` by dense arithmetic (test oracle)."""
    return exact_C(V, w)


class MatVecHandle(SqHandle):
    """SQ^nu access to ``V w``.

    Parameters
    ----------
    Vt : SqMatrix
        ``k x n`` matrix whose rows are the columns of ``V``.
    w : array-like, length ``k``
    delta : float
        Failure probability used to size attempt budgets.
    c_bound : float, optional
        Caller's upper bound on ``C(V, w)``. ``sample`` gives up after
        ``ceil(k * c_bound * ln(1/delta))`` consecutive failures.
    attempt_budget : int, optional
        Explicit cap on consecutive failures; overrides ``c_bound``.
    nu : float
        Norm slack of :meth:`norm`.
    seed : int or numpy Generator, optional
        Randomness for the lazily computed :meth:`norm`.
    """

    def __init__(self, Vt, w, delta=1e-3, c_bound=None, attempt_budget=None,
                 nu=0.01, seed=None):
        w = np.ascontiguousarray(w, dtype=np.float64).reshape(-1)
        if w.size != Vt.m:
            raise DimensionMismatch(f"V has {Vt.m} columns, w has length {w.size}")
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        self.Vt = Vt
        self.w = w
        self.k = Vt.m
        self.n = Vt.n
        self.delta = float(delta)
        self.c_bound = None if c_bound is None else float(c_bound)
        self.nu = float(nu)
        self._attempt_budget = attempt_budget
        self._norm_rng = np.random.default_rng(seed)
        self._cached_norm = None
        self.stats = AccessStats()
        # column weights |w_i|^2 ||V_{*,i}||^2, read once through the SQ access
        col_norms = Vt.row_norms._query0(np.arange(self.k, dtype=np.int64))
        self.stats.add(n_queries=self.k)
        self._col_weight = SqVector(self.k, np.abs(w) * col_norms)
        self.total_weight = float(self._col_weight._tree[1])

    @property
    def attempt_budget(self):
        if self._attempt_budget is not None:
            return int(self._attempt_budget)
        if self.c_bound is None:
            raise ValueError("sampling needs c_bound or attempt_budget")
        return max(1, int(math.ceil(self.k * self.c_bound * math.log(1.0 / self.delta))))

    def _run_attempts(self, rng, count):
        if not self.total_weight > 0.0:
            raise EmptySupport("sum_i |w_i|^2 ||V_{*,i}||^2 is zero")
        Vt = self.Vt
        u = rng.random((count, 3))
        out, max_ratio = kernels.rejection_attempts(
            self._col_weight._tree, Vt._trees, Vt._data, Vt.row_map, Vt.row_scale, self.w, u
        )
        # Cauchy-Schwarz guarantees r_s <= 1
        assert max_ratio <= 1.0 + 1e-9, f"acceptance ratio {max_ratio} > 1"
        return out

    def _charge(self, attempts):
        self.stats.add(
            n_attempts=attempts,
            n_queries=attempts * self.k,
            n_node_visits=attempts * (self._col_weight.depth + self.Vt._depth),
        )

    def rejection_sample_once(self, rng):
        """One attempt: a 1-based index on success, ``None`` on failure."""
        out = self._run_attempts(rng, 1)
        self._charge(1)
        return None if out[0] < 0 else int(out[0]) + 1

    def acceptance_trials(self, rng, count):
        """Run ``count`` attempts; returns 0-based rows with -1 for failures."""
        out = np.empty(count, dtype=np.int64)
        done = 0
        while done < count:
            b = min(MAX_BATCH, count - done)
            out[done:done + b] = self._run_attempts(rng, b)
            done += b
        self._charge(count)
        return out

    def _batch_size(self, remaining):
        guess = self.c_bound if self.c_bound is not None else 1.0
        return int(min(MAX_BATCH, max(64, math.ceil(1.25 * remaining * self.k * guess))))

    def _sample0(self, rng, m):
        budget = self.attempt_budget
        found = []
        remaining = m
        fail_run = 0
        while remaining:
            out = self._run_attempts(rng, self._batch_size(remaining))
            prev = -1
            take = []
            for p in np.flatnonzero(out >= 0):
                p = int(p)
                if fail_run + (p - prev - 1) >= budget:
                    break
                fail_run = 0
                take.append(p)
                prev = p
                if len(take) == remaining:
                    break
            found.append(out[np.asarray(take, dtype=np.int64)])
            remaining -= len(take)
            if not remaining:
                self._charge(prev + 1)
                break
            gap = out.size - prev - 1
            if fail_run + gap >= budget:
                self._charge(prev + 1 + budget - fail_run)
                raise AbortedAfterBudget(budget)
            fail_run += gap
            self._charge(out.size)
        self.stats.add(n_samples=m)
        return np.concatenate(found)

    def _query0(self, idx0):
        Vt = self.Vt
        vw, _ = kernels.matvec_entries(Vt._data, Vt.row_map, Vt.row_scale, self.w, idx0)
        self.stats.add(n_queries=idx0.size * self.k)
        return vw

    def estimate_norm_sq(self, nu, rng, c_bound=None, delta=None):
        """Estimate ``||Vw||**2`` to relative accuracy ``nu`` w.p. ``>= 1 - delta``.

        Runs ``ceil((k / nu**2) c_bound ln(1/delta))`` attempts and scales the
        success fraction by ``k sum_i |w_i|^2 ||V_{*,i}||^2``.
        """
        if not 0.0 < nu < 1.0:
            raise ValueError("nu must lie in (0, 1)")
        c = self.c_bound if c_bound is None else float(c_bound)
        if c is None:
            raise ValueError("norm estimation needs a bound on C(V, w)")
        d = self.delta if delta is None else float(delta)
        if self.total_weight == 0.0:
            return 0.0
        attempts = int(math.ceil(self.k / nu ** 2 * c * math.log(1.0 / d)))
        out = self.acceptance_trials(rng, attempts)
        p = np.count_nonzero(out >= 0) / attempts
        return p * self.k * self.total_weight

    def _norm_value(self):
        # est**2 within (1 +- nu/2) ||Vw||**2  =>  est / sqrt(1 - nu/2) in [||Vw||, (1+nu)||Vw||)
        if self._cached_norm is None:
            est = self.estimate_norm_sq(0.5 * self.nu, self._norm_rng)
            self._cached_norm = math.sqrt(est / (1.0 - 0.5 * self.nu))
        return self._cached_norm


def from_dense(V, w, **kwargs):
    """Handle for dense ``V`` (``n x k``) and ``w``; convenience for tests and the CLI."""
    V = np.asarray(V, dtype=np.float64)
    return MatVecHandle(build_matrix(V.T), w, **kwargs)
