"""Distance from a point to the centroid of a point set, from SQ access.

With ``M`` the ``(n+1) x d`` matrix whose first row is ``u / ||u||`` and whose
row ``1+i`` is ``V_i / (sqrt(n) ||V_i||)``, and ``w = [||u||, -||V_i||/sqrt(n)]``,
one has ``w M = u - mean(V)``. The squared distance ``||w M||**2`` is the inner
product of the flattened tensors

    a_{ijk} = M_{ji} ||M_k||,      b_{ijk} = w_j w_k M_{ki} / ||M_k||,

and ``a`` admits SQ access (``j, k`` from the row norms of ``M``, then ``i``
from row ``j``) while ``b`` admits query access. Neither is materialized.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import AccessStats, SqHandle, SqVector, _as_index_array, build_dense, build_matrix
from .errors import DimensionMismatch, EmptySupport, InvalidEpsilon
from .estimators import EstimatorParams, median_of_means

# the inner estimator needs eps < 1; larger requests are trivially satisfied
MAX_INNER_EPS = 0.99


class CentroidInstance:
    """Point set ``V`` (an ``n x d`` SqMatrix, points as rows) and query ``u``.

    Zero rows of ``V`` get a zero row of ``M`` and weight 0, which keeps
    ``w M = u - mean(V)`` exact.
    """

    def __init__(self, V, u):
        if V.n != u.n:
            raise DimensionMismatch(f"points have dimension {V.n}, query {u.n}")
        self.V = V
        self.u = u
        self.n = V.m
        self.d = V.n
        self.u_norm = float(u.norm())
        row_norms = V.row_norms._query0(np.arange(self.n, dtype=np.int64))
        self.v_row_norms = row_norms
        if self.u_norm == 0.0 and not np.any(row_norms > 0.0):
            raise EmptySupport("u and V are both zero")
        root_n = math.sqrt(self.n)
        self.w = np.concatenate([[self.u_norm], -row_norms / root_n])
        self.Z = float(np.sum(self.w * self.w))
        # row norms of M: 1 for u (if nonzero), 1/sqrt(n) per nonzero point
        m_norms = np.concatenate([[1.0 if self.u_norm > 0.0 else 0.0],
                                  np.where(row_norms > 0.0, 1.0 / root_n, 0.0)])
        self.M_tilde = SqVector(self.n + 1, m_norms)
        # row r of M is coef[r] times the stored row (u for r = 0)
        scale = V.row_scale
        safe = np.where(row_norms > 0.0, row_norms, 1.0)
        self._coef = np.concatenate([
            [1.0 / self.u_norm if self.u_norm > 0.0 else 0.0],
            np.where(row_norms > 0.0, scale / (safe * root_n), 0.0),
        ])
        if u._positions is None:
            self._u_vals, self._u_tree = u._values, u._tree
        else:
            self._u_vals = u.entries
            self._u_tree = kernels.build_tree(self._u_vals * self._u_vals)

    @classmethod
    def from_dense(cls, V, u):
        V = np.array(V, dtype=np.float64, ndmin=2)
        return cls(build_matrix(V), build_dense(u))

    def _M_entries(self, j0, i0):
        """``M[j0, i0]`` elementwise (0-based), charged to the underlying handles."""
        j0 = np.asarray(j0, dtype=np.int64)
        i0 = np.asarray(i0, dtype=np.int64)
        out = np.zeros(j0.size)
        top = j0 == 0
        if np.any(top) and self.u_norm > 0.0:
            out[top] = self.u._query0(i0[top]) / self.u_norm
        rest = ~top
        if np.any(rest):
            rows = j0[rest] - 1
            norms = self.v_row_norms[rows]
            vals = self.V._query0(rows, i0[rest])
            safe = np.where(norms > 0.0, norms, 1.0)
            out[rest] = np.where(norms > 0.0, vals / (safe * math.sqrt(self.n)), 0.0)
        return out

    def dense_M(self):
        """``(M, w)`` as dense arrays (uncounted; for checks on small instances)."""
        M = np.zeros((self.n + 1, self.d))
        if self.u_norm > 0.0:
            M[0] = self.u.entries / self.u_norm
        Vd = self.V.dense()
        nz = self.v_row_norms > 0.0
        M[1:][nz] = Vd[nz] / (self.v_row_norms[nz, None] * math.sqrt(self.n))
        return M, self.w.copy()


class _TensorA(SqHandle):
    def __init__(self, inst, stats):
        self.inst = inst
        self.n = inst.d * (inst.n + 1) ** 2
        self.nu = 0.0
        self.stats = stats

    def _split(self, flat):
        d, n1 = self.inst.d, self.inst.n + 1
        i0 = flat % d
        rest = flat // d
        return i0, rest % n1, rest // n1

    def _query0(self, idx0):
        i0, j0, k0 = self._split(idx0)
        self.stats.add(n_queries=idx0.size)
        return self.inst._M_entries(j0, i0) * self.inst.M_tilde._values[k0]

    def _draw(self, rng, m):
        """``m`` draws as ``(z, j, k, i)`` with ``z = b ||a||**2 / a``, charged to the inputs."""
        inst = self.inst
        V = inst.V
        norm_a = self._norm_value()
        z, j0, k0, i0 = kernels.centroid_estimates(
            inst.M_tilde._tree, inst.M_tilde._values, inst._u_tree, inst._u_vals,
            V._trees, V._data, V.row_map, inst._coef, inst.w, norm_a * norm_a,
            rng.random((m, 3)),
        )
        top = int(np.count_nonzero(j0 == 0))
        u_rows = top + int(np.count_nonzero(k0 == 0))
        inst.M_tilde.stats.add(n_samples=2 * m, n_node_visits=2 * m * inst.M_tilde.depth)
        inst.u.stats.add(n_samples=top, n_node_visits=top * inst.u.depth, n_queries=u_rows)
        V.stats.add(n_samples=m - top, n_node_visits=(m - top) * V._depth,
                    n_queries=2 * m - u_rows)
        self.stats.add(n_samples=m)
        return z, j0, k0, i0

    def _sample0(self, rng, m):
        _, j0, k0, i0 = self._draw(rng, m)
        return i0 + self.inst.d * (j0 + (self.inst.n + 1) * k0)

    def _norm_value(self):
        # ||a|| = ||M||_F ||M~|| = ||M~||**2
        return float(self.inst.M_tilde._tree[1])


class _TensorB(SqHandle):
    def __init__(self, inst, stats):
        self.inst = inst
        self.n = inst.d * (inst.n + 1) ** 2
        self.stats = stats

    def _query0(self, idx0):
        inst = self.inst
        d, n1 = inst.d, inst.n + 1
        i0 = idx0 % d
        rest = idx0 // d
        j0, k0 = rest % n1, rest // n1
        self.stats.add(n_queries=idx0.size)
        mk = inst.M_tilde._values[k0]
        safe = np.where(mk > 0.0, mk, 1.0)
        ratio = np.where(mk > 0.0, inst._M_entries(k0, i0) / safe, 0.0)
        return inst.w[j0] * inst.w[k0] * ratio

    def _norm_value(self):
        return self.inst.Z


class FlattenedTensorAccess:
    """Lazy SQ access to ``a`` and query access to ``b``.

    Flat 0-based index of the triple ``(i, j, k)`` is ``i + d (j + (n+1) k)``.
    """

    def __init__(self, inst):
        self.inst = inst
        self.stats = AccessStats()
        self.a = _TensorA(inst, self.stats)
        self.b = _TensorB(inst, self.stats)

    def flat(self, i, j, k):
        inst = self.inst
        i0 = _as_index_array(i, inst.d)
        j0 = _as_index_array(j, inst.n + 1)
        k0 = _as_index_array(k, inst.n + 1)
        return i0 + inst.d * (j0 + (inst.n + 1) * k0)

    def triple(self, flat0):
        i0, j0, k0 = self.a._split(np.asarray(flat0, dtype=np.int64))
        return i0 + 1, j0 + 1, k0 + 1

    def dense_a_b(self):
        """Materialized ``(a, b)`` in flat order (small instances only)."""
        inst = self.inst
        if inst.d * (inst.n + 1) ** 2 > 10 ** 7:
            raise ValueError("instance too large to materialize")
        M, w = inst.dense_M()
        mt = inst.M_tilde.entries
        safe = np.where(mt > 0.0, mt, 1.0)
        # axes (k, j, i) so that C-order flattening gives i + d (j + (n+1) k)
        a = mt[:, None, None] * M[None, :, :]
        ratio = np.where(mt[:, None] > 0.0, M / safe[:, None], 0.0)
        b = w[None, :, None] * w[:, None, None] * ratio[:, None, :]
        return a.reshape(-1), b.reshape(-1)


def tensor_sample_a(inst, rng, access=None):
    """Draw a 1-based triple ``(i, j, k)`` with probability ``|a_ijk|**2 / ||a||**2``."""
    access = FlattenedTensorAccess(inst) if access is None else access
    flat0 = access.a._sample0(rng, 1)
    i, j, k = access.triple(flat0)
    return int(i[0]), int(j[0]), int(k[0])


def tensor_query_a(inst, i, j, k, access=None):
    access = FlattenedTensorAccess(inst) if access is None else access
    return float(access.a._query0(access.flat(i, j, k))[0])


def tensor_query_b(inst, i, j, k, access=None):
    access = FlattenedTensorAccess(inst) if access is None else access
    return float(access.b._query0(access.flat(i, j, k))[0])


@dataclass
class CentroidResult:
    """Estimate of ``||u - mean(V)||**2`` with sizing metadata.

    ``scale_paper`` is the ``4 Z`` factor used to size the inner estimate;
    ``scale_computed`` is ``||a|| ||b||``, which equals ``2 Z`` when no row
    of ``V`` and not ``u`` is zero.
    """

    estimate: float
    eps: float
    delta: float
    inner_eps: float
    Z: float
    scale_paper: float
    scale_computed: float
    samples: int
    stats: dict = field(default_factory=dict)


def centroid_distance_run(inst, eps, delta, rng):
    """Run the estimator; see :class:`CentroidResult`."""
    if not eps > 0.0:
        raise InvalidEpsilon(f"eps must be positive, got {eps}")
    access = FlattenedTensorAccess(inst)
    scale_paper = 4.0 * inst.Z
    inner_eps = min(eps / scale_paper, MAX_INNER_EPS)
    params = EstimatorParams(inner_eps, delta)
    # fused sample-and-evaluate; same values as elementary_estimates(access.a, access.b, ...)
    z = access.a._draw(rng, params.total)[0]
    access.stats.add(n_queries=2 * params.total)
    est = median_of_means(z, params.bucket_count, params.bucket_size)
    return CentroidResult(
        estimate=est,
        eps=float(eps),
        delta=float(delta),
        inner_eps=inner_eps,
        Z=inst.Z,
        scale_paper=scale_paper,
        scale_computed=access.a._norm_value() * access.b._norm_value(),
        samples=params.total,
        stats=access.stats.as_dict(),
    )


def centroid_distance_estimate(inst, eps, delta, rng):
    """Estimate ``||u - mean(V)||**2`` to additive ``eps`` w.p. ``>= 1 - delta``."""
    return centroid_distance_run(inst, eps, delta, rng).estimate
