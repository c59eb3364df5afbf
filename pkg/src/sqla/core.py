"""Sample-and-query (SQ) access handles.

A handle over a real vector ``x`` of dimension ``n`` answers three kinds of
request:

* ``query(i)`` returns ``x_i``;
* ``sample(rng)`` returns ``i`` with probability ``x_i**2 / ||x||**2``;
* ``norm()`` returns ``||x||``, or an overestimate in ``[||x||, (1+nu)||x||)``
  for a handle with norm slack ``nu``.

Indices are 1-based at this interface. Internally everything is 0-based and
the algorithms in this package use the ``_query0`` / ``_sample0`` methods.

Every handle carries an :class:`AccessStats` that counts the requests made
through it.
"""
import copy
import math
import threading

import numpy as np

from . import kernels
from .errors import (
    AcceptanceBoundViolated,
    DuplicateIndex,
    EmptySupport,
    InconsistentOracle,
    IndexOutOfRange,
)

COUNTERS = (
    "n_queries",
    "n_samples",
    "n_norm_queries",
    "n_node_visits",
    "n_oracle_calls",
    "n_attempts",
)

# relative slack allowed on branch probabilities from an integration oracle
ORACLE_TOL = 1e-9


class AccessStats:
    """Thread-safe monotone access counters.

    Counters only grow; :meth:`reset` is the one way to zero them. For
    composite operations (rejection sampling, low-rank approximation) the
    counts record the nominal cost of the operation in the SQ model, i.e.
    the entry queries and samples the algorithm is defined to make.
    """

    __slots__ = COUNTERS + ("_lock",)

    def __init__(self):
        self._lock = threading.Lock()
        for name in COUNTERS:
            setattr(self, name, 0)

    def add(self, **counts):
        with self._lock:
            for name, value in counts.items():
                if value < 0:
                    raise ValueError(f"counter increments must be nonnegative: {name}={value}")
                setattr(self, name, getattr(self, name) + int(value))

    def merge(self, other):
        self.add(**other.as_dict())

    def reset(self):
        with self._lock:
            for name in COUNTERS:
                setattr(self, name, 0)

    def as_dict(self):
        return {name: getattr(self, name) for name in COUNTERS}

    def __repr__(self):
        body = ", ".join(f"{k}={v}" for k, v in self.as_dict().items())
        return f"AccessStats({body})"


def _as_index_array(i, n):
    arr = np.asarray(i)
    if arr.dtype.kind not in "iu":
        if arr.dtype.kind == "f" and np.all(np.mod(arr, 1) == 0):
            arr = arr.astype(np.int64)
        else:
            raise TypeError(f"indices must be integers, got {arr.dtype}")
    flat = arr.reshape(-1).astype(np.int64)
    if flat.size and (flat.min() < 1 or flat.max() > n):
        bad = flat[(flat < 1) | (flat > n)][0]
        raise IndexOutOfRange(f"index {bad} outside [1, {n}]")
    return flat - 1


class SqHandle:
    """Base class for SQ access to a length-``n`` real vector.

    Subclasses implement ``_query0``, ``_sample0`` and ``_norm_value`` on
    0-based indices and do their own counting.
    """

    n = 0
    nu = 0.0

    def query(self, i):
        idx0 = _as_index_array(i, self.n)
        vals = self._query0(idx0)
        if np.ndim(i) == 0:
            return float(vals[0])
        return vals.reshape(np.shape(i))

    def sample(self, rng, size=None):
        m = 1 if size is None else int(size)
        out = self._sample0(rng, m) + 1
        if size is None:
            return int(out[0])
        return out

    def norm(self):
        self.stats.add(n_norm_queries=1)
        return self._norm_value()

    def __len__(self):
        return self.n

    def _query0(self, idx0):
        raise NotImplementedError

    def _sample0(self, rng, m):
        raise NotImplementedError

    def _norm_value(self):
        raise NotImplementedError


class SqVector(SqHandle):
    """Tree-backed SQ access to an explicitly stored vector.

    Leaves of the weight tree hold ``x_i**2``; each internal node holds the
    sum of its two children. A sample is one uniform draw followed by a
    root-to-leaf descent. For sparse vectors only the stored entries get
    leaves, and ``positions`` maps leaves back to coordinates.
    """

    def __init__(self, n, values, positions=None, nu=0.0, norm=None, stats=None):
        values = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise ValueError("entries must be finite")
        self.n = int(n)
        self.nu = float(nu)
        self._values = values
        self._positions = positions
        self._tree = kernels.build_tree(values * values)
        self._exact_norm = math.sqrt(self._tree[1])
        self._reported = self._exact_norm if norm is None else float(norm)
        self.stats = AccessStats() if stats is None else stats

    @property
    def depth(self):
        """Tree levels traversed per sample."""
        return (self._tree.shape[0] // 2).bit_length() - 1

    @property
    def weight_tree(self):
        return self._tree.copy()

    @property
    def entries(self):
        if self._positions is None:
            return self._values.copy()
        dense = np.zeros(self.n)
        dense[self._positions] = self._values
        return dense

    @property
    def exact_norm(self):
        return self._exact_norm

    def with_norm_slack(self, nu, reported=None):
        """Copy of this handle whose ``norm()`` overestimates by up to ``1 + nu``.

        ``reported`` defaults to ``(1 + nu/2) * ||x||``.
        """
        if nu < 0:
            raise ValueError("nu must be nonnegative")
        exact = self._exact_norm
        if reported is None:
            reported = exact * (1.0 + 0.5 * nu)
        if not (exact <= reported and (reported < (1.0 + nu) * exact or reported == exact)):
            raise ValueError(f"reported norm {reported} not in [{exact}, {(1 + nu) * exact})")
        clone = copy.copy(self)
        clone.nu = float(nu)
        clone._reported = float(reported)
        clone.stats = AccessStats()
        return clone

    def _query0(self, idx0):
        self.stats.add(n_queries=idx0.size)
        if self._positions is None:
            return self._values[idx0]
        pos = np.searchsorted(self._positions, idx0)
        pos_c = np.minimum(pos, max(self._positions.size - 1, 0))
        out = np.zeros(idx0.size)
        if self._positions.size:
            hit = self._positions[pos_c] == idx0
            out[hit] = self._values[pos_c[hit]]
        return out

    def _sample0(self, rng, m):
        if not self._tree[1] > 0.0:
            raise EmptySupport("cannot sample from a zero vector")
        leaves = kernels.descend(self._tree, rng.random(m))
        self.stats.add(n_samples=m, n_node_visits=m * self.depth)
        if self._positions is None:
            return leaves
        return self._positions[leaves]

    def _norm_value(self):
        return self._reported

    def __repr__(self):
        kind = "dense" if self._positions is None else f"sparse nnz={self._positions.size}"
        return f"SqVector(n={self.n}, {kind}, norm={self._reported:.6g}, nu={self.nu})"


def build_dense(x):
    """Exact SQ access to a dense vector; O(n) construction."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size < 1:
        raise ValueError("dimension must be at least 1")
    return SqVector(x.size, x)


def build_sparse(pairs, n):
    """Exact SQ access from ``(index, value)`` pairs with 1-based indices.

    Only the listed entries are stored; every other coordinate is zero.
    """
    n = int(n)
    if n < 1:
        raise ValueError("dimension must be at least 1")
    pairs = list(pairs)
    idx = np.array([p[0] for p in pairs], dtype=np.int64)
    vals = np.array([p[1] for p in pairs], dtype=np.float64)
    if idx.size:
        if idx.min() < 1 or idx.max() > n:
            raise IndexOutOfRange(f"sparse index outside [1, {n}]")
        order = np.argsort(idx, kind="stable")
        idx, vals = idx[order], vals[order]
        dup = np.flatnonzero(idx[1:] == idx[:-1])
        if dup.size:
            raise DuplicateIndex(f"index {idx[dup[0]]} given twice")
    return SqVector(n, vals, positions=idx - 1)


class UniformRejectionVector(SqHandle):
    """SQ access to a near-uniform vector by rejection from the uniform law.

    Proposes ``i`` uniformly and accepts with probability
    ``n x_i**2 / (C ||x||**2)``; on average ``C`` proposals per sample.
    """

    def __init__(self, query_oracle, n, C, norm=None):
        self.n = int(n)
        self.C = float(C)
        if self.n < 1 or not self.C > 0:
            raise ValueError("need n >= 1 and C > 0")
        if callable(query_oracle):
            self._oracle = query_oracle
        else:
            arr = np.asarray(query_oracle, dtype=np.float64).reshape(-1)
            if arr.size != self.n:
                raise ValueError("vector length does not match n")
            self._oracle = lambda i: arr[np.asarray(i) - 1]
        self.stats = AccessStats()
        if norm is None:
            # no norm supplied: read every entry once
            allv = self._fetch(np.arange(self.n, dtype=np.int64))
            norm = math.sqrt(float(np.sum(allv * allv)))
        self._norm = float(norm)

    def _fetch(self, idx0):
        self.stats.add(n_queries=idx0.size)
        return np.asarray(self._oracle(idx0 + 1), dtype=np.float64).reshape(-1)

    def _query0(self, idx0):
        return self._fetch(idx0)

    def _sample0(self, rng, m):
        if not self._norm > 0.0:
            raise EmptySupport("cannot sample from a zero vector")
        scale = self.n / (self.C * self._norm * self._norm)
        found = []
        remaining = m
        while remaining:
            batch = int(math.ceil(1.25 * self.C * remaining)) + 16
            prop = rng.integers(0, self.n, size=batch)
            u = rng.random(batch)
            x = np.asarray(self._oracle(prop + 1), dtype=np.float64).reshape(-1)
            p = scale * x * x
            acc = np.flatnonzero(u < p)
            if acc.size >= remaining:
                used = int(acc[remaining - 1]) + 1
                acc = acc[:remaining]
            else:
                used = batch
            over = np.flatnonzero(p[:used] > 1.0 + 1e-12)
            self.stats.add(n_queries=used, n_attempts=used)
            if over.size:
                j = int(over[0])
                raise AcceptanceBoundViolated(int(prop[j]) + 1, float(p[j]))
            found.append(prop[acc])
            remaining -= acc.size
        self.stats.add(n_samples=m)
        return np.concatenate(found)

    def _norm_value(self):
        return self._norm


def build_uniform_rejection(query_oracle, n, C, norm=None):
    """Rejection-sampling handle; ``C`` must bound ``max_i n x_i**2 / ||x||**2``.

    ``query_oracle`` is either a callable mapping 1-based index arrays to
    entries, or the vector itself. Without ``norm`` every entry is read once
    to compute it.
    """
    return UniformRejectionVector(query_oracle, n, C, norm=norm)


class IntegrationOracle:
    """Callable ``I(s, t) = sum_{i=s..t} x_i**2`` over 1-based inclusive ranges.

    ``integrate`` receives numpy integer arrays ``s`` and ``t`` and must
    return an array of sums; pass ``vectorized=False`` for a scalar function.
    ``entry`` optionally provides 1-based entry queries.
    """

    def __init__(self, integrate, entry=None, vectorized=True):
        self._integrate = integrate if vectorized else np.vectorize(integrate, otypes=[float])
        self.entry = entry

    def __call__(self, s, t):
        return np.asarray(self._integrate(s, t), dtype=np.float64)

    @classmethod
    def from_vector(cls, x):
        """Exact oracle for an explicit vector, via prefix sums."""
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        prefix = np.concatenate([[0.0], np.cumsum(x * x)])

        def integrate(s, t):
            return prefix[np.asarray(t)] - prefix[np.asarray(s) - 1]

        return cls(integrate, entry=lambda i: x[np.asarray(i) - 1])


class IntegrationVector(SqHandle):
    """SQ access driven by an integration oracle instead of a stored tree.

    Sampling descends the implicit dyadic tree over ``[1, 2**L]``,
    ``L = ceil(log2 n)``, with one oracle call per level for the left child's
    mass; the right child's mass is the parent's minus the left.
    """

    def __init__(self, oracle, n):
        self.n = int(n)
        if self.n < 1:
            raise ValueError("dimension must be at least 1")
        self.oracle = oracle
        self.stats = AccessStats()
        self.levels = (self.n - 1).bit_length()
        total = float(oracle(np.array([1]), np.array([self.n]))[0])
        self.stats.add(n_oracle_calls=1)
        if total < 0:
            raise InconsistentOracle(f"I(1, n) = {total} is negative")
        self._total = total

    def _query0(self, idx0):
        if self.oracle.entry is None:
            raise TypeError("this integration oracle provides no entry queries")
        self.stats.add(n_queries=idx0.size)
        return np.asarray(self.oracle.entry(idx0 + 1), dtype=np.float64).reshape(-1)

    def _sample0(self, rng, m):
        if not self._total > 0.0:
            raise EmptySupport("cannot sample from a zero vector")
        mass = rng.random(m) * self._total
        parent = np.full(m, self._total)
        lo = np.ones(m, dtype=np.int64)
        width = 1 << self.levels
        for _ in range(self.levels):
            half = width // 2
            mid = lo + half - 1
            left = self.oracle(lo, np.minimum(mid, self.n))
            p = left / parent
            if np.any((p < -ORACLE_TOL) | (p > 1.0 + ORACLE_TOL)):
                bad = int(np.flatnonzero((p < -ORACLE_TOL) | (p > 1.0 + ORACLE_TOL))[0])
                raise InconsistentOracle(
                    f"branch probability {p[bad]:.6g} at range [{lo[bad]}, {lo[bad] + width - 1}]"
                )
            right = parent - left
            right_empty = mid >= self.n
            go_right = ~right_empty & (((mass >= left) & (right > 0.0)) | (left <= 0.0))
            mass = np.where(go_right, mass - left, mass)
            parent = np.where(go_right, right, left)
            lo = np.where(go_right, mid + 1, lo)
            width = half
        self.stats.add(n_samples=m, n_oracle_calls=m * self.levels)
        return lo - 1

    def _norm_value(self):
        return math.sqrt(self._total)


def build_from_integration(oracle, n):
    """SQ access from an :class:`IntegrationOracle`; O(log n) calls per sample."""
    return IntegrationVector(oracle, n)


class _RowView(SqHandle):
    """One row of an :class:`SqMatrix`, sharing the matrix's storage and stats."""

    def __init__(self, mat, i0):
        self._mat = mat
        self._i0 = i0
        self.n = mat.n
        self.stats = mat.stats

    def _query0(self, idx0):
        rows = np.full(idx0.size, self._i0, dtype=np.int64)
        return self._mat._query0(rows, idx0)

    def _sample0(self, rng, m):
        rows = np.full(m, self._i0, dtype=np.int64)
        return self._mat._sample_in_rows0(rows, rng)

    def _norm_value(self):
        return float(self._mat._row_norm_values[self._i0])


class SqMatrix:
    """SQ access to an ``m x n`` matrix: its rows plus the vector of row norms.

    Rows are stored once in ``data`` with one weight tree each. A matrix may
    be a view that selects and rescales base rows: row ``r`` is
    ``row_scale[r] * data[row_map[r]]``.
    """

    def __init__(self, data, trees, row_map, row_scale, row_norms, stats=None):
        self._data = data
        self._trees = trees
        self.row_map = np.ascontiguousarray(row_map, dtype=np.int64)
        self.row_scale = np.ascontiguousarray(row_scale, dtype=np.float64)
        self.row_norms = row_norms
        self.m = self.row_map.size
        self.n = data.shape[1]
        self._base_norms = np.sqrt(trees[:, 1])
        self._row_norm_values = self._base_norms[self.row_map] * np.abs(self.row_scale)
        self._depth = (trees.shape[1] // 2).bit_length() - 1
        self.stats = AccessStats() if stats is None else stats

    @property
    def shape(self):
        return (self.m, self.n)

    def row(self, i):
        """SQ handle for the 1-based row ``i``."""
        (i0,) = _as_index_array(i, self.m)
        return _RowView(self, int(i0))

    @property
    def row_handles(self):
        return [_RowView(self, r) for r in range(self.m)]

    def query(self, i, j):
        i0 = _as_index_array(i, self.m)
        j0 = _as_index_array(j, self.n)
        i0, j0 = np.broadcast_arrays(i0, j0)
        vals = self._query0(i0, j0)
        if np.ndim(i) == 0 and np.ndim(j) == 0:
            return float(vals[0])
        return vals

    def frobenius(self):
        return self.row_norms.norm()

    def row_norm(self, i):
        return self.row_norms.query(i)

    def sample_row(self, rng, size=None):
        return self.row_norms.sample(rng, size)

    def sample_in_row(self, i, rng, size=None):
        return self.row(i).sample(rng, size)

    def dense(self):
        """Materialize the matrix (uncounted; for oracles and tests)."""
        return self._data[self.row_map] * self.row_scale[:, None]

    def scaled_view(self, rows0, scale, row_norms):
        """Matrix whose row ``r`` is ``scale[r]`` times row ``rows0[r]`` of this one."""
        rows0 = np.asarray(rows0, dtype=np.int64)
        return SqMatrix(
            self._data,
            self._trees,
            self.row_map[rows0],
            self.row_scale[rows0] * np.asarray(scale, dtype=np.float64),
            row_norms,
        )

    def _query0(self, rows0, cols0):
        self.stats.add(n_queries=np.size(rows0))
        return self._data[self.row_map[rows0], cols0] * self.row_scale[rows0]

    def _block0(self, rows0, cols0):
        """Dense ``len(rows0) x len(cols0)`` block of entries, counted."""
        self.stats.add(n_queries=len(rows0) * len(cols0))
        block = self._data[np.ix_(self.row_map[rows0], cols0)]
        return block * self.row_scale[rows0][:, None]

    def _sample_rows0(self, rng, m):
        return self.row_norms._sample0(rng, m)

    def _sample_in_rows0(self, rows0, rng):
        rows0 = np.asarray(rows0, dtype=np.int64)
        if rows0.size and np.any(self._row_norm_values[rows0] <= 0.0):
            raise EmptySupport("cannot sample from a zero row")
        out = kernels.descend_rows(self._trees, self.row_map[rows0], rng.random(rows0.size))
        self.stats.add(n_samples=rows0.size, n_node_visits=rows0.size * self._depth)
        return out

    def __repr__(self):
        return f"SqMatrix(m={self.m}, n={self.n})"


def build_matrix(A):
    """SQ access to a dense matrix; O(mn) construction."""
    A = np.array(A, dtype=np.float64, ndmin=2, order="C")
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError("expected a nonempty 2-D matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("entries must be finite")
    trees = kernels.build_tree(A * A)
    if trees.ndim == 1:
        trees = trees.reshape(1, -1)
    row_norms = SqVector(A.shape[0], np.sqrt(trees[:, 1]))
    m = A.shape[0]
    return SqMatrix(A, trees, np.arange(m), np.ones(m), row_norms)
