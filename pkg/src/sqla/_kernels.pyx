# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernels.

Same contracts as ``_kernels_py``; see that module for the tree layout.
Loops here visit terms in the same order as the numpy versions so the two
backends agree bit for bit.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t

cnp.import_array()


def capacity(Py_ssize_t n):
    cdef Py_ssize_t cap = 1
    while cap < n:
        cap <<= 1
    return cap


cdef inline Py_ssize_t _depth(Py_ssize_t width) nogil:
    cdef Py_ssize_t cap = width // 2
    cdef Py_ssize_t d = 0
    while cap > 1:
        cap >>= 1
        d += 1
    return d


def build_tree(weights):
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if w.ndim == 1:
        return _build_2d(w.reshape(1, -1))[0]
    return _build_2d(w)


cdef _build_2d(double[:, ::1] w):
    cdef Py_ssize_t m = w.shape[0], n = w.shape[1]
    cdef Py_ssize_t cap = capacity(n if n > 0 else 1)
    tree_arr = np.zeros((m, 2 * cap), dtype=np.float64)
    cdef double[:, ::1] t = tree_arr
    cdef Py_ssize_t r, i, node
    with nogil:
        for r in range(m):
            for i in range(n):
                t[r, cap + i] = w[r, i]
            node = cap - 1
            while node >= 1:
                t[r, node] = t[r, 2 * node] + t[r, 2 * node + 1]
                node -= 1
    return tree_arr


cdef inline Py_ssize_t _descend_one(const double* tree, Py_ssize_t depth,
                                    double u) nogil:
    cdef double mass = u * tree[1]
    cdef Py_ssize_t idx = 1, level
    cdef double left, right
    for level in range(depth):
        left = tree[2 * idx]
        right = tree[2 * idx + 1]
        if (mass >= left and right > 0.0) or left <= 0.0:
            mass = mass - left
            idx = 2 * idx + 1
        else:
            idx = 2 * idx
    return idx


def descend(const double[::1] tree, u):
    cdef const double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t n = uu.shape[0], t
    cdef Py_ssize_t cap = tree.shape[0] // 2
    cdef Py_ssize_t depth = _depth(tree.shape[0])
    out_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    with nogil:
        for t in range(n):
            out[t] = _descend_one(&tree[0], depth, uu[t]) - cap
    return out_arr


def descend_rows(const double[:, ::1] trees, rows, u):
    cdef const double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef const int64_t[::1] rr = np.ascontiguousarray(rows, dtype=np.int64)
    cdef Py_ssize_t n = uu.shape[0], t
    cdef Py_ssize_t cap = trees.shape[1] // 2
    cdef Py_ssize_t depth = _depth(trees.shape[1])
    out_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    with nogil:
        for t in range(n):
            out[t] = _descend_one(&trees[rr[t], 0], depth, uu[t]) - cap
    return out_arr


cdef inline void _entry_sums(const double[:, ::1] data, const int64_t[::1] row_map,
                             const double[::1] row_scale, const double[::1] w,
                             Py_ssize_t s, double* vw, double* sq) nogil:
    cdef Py_ssize_t j, k = row_map.shape[0]
    cdef double acc = 0.0, acc2 = 0.0, term
    for j in range(k):
        term = data[row_map[j], s] * row_scale[j] * w[j]
        acc = acc + term
        acc2 = acc2 + term * term
    vw[0] = acc
    sq[0] = acc2


def matvec_entries(const double[:, ::1] data, const int64_t[::1] row_map,
                   const double[::1] row_scale, const double[::1] w, s_idx):
    cdef const int64_t[::1] ss = np.ascontiguousarray(s_idx, dtype=np.int64)
    cdef Py_ssize_t n = ss.shape[0], t
    vw_arr = np.empty(n, dtype=np.float64)
    sq_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] vw = vw_arr
    cdef double[::1] sq = sq_arr
    with nogil:
        for t in range(n):
            _entry_sums(data, row_map, row_scale, w, ss[t], &vw[t], &sq[t])
    return vw_arr, sq_arr


def rejection_attempts(const double[::1] col_tree, const double[:, ::1] trees,
                       const double[:, ::1] data, const int64_t[::1] row_map,
                       const double[::1] row_scale, const double[::1] w,
                       const double[:, ::1] u):
    cdef Py_ssize_t n = u.shape[0], t, col, s
    cdef Py_ssize_t k = row_map.shape[0]
    cdef Py_ssize_t col_cap = col_tree.shape[0] // 2
    cdef Py_ssize_t col_depth = _depth(col_tree.shape[0])
    cdef Py_ssize_t row_cap = trees.shape[1] // 2
    cdef Py_ssize_t row_depth = _depth(trees.shape[1])
    cdef double vw, sq, ratio, max_ratio = 0.0
    out_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    with nogil:
        for t in range(n):
            col = _descend_one(&col_tree[0], col_depth, u[t, 0]) - col_cap
            s = _descend_one(&trees[row_map[col], 0], row_depth, u[t, 1]) - row_cap
            _entry_sums(data, row_map, row_scale, w, s, &vw, &sq)
            if sq > 0.0:
                ratio = vw * vw / (k * sq)
            else:
                ratio = 0.0
            if ratio > max_ratio:
                max_ratio = ratio
            if u[t, 2] < ratio:
                out[t] = s
            else:
                out[t] = -1
    return out_arr, max_ratio


def centroid_estimates(const double[::1] mt_tree, const double[::1] mt_vals,
                       const double[::1] u_tree, const double[::1] u_vals,
                       const double[:, ::1] v_trees, const double[:, ::1] v_data,
                       const int64_t[::1] v_row_map, const double[::1] coef,
                       const double[::1] w, double norm_a_sq, const double[:, ::1] u):
    cdef Py_ssize_t m = u.shape[0], t, j, k, i
    cdef Py_ssize_t mt_cap = mt_tree.shape[0] // 2
    cdef Py_ssize_t mt_depth = _depth(mt_tree.shape[0])
    cdef Py_ssize_t row_cap = v_trees.shape[1] // 2
    cdef Py_ssize_t row_depth = _depth(v_trees.shape[1])
    cdef double src_j, src_k, a, b
    z_arr = np.empty(m, dtype=np.float64)
    j_arr = np.empty(m, dtype=np.int64)
    k_arr = np.empty(m, dtype=np.int64)
    i_arr = np.empty(m, dtype=np.int64)
    cdef double[::1] z = z_arr
    cdef int64_t[::1] jo = j_arr
    cdef int64_t[::1] ko = k_arr
    cdef int64_t[::1] io = i_arr
    with nogil:
        for t in range(m):
            j = _descend_one(&mt_tree[0], mt_depth, u[t, 0]) - mt_cap
            k = _descend_one(&mt_tree[0], mt_depth, u[t, 1]) - mt_cap
            if j == 0:
                i = _descend_one(&u_tree[0], row_depth, u[t, 2]) - row_cap
                src_j = u_vals[i]
            else:
                i = _descend_one(&v_trees[v_row_map[j - 1], 0], row_depth, u[t, 2]) - row_cap
                src_j = v_data[v_row_map[j - 1], i]
            if k == 0:
                src_k = u_vals[i]
            else:
                src_k = v_data[v_row_map[k - 1], i]
            a = (src_j * coef[j]) * mt_vals[k]
            b = ((w[j] * w[k]) * (src_k * coef[k])) / mt_vals[k]
            z[t] = (b * norm_a_sq) / a
            jo[t] = j
            ko[t] = k
            io[t] = i
    return z_arr, j_arr, k_arr, i_arr
