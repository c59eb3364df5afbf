"""Pure numpy implementations of the sampling kernels.

Every function here has a compiled twin in ``_kernels.pyx`` with the same
signature. The two are written to perform the same floating-point
operations in the same order, so for identical inputs they return
identical outputs.

Trees use the implicit heap layout: node 1 is the root, node ``p`` has
children ``2p`` and ``2p + 1``, and leaf ``i`` lives at ``cap + i`` where
``cap`` is the smallest power of two not below the number of leaves.
"""
import numpy as np


def capacity(n):
    cap = 1
    while cap < n:
        cap <<= 1
    return cap


def build_tree(weights):
    """Sum tree over nonnegative leaf weights.

    ``weights`` may be 1-D (one tree) or 2-D (one tree per row). Returns an
    array with trailing dimension ``2 * cap``; slot 0 is unused.
    """
    w = np.ascontiguousarray(weights, dtype=np.float64)
    n = w.shape[-1]
    cap = capacity(max(n, 1))
    tree = np.zeros(w.shape[:-1] + (2 * cap,), dtype=np.float64)
    tree[..., cap:cap + n] = w
    hi = cap
    while hi > 1:
        lo = hi // 2
        tree[..., lo:hi] = tree[..., 2 * lo:2 * hi:2] + tree[..., 2 * lo + 1:2 * hi:2]
        hi = lo
    return tree


def _depth(width):
    cap = width // 2
    return cap.bit_length() - 1


def descend(tree, u):
    """Leaf indices for uniforms ``u`` in [0, 1), one descent per draw."""
    u = np.asarray(u, dtype=np.float64)
    mass = u * tree[1]
    idx = np.ones(u.shape, dtype=np.int64)
    for _ in range(_depth(tree.shape[0])):
        left = tree[2 * idx]
        right = tree[2 * idx + 1]
        go_right = ((mass >= left) & (right > 0.0)) | (left <= 0.0)
        mass = np.where(go_right, mass - left, mass)
        idx = 2 * idx + go_right
    return idx - tree.shape[0] // 2


def descend_rows(trees, rows, u):
    """Like :func:`descend`, draw ``t`` descending the tree in row ``rows[t]``."""
    u = np.asarray(u, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.int64)
    mass = u * trees[rows, 1]
    idx = np.ones(u.shape, dtype=np.int64)
    for _ in range(_depth(trees.shape[1])):
        left = trees[rows, 2 * idx]
        right = trees[rows, 2 * idx + 1]
        go_right = ((mass >= left) & (right > 0.0)) | (left <= 0.0)
        mass = np.where(go_right, mass - left, mass)
        idx = 2 * idx + go_right
    return idx - trees.shape[1] // 2


def matvec_entries(data, row_map, row_scale, w, s_idx):
    """``(Vw)_s`` and ``sum_j (V_sj w_j)^2`` for each ``s`` in ``s_idx``.

    ``V_sj = data[row_map[j], s] * row_scale[j]``. Terms are accumulated in
    index order ``j = 0, 1, ...``.
    """
    s_idx = np.asarray(s_idx, dtype=np.int64)
    vw = np.zeros(s_idx.shape[0], dtype=np.float64)
    sq = np.zeros(s_idx.shape[0], dtype=np.float64)
    for j in range(row_map.shape[0]):
        t = data[row_map[j], s_idx] * row_scale[j] * w[j]
        vw += t
        sq += t * t
    return vw, sq


def rejection_attempts(col_tree, trees, data, row_map, row_scale, w, u):
    """Run one rejection-sampling attempt per row of ``u`` (shape (N, 3)).

    Column ``i`` is drawn from ``col_tree`` with ``u[:, 0]``, row ``s`` from
    the tree of ``row_map[i]`` with ``u[:, 1]``, and ``s`` is accepted when
    ``u[:, 2] < (Vw)_s^2 / (k * sum_j (V_sj w_j)^2)``.

    Returns ``(out, max_ratio)`` where ``out[t]`` is the accepted row or -1.
    Each distinct ``s`` in the batch is evaluated once.
    """
    k = row_map.shape[0]
    cols = descend(col_tree, u[:, 0])
    s = descend_rows(trees, row_map[cols], u[:, 1])
    uniq, inv = np.unique(s, return_inverse=True)
    vw, sq = matvec_entries(data, row_map, row_scale, w, uniq)
    ratio = np.zeros_like(vw)
    ok = sq > 0.0
    ratio[ok] = vw[ok] * vw[ok] / (k * sq[ok])
    ratio = ratio[inv]
    out = np.where(u[:, 2] < ratio, s, -1)
    max_ratio = float(ratio.max()) if ratio.size else 0.0
    return out, max_ratio


def centroid_estimates(mt_tree, mt_vals, u_tree, u_vals, v_trees, v_data, v_row_map,
                       coef, w, norm_a_sq, u):
    """Draw ``(i, j, k)`` from the flattened tensor ``a`` and evaluate ``b ||a||**2 / a``.

    Row 0 of the implicit matrix ``M`` is ``coef[0] * u_vals``; row ``r >= 1``
    is ``coef[r] * v_data[v_row_map[r - 1]]``. ``j`` and ``k`` descend
    ``mt_tree`` with ``u[:, 0]`` and ``u[:, 1]``; ``i`` descends row ``j``'s
    tree with ``u[:, 2]``. Returns ``(z, j, k, i)``, all 0-based.
    """
    j = descend(mt_tree, u[:, 0])
    k = descend(mt_tree, u[:, 1])
    i = np.empty(j.size, dtype=np.int64)
    top = j == 0
    i[top] = descend(u_tree, u[top, 2])
    rest = ~top
    i[rest] = descend_rows(v_trees, v_row_map[j[rest] - 1], u[rest, 2])
    src_j = np.where(top, u_vals[i], v_data[v_row_map[np.maximum(j - 1, 0)], i])
    src_k = np.where(k == 0, u_vals[i], v_data[v_row_map[np.maximum(k - 1, 0)], i])
    a = (src_j * coef[j]) * mt_vals[k]
    b = ((w[j] * w[k]) * (src_k * coef[k])) / mt_vals[k]
    return (b * norm_a_sq) / a, j, k, i
