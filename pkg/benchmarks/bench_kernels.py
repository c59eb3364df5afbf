"""Time the compiled and numpy kernel backends on the hot loops.

Usage: ``python benchmarks/bench_kernels.py [--repeat N]``. Each row reports
the best-of-N wall time for both backends and checks that their outputs agree
bit for bit.
"""
import argparse
import sys
import timeit

import numpy as np

from sqla import CentroidInstance, kernels
from sqla.core import build_matrix


def _cases(rng):
    n = 1 << 16
    w = rng.random(n)
    u = rng.random(200_000)
    V = rng.standard_normal((32, 4096))
    Vt = build_matrix(V)
    w_col = rng.standard_normal(32)
    col_tree = kernels.python_backend.build_tree(np.abs(w_col) * np.linalg.norm(V, axis=1))
    u3 = rng.random((100_000, 3))
    inst = CentroidInstance.from_dense(rng.standard_normal((50, 20)), rng.standard_normal(20))
    norm_a = float(inst.M_tilde._tree[1])
    u_c = rng.random((500_000, 3))
    return {
        "build_tree (2^16)": lambda b: b.build_tree(w),
        "descend (2e5 draws)": lambda b, t=kernels.python_backend.build_tree(w): b.descend(t, u),
        "rejection_attempts (1e5, k=32)": lambda b: b.rejection_attempts(
            col_tree, Vt._trees, Vt._data, Vt.row_map, Vt.row_scale, w_col, u3),
        "centroid_estimates (5e5)": lambda b: b.centroid_estimates(
            inst.M_tilde._tree, inst.M_tilde._values, inst._u_tree, inst._u_vals,
            inst.V._trees, inst.V._data, inst.V.row_map, inst._coef, inst.w, norm_a * norm_a,
            u_c),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if kernels.compiled_backend is None:
        print("compiled backend not built; run `pip install -e . --no-build-isolation`",
              file=sys.stderr)
        return 2
    backends = {"python": kernels.python_backend, "compiled": kernels.compiled_backend}
    print(f"{'kernel':34s} {'python_s':>10s} {'compiled_s':>11s} {'speedup':>8s} bitwise")
    for name, fn in _cases(np.random.default_rng(args.seed)).items():
        times = {k: min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat))
                 for k, b in backends.items()}
        same = _same(fn(backends["python"]), fn(backends["compiled"]))
        print(f"{name:34s} {times['python']:10.4f} {times['compiled']:11.4f} "
              f"{times['python'] / times['compiled']:8.1f} {'yes' if same else 'NO'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
