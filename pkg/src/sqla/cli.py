"""Command-line experiments: data generation, algorithm runs and sweeps.

Every run command writes one CSV row per trial (per component for ``pca``)
and exits 0 when the pass rate meets the threshold, 1 when it does not and
2 on usage or input errors. Trial ``t`` draws its randomness from child
``t`` of ``numpy.random.SeedSequence(seed)``, so output is reproducible
regardless of ``SQLA_THREADS``.
"""
import argparse
import csv
import io
import math
import os
import sys
import time
import warnings
from multiprocessing.pool import ThreadPool

import numpy as np

from . import oracle
from .centroid import CentroidInstance, centroid_distance_run
from .core import build_dense, build_matrix
from .errors import SqlaError, SpectrumViolation
from .estimators import EstimatorParams, inner_product_estimate
from .fileio import read_matrix, read_vector, write_sqm
from .lowrank import LowRankParams, low_rank_approx, reconstruct_D_dense, save_description
from .matvec import MatVecHandle
from .pca import PcaParams, eigvec_error_oracle, pca
from .synth import check_gap, parse_spectrum, planted, realized_stats

COUNTER_COLS = ("n_queries", "n_samples", "n_norm_queries")
TAIL_COLS = ("estimate", "oracle", "abs_error", "tolerance", "pass") + COUNTER_COLS + (
    "error", "wall_time_s")


class UsageError(Exception):
    pass


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def binomial_threshold(delta, trials):
    """``1 - delta`` less three binomial standard deviations."""
    return 1.0 - delta - 3.0 * math.sqrt(delta * (1.0 - delta) / trials)


def _threads():
    try:
        return max(1, int(os.environ.get("SQLA_THREADS", "1")))
    except ValueError:
        return 1


def run_trials(fn, trials, seed):
    """Call ``fn(t, rng)`` for each trial; results come back in trial order."""
    children = np.random.SeedSequence(seed).spawn(trials)
    jobs = [(t, np.random.default_rng(children[t])) for t in range(trials)]
    n = min(_threads(), trials)
    if n == 1:
        return [fn(t, r) for t, r in jobs]
    with ThreadPool(n) as pool:
        return pool.starmap(fn, jobs)


def _row(estimate, oracle_value, tolerance, passed, stats=None, error="", wall=0.0):
    stats = stats or {}
    err = abs(estimate - oracle_value) if estimate is not None and oracle_value is not None else None
    return {
        "estimate": estimate, "oracle": oracle_value, "abs_error": err, "tolerance": tolerance,
        "pass": int(bool(passed)),
        **{c: int(stats.get(c, 0)) for c in COUNTER_COLS},
        "error": error, "wall_time_s": round(wall, 6),
    }


def _sum_stats(*stats):
    out = {}
    for s in stats:
        for key, v in s.as_dict().items():
            out[key] = out.get(key, 0) + v
    return out


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows, out, head_cols):
    cols = list(head_cols) + [c for c in TAIL_COLS if c not in head_cols]
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(cols)
    for r in rows:
        writer.writerow([_fmt(r.get(c)) for c in cols])


def _emit(args, rows, head_cols):
    buf = io.StringIO()
    write_csv(rows, buf, head_cols)
    if args.output and args.output != "-":
        with open(args.output, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def _finish(args, rows, head_cols, default_threshold):
    _emit(args, rows, head_cols)
    threshold = default_threshold if args.threshold is None else args.threshold
    rate = sum(r["pass"] for r in rows) / max(1, len(rows))
    print(f"pass_rate={rate:.4f} threshold={threshold:.4f}", file=sys.stderr)
    return 0 if rate >= threshold else 1


def _timed(fn):
    def wrapper(t, rng):
        start = time.perf_counter()
        try:
            rows = fn(t, rng)
        except SqlaError as exc:
            rows = [dict(_row(None, None, None, False, error=type(exc).__name__), trial=t)]
        wall = time.perf_counter() - start
        for r in rows:
            r["wall_time_s"] = round(wall, 6)
        return rows
    return wrapper


def _flatten(results):
    return [r for rows in results for r in rows]


# ---------------------------------------------------------------- gen

def cmd_gen(args):
    spectrum = parse_spectrum(args.spectrum)
    rng = np.random.default_rng(args.seed)
    A, _, _ = planted(args.rows, args.cols, spectrum, args.noise, rng)
    stats = realized_stats(A, spectrum)
    check_gap(spectrum, stats["singular_values"])
    if args.output.endswith(".csv"):
        np.savetxt(args.output, A, delimiter=",", fmt="%.17g")
    else:
        write_sqm(args.output, A)
    top = ",".join(f"{v:.6g}" for v in stats["singular_values"][:len(spectrum)])
    print(f"frobenius={stats['frobenius']:.10g} K={stats['K']:.10g} "
          f"eta={stats['eta']:.10g} singular_values={top}")
    return 0


# ---------------------------------------------------------------- inner

def _inner_trial(args, x_fixed, y_fixed):
    params = EstimatorParams(args.eps, args.delta)

    @_timed
    def trial(t, rng):
        if x_fixed is None:
            xv = rng.standard_normal(args.dim)
            yv = rng.standard_normal(args.dim)
        else:
            xv, yv = x_fixed, y_fixed
        x = build_dense(xv)
        if args.nu:
            x = x.with_norm_slack(args.nu)
        est = inner_product_estimate(x, yv, params, rng)
        exact = oracle.exact_dot(xv, yv)
        tol = (args.eps + args.nu) * x.exact_norm * float(np.linalg.norm(yv))
        row = _row(est, exact, tol, abs(est - exact) <= tol, x.stats.as_dict())
        return [dict(row, trial=t, dim=xv.size, eps=args.eps, delta=args.delta, nu=args.nu)]
    return trial


def cmd_inner(args):
    x = y = None
    if args.x or args.y:
        if not (args.x and args.y):
            raise UsageError("--x and --y must be given together")
        x, y = read_vector(args.x), read_vector(args.y)
    elif args.dim is None:
        raise UsageError("give --dim or --x/--y")
    rows = _flatten(run_trials(_inner_trial(args, x, y), args.trials, args.seed))
    return _finish(args, rows, ("trial", "dim", "eps", "delta", "nu"),
                   binomial_threshold(args.delta, args.trials))


# ---------------------------------------------------------------- matvec

def _random_matvec(rng, rows, k, orthonormal):
    V = rng.standard_normal((rows, k))
    if orthonormal:
        V = np.linalg.qr(V)[0]
    return V, rng.standard_normal(k)


def cmd_matvec_run(args):
    @_timed
    def trial(t, rng):
        V, w = _random_matvec(rng, args.rows, args.k, args.orthonormal)
        C = oracle.exact_C(V, w)
        c_bound = C if args.c_bound is None else args.c_bound
        h = MatVecHandle(build_matrix(V.T), w, delta=args.delta, c_bound=c_bound)
        est = h.estimate_norm_sq(args.nu, rng)
        vw = oracle.exact_matvec(V, w)
        exact = float(np.sum(vw * vw))
        tol = args.nu * exact
        row = _row(est, exact, tol, abs(est - exact) <= tol, h.stats.as_dict())
        return [dict(row, trial=t, k=args.k, C=C)]
    rows = _flatten(run_trials(trial, args.trials, args.seed))
    return _finish(args, rows, ("trial", "k", "C"), binomial_threshold(args.delta, args.trials))


def loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def cmd_matvec_sweep(args):
    rows = []
    for k in args.k:
        @_timed
        def trial(t, rng, k=k):
            V, w = _random_matvec(rng, args.rows, k, True)
            C = oracle.exact_C(V, w)
            h = MatVecHandle(build_matrix(V.T), w, delta=args.delta, c_bound=C)
            before = h.stats.as_dict()["n_queries"]
            h.sample(rng, args.samples)
            per = (h.stats.as_dict()["n_queries"] - before) / args.samples
            row = _row(per, k * k * C, None, True, h.stats.as_dict())
            return [dict(row, k=k, trial=t, C=C)]
        rows.extend(_flatten(run_trials(trial, args.trials, [args.seed, k])))
    ks = np.array(args.k, dtype=float)
    med = np.array([np.median([r["estimate"] for r in rows if r["k"] == k and r["estimate"]])
                    for k in args.k])
    slope = loglog_slope(ks, med)
    print(f"slope={slope:.4f}", file=sys.stderr)
    _emit(args, rows, ("k", "trial", "C"))
    lo, hi = args.slope_range
    return 0 if lo <= slope <= hi else 1


# ---------------------------------------------------------------- lowrank

def _load_matrix(path):
    A = read_matrix(path)
    if not np.all(np.isfinite(A)):
        raise UsageError(f"{path}: non-finite entries")
    return A


def _lowrank_trial(args, A, q, fro2, tail, tol_frac):
    @_timed
    def trial(t, rng):
        Am = build_matrix(A)
        params = LowRankParams(args.sigma, args.eps, args.delta, q_override=q,
                               theta_constant=args.theta_constant)
        desc = low_rank_approx(Am, params, rng)
        D = reconstruct_D_dense(A, desc)
        est = float(np.sum((A - D) ** 2))
        best = float(tail[desc.ell]) if desc.ell < tail.size else 0.0
        tol = tol_frac * fro2
        stats = _sum_stats(Am.stats, Am.row_norms.stats, desc.S.stats)
        row = _row(est, best, tol, est <= best + tol, stats)
        if args.save_description and t == 0:
            save_description(args.save_description, desc)
        return [dict(row, trial=t, q=desc.q, ell=desc.ell)]
    return trial


def _tail_energy(A):
    s = oracle.exact_svd(A)[1]
    tail = np.concatenate([np.cumsum((s ** 2)[::-1])[::-1], [0.0]])
    return tail, float(np.sum(s ** 2))


def cmd_lowrank(args):
    A = _load_matrix(args.input)
    tail, fro2 = _tail_energy(A)
    trial = _lowrank_trial(args, A, args.q, fro2, tail, args.tol_frac)
    rows = _flatten(run_trials(trial, args.trials, args.seed))
    return _finish(args, rows, ("trial", "q", "ell"), 0.9)


# ---------------------------------------------------------------- centroid

def _centroid_trial(args, V_fixed, u_fixed, eps_abs, eps_rel):
    @_timed
    def trial(t, rng):
        if V_fixed is None:
            V = rng.standard_normal((args.n, args.d))
            u = rng.standard_normal(args.d)
        else:
            V, u = V_fixed, u_fixed
        inst = CentroidInstance(build_matrix(V), build_dense(u))
        eps = eps_abs if eps_abs is not None else eps_rel * inst.Z
        res = centroid_distance_run(inst, eps, args.delta, rng)
        exact = oracle.exact_centroid_distance(V, u)
        stats = _sum_stats(inst.V.stats, inst.u.stats)
        stats["n_samples"] = res.stats["n_samples"]
        row = _row(res.estimate, exact, eps, abs(res.estimate - exact) <= eps, stats)
        return [dict(row, trial=t, Z=inst.Z, eps=eps, samples=res.samples,
                     scale_paper=res.scale_paper, scale_computed=res.scale_computed)]
    return trial


def _centroid_inputs(args):
    if args.input:
        if not args.query:
            raise UsageError("--input needs --query")
        V = np.atleast_2d(_load_matrix(args.input))
        return V, read_vector(args.query)
    if args.n is None or args.d is None:
        raise UsageError("give --input/--query or --n/--d")
    return None, None


def _centroid_eps(args):
    if (args.eps is None) == (args.eps_rel is None):
        raise UsageError("give exactly one of --eps and --eps-rel")
    return args.eps, args.eps_rel


HEAD_CENTROID = ("trial", "Z", "eps", "samples", "scale_paper", "scale_computed")


def cmd_centroid(args):
    V, u = _centroid_inputs(args)
    eps_abs, eps_rel = _centroid_eps(args)
    rows = _flatten(run_trials(_centroid_trial(args, V, u, eps_abs, eps_rel),
                               args.trials, args.seed))
    return _finish(args, rows, HEAD_CENTROID, binomial_threshold(args.delta, args.trials))


# ---------------------------------------------------------------- pca

def cmd_pca(args):
    A = _load_matrix(args.input)
    fro2 = float(np.sum(A * A))
    with warnings.catch_warnings():
        warnings.simplefilter("default" if args.verbose else "ignore")
        params = PcaParams(args.sigma, args.k, args.eta, args.eps_sigma, args.eps_v, args.delta,
                           q_override=args.q, theta_constant=args.theta_constant)

    @_timed
    def trial(t, rng):
        Am = build_matrix(A)
        try:
            res = pca(Am, params, rng)
        except SqlaError as exc:
            # one failure row per requested component
            return [dict(_row(None, None, None, False, error=type(exc).__name__), trial=t, i=i + 1)
                    for i in range(args.k)]
        diag = eigvec_error_oracle(A, res)
        stats = _sum_stats(Am.stats, Am.row_norms.stats, res.desc.S.stats)
        tol = args.eps_sigma * fro2
        rows = []
        for i in range(res.k):
            est, exact = float(res.sigma_hat_sq[i]), float(diag.sigma_exact_sq[i])
            ok = abs(est - exact) <= tol and diag.errors[i] <= args.eps_v
            row = _row(est, exact, tol, ok, stats)
            rows.append(dict(row, trial=t, i=i + 1, vec_error=float(diag.errors[i]),
                             overlap_sq=float(diag.overlap_sq[i]), q=res.meta["q"],
                             eps=res.meta["eps"], eps_sigma=args.eps_sigma,
                             eps_v=args.eps_v, eta=args.eta))
        return rows

    rows = _flatten(run_trials(trial, args.trials, args.seed))
    head = ("trial", "i", "vec_error", "overlap_sq", "q", "eps", "eps_sigma", "eps_v", "eta")
    return _finish(args, rows, head, 0.9)


# ---------------------------------------------------------------- sweep

def cmd_sweep(args):
    rows = []
    if args.algo == "inner":
        if args.param != "eps":
            raise UsageError("inner sweeps support --param eps")
        head = ("value", "trial", "dim", "eps", "delta", "nu", "expected_samples")
        for v in args.values:
            sub = argparse.Namespace(**vars(args))
            sub.eps = v
            trial = _inner_trial(sub, None, None)
            for r in _flatten(run_trials(trial, args.trials, [args.seed, len(rows)])):
                r["value"] = v
                r["expected_samples"] = EstimatorParams(v, args.delta).total
                rows.append(r)
    elif args.algo == "lowrank":
        if args.param != "q":
            raise UsageError("lowrank sweeps support --param q")
        if args.input is None or args.sigma is None:
            raise UsageError("lowrank sweeps need --input and --sigma")
        if args.eps is None:
            args.eps = 0.05
        A = _load_matrix(args.input)
        tail, fro2 = _tail_energy(A)
        head = ("value", "trial", "q", "ell")
        for v in args.values:
            trial = _lowrank_trial(args, A, int(v), fro2, tail, args.tol_frac)
            for r in _flatten(run_trials(trial, args.trials, [args.seed, int(v)])):
                r["value"] = v
                r["excess"] = r["estimate"] - r["oracle"] if r["estimate"] is not None else None
                rows.append(r)
        head = head + ("excess",)
    else:
        if args.param != "Z":
            raise UsageError("centroid sweeps support --param Z")
        if args.eps is None:
            raise UsageError("centroid Z-sweeps need a fixed absolute --eps")
        rng0 = np.random.default_rng(args.seed)
        V0 = rng0.standard_normal((args.n, args.d))
        u0 = rng0.standard_normal(args.d)
        Z0 = float(np.sum(u0 * u0) + np.sum(V0 * V0) / args.n)
        head = ("value",) + HEAD_CENTROID
        for idx, v in enumerate(args.values):
            c = math.sqrt(v / Z0)
            trial = _centroid_trial(args, c * V0, c * u0, args.eps, None)
            for r in _flatten(run_trials(trial, args.trials, [args.seed, idx])):
                r["value"] = v
                rows.append(r)
        zs = np.array(args.values)
        med = np.array([np.median([r["n_samples"] for r in rows if r["value"] == z]) for z in zs])
        print(f"slope={loglog_slope(zs, med):.4f}", file=sys.stderr)
    default = 0.9 if args.algo == "lowrank" else binomial_threshold(args.delta, args.trials)
    return _finish(args, rows, head, default)


# ---------------------------------------------------------------- parser

def _common(p, delta=0.05):
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trials", type=_positive_int, default=1)
    p.add_argument("--delta", type=float, default=delta)
    p.add_argument("--threshold", type=float, default=None,
                   help="required pass rate (default depends on the command)")
    p.add_argument("--format", choices=["csv"], default="csv")
    p.add_argument("-o", "--output", default=None, help="CSV path (default stdout)")


def build_parser():
    parser = argparse.ArgumentParser(prog="sqla", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a matrix with a planted spectrum")
    p.add_argument("--rows", type=_positive_int, required=True)
    p.add_argument("--cols", type=_positive_int, required=True)
    p.add_argument("--spectrum", required=True, help="comma-separated, nonincreasing")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("inner", help="inner product estimation trials")
    p.add_argument("--dim", type=_positive_int)
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--nu", type=float, default=0.0)
    _common(p)
    p.set_defaults(func=cmd_inner)

    p = sub.add_parser("matvec", help="matrix-vector product sampling")
    msub = p.add_subparsers(dest="mode", required=True)
    r = msub.add_parser("run", help="norm estimation trials on random V, w")
    r.add_argument("--rows", type=_positive_int, default=100)
    r.add_argument("--k", type=_positive_int, default=5)
    r.add_argument("--nu", type=float, default=0.1)
    r.add_argument("--c-bound", type=float, default=None,
                   help="bound on C(V, w) (default: the exact value)")
    r.add_argument("--orthonormal", action="store_true")
    _common(r, delta=0.01)
    r.set_defaults(func=cmd_matvec_run)
    s = msub.add_parser("sweep", help="entry queries per sample against k")
    s.add_argument("--k", type=_int_list, default=[2, 4, 8, 16, 32])
    s.add_argument("--rows", type=_positive_int, default=100)
    s.add_argument("--samples", type=_positive_int, default=1000)
    s.add_argument("--slope-range", type=_float_list, default=[1.7, 2.3])
    _common(s, delta=1e-6)
    s.set_defaults(func=cmd_matvec_sweep)

    p = sub.add_parser("lowrank", help="threshold low-rank approximation trials")
    p.add_argument("--input", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--q", type=_positive_int, default=None)
    p.add_argument("--theta-constant", type=float, default=1.0)
    p.add_argument("--tol-frac", type=float, default=0.05)
    p.add_argument("--save-description", default=None)
    _common(p)
    p.set_defaults(func=cmd_lowrank)

    p = sub.add_parser("centroid", help="distance-to-centroid estimation trials")
    p.add_argument("--input", help="point matrix V (rows are points)")
    p.add_argument("--query", help="query vector u")
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--d", type=_positive_int)
    p.add_argument("--eps", type=float, default=None, help="absolute accuracy")
    p.add_argument("--eps-rel", type=float, default=None, help="accuracy as a multiple of Z")
    _common(p)
    p.set_defaults(func=cmd_centroid)

    p = sub.add_parser("pca", help="top-k eigenpair estimation trials")
    p.add_argument("--input", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--eps-sigma", type=float, required=True)
    p.add_argument("--eps-v", type=float, required=True)
    p.add_argument("--q", type=_positive_int, default=None)
    p.add_argument("--theta-constant", type=float, default=1.0)
    p.add_argument("--verbose", action="store_true")
    _common(p, delta=0.01)
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("sweep", help="sweep one parameter of an algorithm")
    p.add_argument("--algo", choices=["inner", "lowrank", "centroid"], required=True)
    p.add_argument("--param", choices=["eps", "q", "Z"], required=True)
    p.add_argument("--values", type=_float_list, required=True)
    p.add_argument("--dim", type=_positive_int, default=100)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--nu", type=float, default=0.0)
    p.add_argument("--input")
    p.add_argument("--sigma", type=float)
    p.add_argument("--theta-constant", type=float, default=1.0)
    p.add_argument("--tol-frac", type=float, default=0.05)
    p.add_argument("--save-description", default=None)
    p.add_argument("--n", type=_positive_int, default=50)
    p.add_argument("--d", type=_positive_int, default=20)
    _common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, SpectrumViolation, OSError, SqlaError, ValueError) as exc:
        print(f"sqla {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
