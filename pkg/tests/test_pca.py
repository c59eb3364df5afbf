import math
import warnings

import numpy as np
import pytest

from conftest import l2_dist, tv_distance
from sqla import PcaParams, build_matrix, eigvec_access, eigvec_error_oracle, pca
from sqla.errors import InsufficientRank, InvalidEpsilon
from sqla.pca import pca_rows, write_pca_csv
from sqla.synth import planted


def _params(*args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return PcaParams(*args, **kwargs)


def _diag(vals, n=30):
    A = np.zeros((n, n))
    A[np.arange(len(vals)), np.arange(len(vals))] = vals
    return A


def test_param_validation():
    with pytest.raises(InvalidEpsilon):
        _params(1.0, 1, 0.1, 0.2, 0.1, 0.005)
    with pytest.warns(UserWarning, match="outside stated theorem range"):
        PcaParams(1.0, 1, 0.5, 0.05, 0.005, 0.005)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        PcaParams(1.0, 1, 0.5, 0.005, 0.005, 0.005)


def test_derived_eps():
    p = _params(2.0, 2, 0.28, 0.005, 0.2, 0.005)
    K = 25 / 4
    assert p.eps(5.0) == pytest.approx(min(0.005 * K ** 1.5, 0.04 * 0.28, 0.25 / math.sqrt(K)))
    assert p.sigma_prime(5.0) == pytest.approx(2.0 - p.eps(5.0) * 5.0)


def test_diagonal_example():
    A = _diag([4.0, 3.0])
    p = _params(2.0, 2, 0.28, 0.05, 0.1, 0.005, q_override=2000)
    ok = 0
    for seed in range(20):
        res = pca(build_matrix(A), p, np.random.default_rng(seed))
        d = eigvec_error_oracle(A, res)
        ok += (abs(res.sigma_hat_sq[0] - 16) <= 0.05 * 25 and abs(res.sigma_hat_sq[1] - 9) <= 0.05 * 25
               and np.all(d.errors <= 0.1))
    assert ok >= 18


def test_diagonal_eigvec_sampling(rng):
    A = _diag([4.0, 3.0])
    res = pca(build_matrix(A), _params(2.0, 2, 0.28, 0.05, 0.1, 0.005, q_override=500), rng)
    s = eigvec_access(res, 1).sample(rng, 10_000)
    assert np.mean(s == 1) >= 1 - 2 * 0.1
    s2 = res.eigvec(2).sample(rng, 1000)
    assert np.mean(s2 == 2) >= 1 - 2 * 0.1


def test_eigvec_query_matches_dense(rng):
    A, _, _ = planted(40, 30, [6.0, 4.0], 0.05, rng)
    res = pca(build_matrix(A), _params(3.0, 2, 0.1, 0.005, 0.2, 0.005, q_override=300), rng)
    V = res.desc.v_hat_dense()
    for i in (1, 2):
        h = eigvec_access(res, i)
        assert np.allclose(h.query(np.arange(1, 31)), V[:, i - 1], atol=1e-10, rtol=0)
    with pytest.raises(IndexError):
        eigvec_access(res, 3)


def test_eigvec_norm_slack():
    # q is kept small: the norm estimate runs ~ (q / nu**2) C ln(1/delta) attempts
    A = _diag([4.0, 3.0])
    p = _params(2.0, 2, 0.28, 0.05, 0.1, 0.005, q_override=16)
    res = pca(build_matrix(A), p, np.random.default_rng(5))
    h = eigvec_access(res, 1)
    exact = np.linalg.norm(res.desc.v_hat_dense()[:, 0])
    assert exact <= h.norm() < 1.01 * exact


def test_eigvec_norm_near_one():
    # |norm - 1| <= eps needs the theoretical q; at desk scale check against eps_v
    A = _diag([4.0, 3.0])
    p = _params(2.0, 2, 0.28, 0.05, 0.1, 0.005, q_override=2000)
    ok = 0
    for seed in range(20):
        res = pca(build_matrix(A), p, np.random.default_rng(seed))
        ok += np.all(np.abs(np.linalg.norm(res.desc.v_hat_dense(), axis=0) - 1) <= 0.1)
    assert ok >= 18


def test_rank3_ensemble():
    ok = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        A, _, _ = planted(100, 100, [10.0, 7.0, 4.0], 0.0, rng)
        fro2 = np.sum(A * A)
        res = pca(build_matrix(A), _params(3.0, 3, 0.09, 0.02, 0.2, 0.005, q_override=8000), rng)
        d = eigvec_error_oracle(A, res)
        ok += (np.all(np.abs(res.sigma_hat_sq - d.sigma_exact_sq) <= 0.02 * fro2)
               and np.all(d.errors <= 0.2))
    assert ok >= 18


def test_rank1_overlap():
    ok = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        A, _, _ = planted(50, 40, [5.0], 0.0, rng)
        res = pca(build_matrix(A), _params(2.0, 1, 0.9, 0.005, 0.1, 0.005, q_override=200), rng)
        d = eigvec_error_oracle(A, res)
        ok += math.sqrt(d.overlap_sq[0]) >= 1 - 0.1 ** 2 / 2
    assert ok >= 9


def test_exact_recovery_rank1_diagonal(rng):
    A = _diag([4.0])
    res = pca(build_matrix(A), _params(2.0, 1, 0.5, 0.005, 0.1, 0.005, q_override=100), rng)
    d = eigvec_error_oracle(A, res)
    assert d.errors[0] <= 1e-6
    assert res.sigma_hat_sq[0] == pytest.approx(16.0, abs=1e-9)


def test_gap_violation_reports_diagnostics(rng):
    A = _diag([4.0, 4.0, 1.0])
    res = pca(build_matrix(A), _params(2.0, 2, 0.01, 0.005, 0.1, 0.005, q_override=300), rng)
    d = eigvec_error_oracle(A, res)
    assert d.errors.shape == (2,) and np.isfinite(d.subspace_sq)


def test_insufficient_rank(rng):
    A = _diag([4.0, 1.0])
    with pytest.raises(InsufficientRank) as info:
        pca(build_matrix(A), _params(2.0, 2, 0.3, 0.005, 0.1, 0.005, q_override=200), rng)
    assert info.value.ell == 1


def test_sampling_tv_after_sign_alignment(rng):
    A, _, _ = planted(60, 50, [8.0, 5.0], 0.0, rng)
    res = pca(build_matrix(A), _params(3.0, 2, 0.2, 0.005, 0.2, 0.005, q_override=2000), rng)
    Vt = np.linalg.svd(A)[2]
    for i in (1, 2):
        s = eigvec_access(res, i).sample(rng, 10_000)
        assert tv_distance(s, l2_dist(Vt[i - 1]), 50) <= 0.05


def test_csv_export(tmp_path, rng):
    A, _, _ = planted(30, 20, [5.0, 3.0], 0.01, rng)
    res = pca(build_matrix(A), _params(2.0, 2, 0.2, 0.005, 0.2, 0.005, q_override=200), rng)
    rows = pca_rows(res, 11)
    assert "vec_error" not in rows[0]
    write_pca_csv(tmp_path / "p.csv", res, 11, A)
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "i,sigma_hat_sq,sigma_exact_sq,vec_error,q,seed,eps,eps_sigma,eps_v,eta"
    assert len(lines) == 3
