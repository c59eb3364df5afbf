import math

import numpy as np
import pytest

from sqla import (
    LowRankParams,
    build_matrix,
    dense_svd,
    load_description,
    low_rank_approx,
    reconstruct_D_dense,
    save_description,
    sq_access_to_S,
)
from sqla.errors import InvalidEpsilon
from sqla.oracle import exact_svd
from sqla.synth import planted


def _diag_embed(vals, n=50):
    A = np.zeros((n, n))
    A[np.arange(len(vals)), np.arange(len(vals))] = vals
    return A


def test_diag_example():
    A = _diag_embed([10.0, 1.0])
    target = _diag_embed([10.0, 0.0])
    ok = 0
    for seed in range(20):
        d = low_rank_approx(build_matrix(A), LowRankParams(5.0, 0.05, 0.05, q_override=500),
                            np.random.default_rng(seed))
        D = reconstruct_D_dense(A, d)
        ok += (d.ell == 1 and abs(d.sigma_hat[0] - 10) <= 0.5
               and np.linalg.norm(D - target) <= 0.1 * np.linalg.norm(A))
    assert ok >= 18


def test_rank_one(rng):
    u, v = rng.standard_normal(40), rng.standard_normal(30)
    A = 8 * np.outer(u / np.linalg.norm(u), v / np.linalg.norm(v))
    d = low_rank_approx(build_matrix(A), LowRankParams(4.0, 0.05, 0.05, q_override=300), rng)
    assert np.linalg.norm(A - reconstruct_D_dense(A, d)) <= 0.1 * np.linalg.norm(A)


def test_threshold_above_spectrum(rng):
    A = rng.standard_normal((20, 10))
    d = low_rank_approx(build_matrix(A), LowRankParams(2 * np.linalg.norm(A), 0.05, 0.05,
                                                        q_override=50), rng)
    assert d.ell == 0
    assert np.all(reconstruct_D_dense(A, d) == 0)


def test_description_invariants(rng):
    A, _, _ = planted(60, 40, [6.0, 4.0, 2.0], 0.05, rng)
    fro = np.linalg.norm(A)
    d = low_rank_approx(build_matrix(A), LowRankParams(3.0, 0.05, 0.05, q_override=400), rng)
    S = sq_access_to_S(d)
    Sd = S.dense()
    assert np.sum(Sd * Sd) == pytest.approx(fro ** 2, rel=1e-12)
    assert S.frobenius() == build_matrix(A).frobenius()
    assert np.allclose(d.U.T @ d.U, np.eye(d.ell), atol=1e-8)
    assert np.all(d.sigma_hat > 3.0)
    r = 7
    i = d.row_indices[r - 1]
    j = 5
    expected = A[i - 1, j - 1] * fro / (math.sqrt(d.q) * np.linalg.norm(A[i - 1]))
    assert S.query(r, j) == pytest.approx(expected, rel=1e-12)
    assert np.all((d.col_indices >= 1) & (d.col_indices <= 40))


def test_S_rows_uniform(rng):
    A = rng.standard_normal((30, 10))
    d = low_rank_approx(build_matrix(A), LowRankParams(1.0, 0.1, 0.1, q_override=8), rng)
    s = sq_access_to_S(d).sample_row(rng, 10_000)
    assert np.all(np.abs(np.bincount(s - 1, minlength=8) / 10_000 - 0.125) <= 0.02)


def test_merged_columns_match_literal_W(rng):
    """The merged SVD equals the SVD of W built column by column."""
    A, _, _ = planted(40, 30, [5.0, 3.0], 0.1, rng)
    d = low_rank_approx(build_matrix(A), LowRankParams(1.0, 0.1, 0.1, q_override=60),
                        np.random.default_rng(4))
    S = d.S.dense()
    q = d.q
    F = np.array([np.mean(S[:, j - 1] ** 2 / np.sum(S ** 2, axis=1)) for j in d.col_indices])
    W = S[:, d.col_indices - 1] / np.sqrt(q * F)
    s = np.linalg.svd(W, compute_uv=False)
    assert np.allclose(d.sigma_hat, s[:d.ell], rtol=1e-10)


def test_projection_near_orthonormal(rng):
    A, _, _ = planted(100, 80, [10.0, 8.0, 6.0], 0.01, rng)
    d = low_rank_approx(build_matrix(A), LowRankParams(4.0, 0.05, 0.05, q_override=1500), rng)
    V = d.v_hat_dense()
    assert np.linalg.norm(V.T @ V - np.eye(d.ell)) <= 3 * 0.05


def test_eps_range():
    A = build_matrix(np.eye(4))
    with pytest.raises(InvalidEpsilon):
        low_rank_approx(A, LowRankParams(1.0, 0.3, 0.1), np.random.default_rng(0))
    with pytest.raises(InvalidEpsilon):
        LowRankParams(1.0, 0.0, 0.1)


def test_theoretical_q():
    p = LowRankParams(1.0, 0.1, 0.1)
    assert p.q(2.0) == math.ceil(4 ** 4 / 0.01 * math.log(10))
    with pytest.raises(ValueError):
        p.q(10.0)
    assert LowRankParams(1.0, 0.2, 0.5).q(1.0) == math.ceil(1 / 0.04 * math.log(2))


def test_dense_svd_examples(rng):
    U, s, Vt = dense_svd(np.diag([3.0, 2.0]))
    assert np.allclose(s, [3.0, 2.0])
    assert np.allclose(np.abs(U), np.eye(2))
    assert np.all(dense_svd(np.zeros((3, 3)))[1] == 0)
    W = rng.standard_normal((20, 20))
    U, s, Vt = dense_svd(W)
    assert np.linalg.norm((U * s) @ Vt - W) <= 1e-9 * np.linalg.norm(W)
    assert np.allclose(U.T @ U, np.eye(20), atol=1e-10)
    eig = np.sort(np.linalg.eigvalsh(W.T @ W))[::-1]
    assert np.allclose(s ** 2, eig, atol=1e-8)


def test_concentration_and_hoffman_wielandt():
    ok_s = ok_hw = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        A, _, _ = planted(120, 100, [8.0, 5.0, 3.0], 0.02, rng)
        fro2 = np.sum(A * A)
        q = 500
        d = low_rank_approx(build_matrix(A), LowRankParams(2.0, 0.05, 0.05, q_override=q), rng)
        S = d.S.dense()
        ok_s += np.linalg.norm(A.T @ A - S.T @ S) <= fro2 / math.sqrt(q)
        sa = exact_svd(A)[1][:d.ell]
        ok_hw += np.sqrt(np.sum((sa ** 2 - d.sigma_hat ** 2) ** 2)) <= 2 * fro2 / math.sqrt(q)
    assert ok_s >= 18 and ok_hw >= 18


def test_save_load_roundtrip(tmp_path, rng):
    A = rng.standard_normal((30, 12))
    Am = build_matrix(A)
    d = low_rank_approx(Am, LowRankParams(1.0, 0.1, 0.1, q_override=40), rng)
    save_description(tmp_path / "d.sqm", d)
    e = load_description(tmp_path / "d.sqm", Am)
    assert np.array_equal(e.U, d.U) and np.array_equal(e.sigma_hat, d.sigma_hat)
    assert np.array_equal(e.row_indices, d.row_indices)
    assert np.array_equal(e.col_indices, d.col_indices)
    assert np.array_equal(e.S.dense(), d.S.dense())


def test_determinism():
    A = np.random.default_rng(0).standard_normal((30, 20))
    p = LowRankParams(1.0, 0.1, 0.1, q_override=50)
    a = low_rank_approx(build_matrix(A), p, np.random.default_rng(3))
    b = low_rank_approx(build_matrix(A), p, np.random.default_rng(3))
    assert np.array_equal(a.sigma_hat, b.sigma_hat) and np.array_equal(a.U, b.U)
