import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import tv_distance
from sqla import (
    CentroidInstance,
    FlattenedTensorAccess,
    centroid_distance_estimate,
    centroid_distance_run,
    tensor_query_a,
    tensor_query_b,
    tensor_sample_a,
)
from sqla.errors import DimensionMismatch, EmptySupport, IndexOutOfRange, InvalidEpsilon
from sqla.oracle import exact_centroid_distance


@given(st.integers(1, 8), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=40, deadline=None)
def test_reduction_identities(n, d, seed):
    r = np.random.default_rng(seed)
    V, u = r.standard_normal((n, d)), r.standard_normal(d)
    inst = CentroidInstance.from_dense(V, u)
    M, w = inst.dense_M()
    assert np.allclose(w @ M, u - V.mean(axis=0), atol=1e-12)
    assert np.sum(M * M) == pytest.approx(2.0, abs=1e-10)
    assert np.sum(inst.M_tilde.entries ** 2) == pytest.approx(2.0, abs=1e-10)
    assert inst.Z == pytest.approx(float(w @ w), rel=1e-12)
    a, b = FlattenedTensorAccess(inst).dense_a_b()
    assert a @ b == pytest.approx(exact_centroid_distance(V, u), abs=1e-10)
    assert np.linalg.norm(a) == pytest.approx(2.0, abs=1e-10)
    assert np.linalg.norm(b) == pytest.approx(inst.Z, abs=1e-10)


def test_lazy_queries_match_dense(rng):
    V, u = rng.standard_normal((3, 4)), rng.standard_normal(4)
    inst = CentroidInstance.from_dense(V, u)
    acc = FlattenedTensorAccess(inst)
    a, b = acc.dense_a_b()
    idx = np.arange(a.size)
    assert np.allclose(acc.a._query0(idx), a, atol=1e-14)
    assert np.allclose(acc.b._query0(idx), b, atol=1e-14)
    i, j, k = 2, 3, 4
    flat = (i - 1) + 4 * ((j - 1) + 4 * (k - 1))
    assert tensor_query_a(inst, i, j, k) == pytest.approx(a[flat])
    assert tensor_query_b(inst, i, j, k) == pytest.approx(b[flat])
    with pytest.raises(IndexOutOfRange):
        tensor_query_a(inst, 5, 1, 1)


def test_n1_weights_uniform(rng):
    inst = CentroidInstance.from_dense([[0.0, 1.0]], [1.0, 0.0])
    assert np.allclose(inst.M_tilde.entries, [1.0, 1.0])
    acc = FlattenedTensorAccess(inst)
    trip = [tensor_sample_a(inst, rng, acc) for _ in range(4000)]
    js = np.array([t[1] for t in trip])
    ks = np.array([t[2] for t in trip])
    assert abs(np.mean(js == 1) - 0.5) <= 0.03 and abs(np.mean(ks == 1) - 0.5) <= 0.03


def test_query_a_zero_entry():
    inst = CentroidInstance.from_dense([[0.0, 1.0]], [1.0, 0.0])
    assert tensor_query_a(inst, 2, 1, 1) == 0.0


def test_sample_a_distribution(rng):
    V, u = rng.standard_normal((2, 2)), rng.standard_normal(2)
    inst = CentroidInstance.from_dense(V, u)
    acc = FlattenedTensorAccess(inst)
    a, _ = acc.dense_a_b()
    s = acc.a._sample0(rng, 100_000) + 1
    assert tv_distance(s, a * a / np.sum(a * a), a.size) <= 0.02


def test_points_equal_query(rng):
    u = rng.standard_normal(5)
    inst = CentroidInstance.from_dense(np.tile(u, (6, 1)), u)
    eps = 0.1 * inst.Z
    est = centroid_distance_estimate(inst, eps, 0.05, rng)
    assert abs(est) <= eps


def test_fused_estimates_match_generic_formula(rng):
    V, u = rng.standard_normal((6, 5)), rng.standard_normal(5)
    V[4] = 0.0
    inst = CentroidInstance.from_dense(V, u)
    acc = FlattenedTensorAccess(inst)
    z, j, k, i = acc.a._draw(rng, 2000)
    flat = i + inst.d * (j + (inst.n + 1) * k)
    na = acc.a.norm()
    generic = acc.b._query0(flat) * na * na / acc.a._query0(flat)
    assert np.allclose(z, generic, rtol=1e-12)


@pytest.mark.slow
def test_hand_computed_pair(rng):
    inst = CentroidInstance.from_dense([[0.0, 1.0]], [1.0, 0.0])
    ok = sum(abs(centroid_distance_estimate(inst, 0.1, 0.05, rng) - 2.0) <= 0.1 for _ in range(400))
    assert ok >= 0.95 * 400


def test_zero_rows_allowed(rng):
    V = rng.standard_normal((5, 3))
    V[2] = 0.0
    u = rng.standard_normal(3)
    inst = CentroidInstance.from_dense(V, u)
    M, w = inst.dense_M()
    assert w[3] == 0.0 and np.all(M[3] == 0.0)
    assert np.allclose(w @ M, u - V.mean(axis=0))
    a, b = FlattenedTensorAccess(inst).dense_a_b()
    assert a @ b == pytest.approx(exact_centroid_distance(V, u), abs=1e-10)


def test_zero_query_vector(rng):
    V = rng.standard_normal((4, 3))
    inst = CentroidInstance.from_dense(V, np.zeros(3))
    a, b = FlattenedTensorAccess(inst).dense_a_b()
    assert a @ b == pytest.approx(exact_centroid_distance(V, np.zeros(3)), abs=1e-10)
    est = centroid_distance_estimate(inst, 0.2 * inst.Z, 0.05, rng)
    assert abs(est - exact_centroid_distance(V, np.zeros(3))) <= 0.2 * inst.Z


def test_errors(rng):
    with pytest.raises(EmptySupport):
        CentroidInstance.from_dense(np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(DimensionMismatch):
        CentroidInstance.from_dense(np.ones((2, 3)), np.ones(2))
    inst = CentroidInstance.from_dense(np.ones((2, 2)), np.ones(2))
    with pytest.raises(InvalidEpsilon):
        centroid_distance_estimate(inst, 0.0, 0.1, rng)


def test_metadata_constants(rng):
    V, u = rng.standard_normal((10, 4)), rng.standard_normal(4)
    inst = CentroidInstance.from_dense(V, u)
    res = centroid_distance_run(inst, inst.Z, 0.1, rng)
    assert res.scale_paper == pytest.approx(4 * inst.Z)
    assert res.scale_computed == pytest.approx(2 * inst.Z)
    assert res.inner_eps == pytest.approx(0.25)
    assert res.stats["n_samples"] == res.samples


def test_sample_count_formula(rng):
    V, u = rng.standard_normal((10, 4)), rng.standard_normal(4)
    inst = CentroidInstance.from_dense(V, u)
    for eps in (0.5, 1.0, 2.0):
        res = centroid_distance_run(inst, eps, 0.1, rng)
        assert res.samples == math.ceil(6 * math.log(20) - 1e-9) * math.ceil(
            9 * (4 * inst.Z / eps) ** 2 * (1 - 1e-12))
