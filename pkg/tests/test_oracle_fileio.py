import numpy as np
import pytest

from sqla import oracle
from sqla.errors import DimensionMismatch, FormatError
from sqla.fileio import read_matrix, read_sqm, read_sqm_blocks, read_vector, write_sqm, write_sqm_blocks


def test_trivial_oracles():
    assert oracle.exact_dot([1, 1], [1, -1]) == 0
    assert np.array_equal(oracle.exact_matvec(np.eye(2), [3, 4]), [3, 4])
    assert oracle.exact_frobenius(np.diag([3.0, 4.0])) == 5.0
    assert oracle.exact_centroid_distance([[0.0, 1.0]], [1.0, 0.0]) == 2.0
    assert oracle.exact_C(np.eye(3), [1.0, 2.0, 3.0]) == pytest.approx(1.0)
    assert oracle.exact_low_rank_error(np.diag([4.0, 3.0]), 1) == pytest.approx(9.0)
    with pytest.raises(DimensionMismatch):
        oracle.exact_dot([1.0], [1.0, 2.0])


def test_exact_svd(rng):
    assert np.allclose(oracle.exact_svd(np.diag([4.0, 3.0]))[1], [4.0, 3.0])
    u, v = rng.standard_normal(6), rng.standard_normal(5)
    s = oracle.exact_svd(7 * np.outer(u / np.linalg.norm(u), v / np.linalg.norm(v)))[1]
    assert s[0] == pytest.approx(7.0) and np.all(s[1:] < 1e-12)
    A = rng.standard_normal((20, 15))
    U, s, Vt = oracle.exact_svd(A)
    assert np.linalg.norm((U * s) @ Vt - A) <= 1e-9 * np.linalg.norm(A)
    assert np.allclose(U.T @ U, np.eye(15), atol=1e-10)
    assert np.all(np.diff(s) <= 0)
    with pytest.raises(ValueError):
        oracle.exact_svd(np.ones((513, 513)))


def test_sqm_roundtrip(tmp_path, rng):
    A = rng.standard_normal((4, 3))
    write_sqm(tmp_path / "a.sqm", A)
    raw = (tmp_path / "a.sqm").read_bytes()
    assert raw[:4] == b"SQM1" and len(raw) == 20 + 12 * 8
    assert np.array_equal(read_sqm(tmp_path / "a.sqm"), A)
    assert np.array_equal(read_matrix(tmp_path / "a.sqm"), A)
    write_sqm_blocks(tmp_path / "b.sqm", [A, np.arange(3.0)])
    blocks = read_sqm_blocks(tmp_path / "b.sqm")
    assert np.array_equal(blocks[1], [[0.0, 1.0, 2.0]])
    with pytest.raises(FormatError):
        read_sqm(tmp_path / "b.sqm")


def test_format_errors(tmp_path):
    (tmp_path / "t.sqm").write_bytes(b"SQM1" + b"\x02" + b"\x00" * 20)
    with pytest.raises(FormatError):
        read_sqm(tmp_path / "t.sqm")
    (tmp_path / "x.csv").write_text("1,2\na,b\n")
    with pytest.raises(FormatError):
        read_matrix(tmp_path / "x.csv")
    (tmp_path / "m.csv").write_text("1,2\n3,4\n")
    with pytest.raises(FormatError):
        read_vector(tmp_path / "m.csv")
    (tmp_path / "v.csv").write_text("1,2,3\n")
    assert np.array_equal(read_vector(tmp_path / "v.csv"), [1.0, 2.0, 3.0])
