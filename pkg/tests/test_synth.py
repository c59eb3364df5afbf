import numpy as np
import pytest

from sqla.errors import SpectrumViolation
from sqla.oracle import exact_svd
from sqla.synth import check_gap, parse_spectrum, planted, realized_stats


def test_planted_examples():
    A, U, V = planted(200, 200, [10, 8, 6, 4, 2], 0.01, np.random.default_rng(7))
    s = exact_svd(A)[1]
    assert np.all(np.abs(s[:5] - [10, 8, 6, 4, 2]) <= 0.05)
    assert np.allclose(U.T @ U, np.eye(5)) and np.allclose(V.T @ V, np.eye(5))
    B, _, _ = planted(2, 2, [4, 3], 0.0, np.random.default_rng(1))
    assert np.allclose(exact_svd(B)[1], [4, 3], atol=1e-9)


def test_spectrum_violations():
    with pytest.raises(SpectrumViolation):
        planted(5, 5, [3, 4], 0.0, np.random.default_rng(0))
    with pytest.raises(SpectrumViolation):
        planted(5, 5, [3, -1], 0.0, np.random.default_rng(0))
    with pytest.raises(SpectrumViolation):
        planted(2, 5, [3, 2, 1], 0.0, np.random.default_rng(0))
    with pytest.raises(SpectrumViolation):
        parse_spectrum("3,x")


def test_gap_check():
    A, _, _ = planted(30, 30, [2.0, 1.9], 1.0, np.random.default_rng(0))
    with pytest.raises(SpectrumViolation):
        check_gap([2.0, 1.9], realized_stats(A, [2.0, 1.9])["singular_values"])
    check_gap([3.0, 3.0, 1.0], np.array([3.01, 2.99, 1.0]))


def test_realized_stats():
    st = realized_stats(np.diag([4.0, 3.0]), [4.0, 3.0])
    assert st["frobenius"] == pytest.approx(5.0)
    assert st["K"] == pytest.approx(25 / 9)
    assert st["eta"] == pytest.approx(7 / 25)
