import numpy as np
import pytest


def tv_distance(samples1, p, n):
    """TV distance between the empirical law of 1-based ``samples1`` and ``p``."""
    counts = np.bincount(np.asarray(samples1) - 1, minlength=n)
    return 0.5 * float(np.sum(np.abs(counts / counts.sum() - p)))


def l2_dist(x):
    x = np.asarray(x, dtype=float)
    return x * x / np.sum(x * x)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
