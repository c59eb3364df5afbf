"""Median-of-means inner product estimation from SQ access."""
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptySupport, LengthMismatch

# largest norm slack the inner product error bound is trusted for
MAX_NU = 0.5


def _ceil(x):
    # 9 / 0.3**2 evaluates to 100.00000000000001; do not round that up to 101
    return int(math.ceil(x * (1.0 - 1e-12)))


@dataclass(frozen=True)
class EstimatorParams:
    """Accuracy ``eps`` and failure probability ``delta`` for one estimate.

    Samples are split into ``ceil(6 ln(2/delta))`` buckets of
    ``ceil(9 / eps**2)`` each.
    """

    eps: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    @property
    def bucket_count(self):
        return _ceil(6.0 * math.log(2.0 / self.delta))

    @property
    def bucket_size(self):
        return _ceil(9.0 / self.eps ** 2)

    @property
    def total(self):
        return self.bucket_count * self.bucket_size


def median_of_means(values, bucket_count, bucket_size):
    """Median of the means of consecutive buckets, filled in order."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size != bucket_count * bucket_size:
        raise LengthMismatch(
            f"{values.size} values for {bucket_count} buckets of {bucket_size}"
        )
    means = values.reshape(bucket_count, bucket_size).mean(axis=1)
    return float(np.median(means))


def _query_any(y, idx0):
    if hasattr(y, "_query0"):
        return y._query0(idx0)
    return np.asarray(y, dtype=np.float64).reshape(-1)[idx0]


def _length(y):
    if hasattr(y, "n"):
        return y.n
    return np.asarray(y).reshape(-1).size


def elementary_estimates(x, y, count, rng):
    """``count`` i.i.d. unbiased estimates ``y_i * norm(x)**2 / x_i`` of ``<x, y>``.

    ``i`` is drawn from ``x``'s length-squared distribution and ``norm(x)``
    is the handle's reported norm.
    """
    if x.n != _length(y):
        raise DimensionMismatch(f"x has dimension {x.n}, y has {_length(y)}")
    if x.nu > MAX_NU:
        raise ValueError(f"norm slack {x.nu} exceeds {MAX_NU}")
    nrm = x.norm()
    if not nrm > 0.0:
        raise EmptySupport("x is the zero vector")
    idx = x._sample0(rng, count)
    xv = x._query0(idx)
    yv = _query_any(y, idx)
    return yv * (nrm * nrm) / xv


def inner_product_estimate(x, y, params, rng):
    """Estimate ``<x, y>`` given SQ access to ``x`` and query access to ``y``.

    With probability at least ``1 - delta`` the error is at most
    ``(eps + nu) ||x|| ||y||``, where ``nu`` is ``x``'s norm slack. Uses
    exactly ``params.total`` samples of ``x``.

    ``y`` may be another handle or any array-like.
    """
    z = elementary_estimates(x, y, params.total, rng)
    return median_of_means(z, params.bucket_count, params.bucket_size)
