"""Synthetic matrices with a planted spectrum."""
import numpy as np

from .errors import SpectrumViolation
from .oracle import exact_svd


def parse_spectrum(text):
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise SpectrumViolation(f"cannot parse spectrum {text!r}") from exc
    return np.array(vals)


def check_spectrum(spectrum, rows, cols):
    s = np.asarray(spectrum, dtype=np.float64)
    if s.size == 0:
        raise SpectrumViolation("empty spectrum")
    if np.any(s <= 0):
        raise SpectrumViolation("spectrum values must be positive")
    if np.any(np.diff(s) > 0):
        raise SpectrumViolation("spectrum must be nonincreasing")
    if s.size > min(rows, cols):
        raise SpectrumViolation(f"{s.size} values exceed rank limit {min(rows, cols)}")
    return s


def random_orthonormal(n, r, rng):
    """``n x r`` matrix with orthonormal columns from QR of a Gaussian matrix."""
    q, R = np.linalg.qr(rng.standard_normal((n, r)))
    # fix column signs so the factor is Haar distributed
    return q * np.sign(np.diag(R))


def planted(rows, cols, spectrum, noise, rng):
    """``sum_i s_i u_i v_i^T + noise * G`` with ``G`` entrywise standard normal.

    Returns ``(A, U, V)`` where ``U`` and ``V`` are the planted factors.
    """
    s = check_spectrum(spectrum, rows, cols)
    r = s.size
    U = random_orthonormal(rows, r, rng)
    V = random_orthonormal(cols, r, rng)
    A = (U * s) @ V.T
    if noise:
        A = A + noise * rng.standard_normal((rows, cols))
    return A, U, V


def realized_stats(A, spectrum):
    """Realized singular values, ``||A||_F``, ``K = ||A||_F**2 / s_r**2`` and gap ``eta``.

    ``eta`` is the smallest ``(s_i**2 - s_{i+1}**2) / ||A||_F**2`` over the
    planted components.
    """
    s = exact_svd(A)[1]
    r = len(spectrum)
    fro2 = float(np.sum(s ** 2))
    s2 = np.concatenate([s ** 2, [0.0]])
    eta = float(np.min(s2[:r] - s2[1:r + 1]) / fro2)
    return {"singular_values": s, "frobenius": fro2 ** 0.5, "K": fro2 / s[r - 1] ** 2, "eta": eta}


def check_gap(spectrum, realized):
    """Raise SpectrumViolation if noise moved a planted value past half its gap."""
    s = np.asarray(spectrum, dtype=np.float64)
    gaps = -np.diff(np.concatenate([s, [0.0]]))
    # tied values have no gap to protect
    gaps = np.where(gaps > 0, gaps, np.inf)
    half = 0.5 * np.minimum(gaps, np.concatenate([[np.inf], gaps[:-1]]))
    shift = np.abs(realized[:s.size] - s)
    if np.any(shift >= half):
        raise SpectrumViolation("noise destroys the requested spectral gap")
