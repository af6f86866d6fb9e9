"""Terminating hypergeometric series in log-magnitude / sign form."""

import math

import numpy as np
from scipy.special import gammaln, logsumexp

from .exceptions import DomainError

__all__ = ["log_hyp2f1_terminating", "hypergeom_2f1_terminating", "log_binom"]


def log_binom(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def _log_terms(a, b, c, n_terms, z):
    """Log-magnitudes and signs of the first ``n_terms`` terms of 2F1(a, b; c; z)."""
    j = np.arange(n_terms - 1)
    num = (a + j) * (b + j) * z
    den = (c + j) * (j + 1.0)
    if np.any(den == 0):
        raise DomainError("zero denominator factor in terminating series")
    ratios = num / den
    signs = np.concatenate(([1.0], np.cumprod(np.sign(ratios))))
    with np.errstate(divide="ignore"):
        logs = np.concatenate(([0.0], np.cumsum(np.log(np.abs(ratios)))))
    return logs, signs


def _signed_logsumexp(logs, signs):
    keep = signs != 0
    if not np.any(keep):
        return 0.0, -np.inf
    val, sgn = logsumexp(logs[keep], b=signs[keep], return_sign=True)
    return float(sgn), float(val)


def log_hyp2f1_terminating(k, mk, z):
    """``(sign, log|value|)`` of 2F1(-k, -k; -mk; z) for integers ``0 <= k <= mk``.

    For ``0 < z < 1`` the series alternates and cancels catastrophically, so
    it is rewritten with the Pfaff transformation as
    ``(1 - z)**k * 2F1(-k, -(mk - k); -mk; z / (z - 1))`` whose terms share a
    sign.  For ``z <= 0`` the direct terms are already sign-definite.
    ``z > 1`` falls back to the direct alternating sum and is only accurate
    for small ``k``; the photon-count formulas never produce it.
    """
    k = int(k)
    mk = int(mk)
    if k < 0 or mk < k:
        raise DomainError(f"need 0 <= k <= mk, got k={k}, mk={mk}")
    if k == 0 or z == 0:
        return 1.0, 0.0
    if mk == 0:
        raise DomainError("zero denominator factor in terminating series")
    m = mk - k
    if z == 1:
        # Chu-Vandermonde: (-m)_k / (-mk)_k
        if k > m:
            return 0.0, -np.inf
        j = np.arange(k)
        return 1.0, float(np.sum(np.log(m - j) - np.log(mk - j)))
    if 0 < z < 1:
        w = z / (z - 1.0)
        n_terms = min(k, m) + 1
        logs, signs = _log_terms(-k, -m, -mk, n_terms, w)
        sgn, val = _signed_logsumexp(logs, signs)
        return sgn, val + k * math.log1p(-z)
    logs, signs = _log_terms(-k, -k, -mk, k + 1, z)
    return _signed_logsumexp(logs, signs)


def hypergeom_2f1_terminating(k, mk, z):
    """Value of 2F1(-k, -k; -mk; z); a finite sum of ``k + 1`` terms."""
    sgn, val = log_hyp2f1_terminating(k, mk, z)
    return sgn * math.exp(val) if val < 709.7 else sgn * math.inf
