"""Samplers for the classical outcomes of the three simulated receivers.

Every sampler takes an explicit :class:`numpy.random.Generator`.
"""

import math

import numpy as np

from .exceptions import DomainError

__all__ = [
    "homodyne_variance",
    "sample_homodyne",
    "sample_geometric",
    "AliasTable",
    "sample_pair",
]


def homodyne_variance(s, convention="fisher"):
    """Per-sample homodyne variance.

    ``"fisher"`` gives ``(2 nB + 1)/4``, for which the sample Fisher
    information equals the coherent-probe FI; ``"literal"`` gives
    ``nB + 1``, an alternative convention kept for comparison.
    """
    if convention == "fisher":
        return (2.0 * s.nB + 1.0) / 4.0
    if convention == "literal":
        return s.nB + 1.0
    raise DomainError(f"unknown homodyne convention {convention!r}")


def sample_homodyne(s, rng, size=None, convention="fisher"):
    """Homodyne outcomes: normal with mean ``sqrt(theta nS)``."""
    sd = math.sqrt(homodyne_variance(s, convention))
    return rng.normal(math.sqrt(s.theta * s.nS), sd, size)


def sample_geometric(nbar, rng, size=None):
    """Photon counts of a thermal state with mean ``nbar`` by inversion."""
    if nbar < 0:
        raise DomainError(f"mean photon number must be >= 0, got {nbar!r}")
    if nbar == 0:
        return np.zeros(size, dtype=np.int64) if size is not None else 0
    u = 1.0 - rng.random(size)  # in (0, 1]
    k = np.floor(np.log(u) / math.log(nbar / (1.0 + nbar))).astype(np.int64)
    return k if size is not None else int(k)


class AliasTable:
    """Vose alias table over a finite set of outcomes.

    Construction visits outcomes in index order, so the table (and the
    draws for a given stream) depend only on the probabilities.
    """

    def __init__(self, probs):
        p = np.asarray(probs, dtype=float).ravel()
        if p.size == 0 or np.any(p < 0) or not np.isfinite(p).all() or p.sum() <= 0:
            raise DomainError("alias table needs non-negative, finite, non-zero weights")
        n = p.size
        scaled = p * (n / p.sum())
        prob = np.ones(n)
        alias = np.arange(n)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            i = small.pop()
            j = large.pop()
            prob[i] = scaled[i]
            alias[i] = j
            scaled[j] = scaled[j] + scaled[i] - 1.0
            (small if scaled[j] < 1.0 else large).append(j)
        # leftovers are 1 up to rounding
        self.prob = prob
        self.alias = alias
        self.size = n

    def sample(self, rng, size=None):
        n_draw = 1 if size is None else size
        idx = rng.integers(0, self.size, n_draw)
        u = rng.random(n_draw)
        out = np.where(u < self.prob[idx], idx, self.alias[idx])
        return int(out[0]) if size is None else out


def sample_pair(pmf, rng, size=None):
    """Draw ``(z0, z1)`` from the normalized truncated table of ``pmf``.

    With ``size`` given, returns two integer arrays.
    """
    table = AliasTable(pmf.table)
    flat = table.sample(rng, size)
    z0, z1 = np.divmod(flat, pmf.cutoff + 1)
    if size is None:
        return int(z0), int(z1)
    return z0, z1
