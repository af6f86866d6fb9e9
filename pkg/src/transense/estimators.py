"""Maximum-likelihood estimators of the transmittance and the two-stage protocol.

Three transceivers are covered: a coherent probe read by homodyne
detection, TMSV with an OPA receiver and photon counting, and TMSV with the
squeezer + photon-number-resolving receiver.  Functional estimators return
an :class:`EstimateResult`; scikit-learn style wrappers are provided for
use in pipelines and parameter searches.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DomainError, ReceiverExistenceError
from .fisher import golden_section_max, maximize_opa_gain, nbar_opa
from .gaussian import Scenario
from .receiver import existence_boundary, output_pair_pmf, pair_pmf_tables, sld_params
from .sampling import homodyne_variance, sample_geometric, sample_homodyne, sample_pair

__all__ = [
    "THETA_LO",
    "THETA_HI",
    "KINDS",
    "EstimateResult",
    "mle_coherent",
    "mle_opa",
    "mle_tmsv",
    "tmsv_log_likelihood",
    "stage1_size",
    "two_stage_estimate",
    "CoherentHomodyneEstimator",
    "OPAEstimator",
    "TMSVReceiverEstimator",
]

THETA_LO = 1e-4
THETA_HI = 1.0 - 1e-4
MAX_CUTOFF = 64
KINDS = ("coherent", "opa", "tmsv")


@dataclass(frozen=True)
class EstimateResult:
    """Outcome of one estimation run.

    Attributes
    ----------
    theta_hat : float
        Estimate, always inside the admissible interval.
    stage1_theta : float or None
        Pre-estimate used to tune the receiver (two-stage runs only).
    clamped : bool
        The raw estimate fell outside the admissible interval.
    receiver_fallback : bool
        The pre-estimate was outside the receiver-existence region and
        was projected into it.
    likelihood_boundary : bool
        The likelihood maximum was found at an end of the interval.
    truncation_floor : bool
        Observed photon pairs beyond the cutoff were given a floor mass.
    """

    theta_hat: float
    stage1_theta: float | None = None
    clamped: bool = False
    receiver_fallback: bool = False
    likelihood_boundary: bool = False
    truncation_floor: bool = False

    @property
    def flags(self):
        return {
            "clamped": self.clamped,
            "receiver_fallback": self.receiver_fallback,
            "likelihood_boundary": self.likelihood_boundary,
            "truncation_floor": self.truncation_floor,
        }


def _check_interval(lo, hi):
    if not 0.0 < lo < hi < 1.0:
        raise DomainError(f"admissible interval must satisfy 0 < lo < hi < 1, got [{lo}, {hi}]")


def _clamp(raw, lo, hi):
    if not math.isfinite(raw) or raw < lo:
        return lo, True
    if raw > hi:
        return hi, True
    return float(raw), False


def _as_samples(samples):
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise DomainError("at least one sample is required")
    return x


def mle_coherent(samples, nS, theta_lo=THETA_LO, theta_hi=THETA_HI):
    """Homodyne MLE: squared sample mean over ``nS``, clamped to the interval."""
    _check_interval(theta_lo, theta_hi)
    if nS <= 0:
        raise DomainError("nS must be > 0")
    x = _as_samples(samples)
    theta, clamped = _clamp(x.mean() ** 2 / nS, theta_lo, theta_hi)
    return EstimateResult(theta, clamped=clamped)


def mle_opa(samples, gain, nS, nB, theta_lo=THETA_LO, theta_hi=THETA_HI):
    """Closed-form MLE for photon counts after an OPA of gain ``gain``.

    Inverts the output mean ``nbar_opa(theta)`` at the sample mean.  The
    mean is a quadratic in ``sqrt(theta)``; the root is taken in the
    rationalized form, which stays accurate as ``gain -> 1``.
    """
    _check_interval(theta_lo, theta_hi)
    if gain <= 1:
        raise DomainError("OPA gain must be > 1")
    if nS <= 0:
        raise DomainError("nS must be > 0")
    y = _as_samples(samples).mean()
    G = float(gain)
    b = math.sqrt(G * (G - 1.0) * nS * (nS + 1.0))
    c0 = G * nS + (G - 1.0) * (nB + 1.0) - y
    radicand = (G - 1.0) * nS * (1.0 + y + nB - G * nB)
    if radicand < 0:
        return EstimateResult(theta_lo, clamped=True)
    x = -c0 / (b + math.sqrt(radicand))
    theta, clamped = _clamp(x * abs(x), theta_lo, theta_hi)
    return EstimateResult(theta, clamped=clamped)


def _pair_histogram(samples, cutoff):
    arr = np.asarray(samples)
    if isinstance(samples, tuple) and len(samples) == 2:
        z0 = np.asarray(samples[0]).ravel()
        z1 = np.asarray(samples[1]).ravel()
    else:
        arr = np.asarray(arr).reshape(-1, 2)
        z0, z1 = arr[:, 0], arr[:, 1]
    z0 = z0.astype(np.int64)
    z1 = z1.astype(np.int64)
    if z0.size == 0:
        raise DomainError("at least one sample is required")
    if np.any(z0 < 0) or np.any(z1 < 0):
        raise DomainError("photon counts must be >= 0")
    inside = (z0 <= cutoff) & (z1 <= cutoff)
    cells, counts = np.unique(z0[inside] * (cutoff + 1) + z1[inside], return_counts=True)
    return cells, counts, int(np.count_nonzero(~inside))


def _log_likelihood_batch(thetas, cells, counts, n_out, omega0, nS, nB, cutoff):
    tables = pair_pmf_tables(thetas, omega0, nS, nB, cutoff)
    flat = tables.reshape(tables.shape[0], -1)
    Z = flat.sum(axis=1)
    with np.errstate(divide="ignore"):
        ll = np.log(flat[:, cells]) @ counts - counts.sum() * np.log(Z)
        if n_out:
            ll = ll + n_out * np.log(np.maximum(1.0 - Z, np.finfo(float).tiny))
    return ll


def tmsv_log_likelihood(theta, samples, omega0, nS, nB, cutoff):
    """Log-likelihood of photon pairs under the normalized truncated table."""
    cells, counts, n_out = _pair_histogram(samples, cutoff)
    return float(
        _log_likelihood_batch([theta], cells, counts, n_out, omega0, nS, nB, cutoff)[0]
    )


def mle_tmsv(
    samples,
    omega0,
    nS,
    nB,
    cutoff,
    theta_lo=THETA_LO,
    theta_hi=THETA_HI,
    n_grid=64,
    xtol=1e-6,
):
    """Numerical MLE for photon pairs from the squeezer + PNR receiver.

    Counts are aggregated into a histogram, the log-likelihood is scanned
    on an ``n_grid``-point grid over the admissible interval, and the best
    cell is refined by golden-section search to ``xtol``.  No closed form
    is available because both the thermal occupations and the
    diagonalizing squeeze depend on ``theta``.
    """
    _check_interval(theta_lo, theta_hi)
    cells, counts, n_out = _pair_histogram(samples, cutoff)
    args = (cells, counts, n_out, omega0, nS, nB, cutoff)
    grid = np.linspace(theta_lo, theta_hi, n_grid)
    ll = _log_likelihood_batch(grid, *args)
    i = int(np.argmax(ll))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, n_grid - 1)]

    def f(th):
        return float(_log_likelihood_batch([th], *args)[0])

    theta, best = golden_section_max(f, a, b, xtol)
    if ll[i] > best:
        theta = float(grid[i])
    boundary = theta - theta_lo <= xtol or theta_hi - theta <= xtol
    return EstimateResult(
        float(theta), likelihood_boundary=bool(boundary), truncation_floor=n_out > 0
    )


def stage1_size(n, beta=0.5):
    """Number of coherent probes spent on the pre-estimate, ``ceil(n**beta)``."""
    return int(math.ceil(n**beta - 1e-9))


def two_stage_estimate(
    kind,
    n,
    s_true,
    rng,
    beta=0.5,
    cutoff=9,
    oracle=False,
    theta_lo=THETA_LO,
    theta_hi=THETA_HI,
    fallback_margin=1e-3,
    homodyne_convention="fisher",
    max_deficit=None,
):
    """Simulate one run of the two-stage protocol and return its estimate.

    Stage 1 spends ``ceil(n**beta)`` coherent probes on a homodyne
    pre-estimate; stage 2 tunes the receiver to it and uses the remaining
    probes.  With ``oracle=True`` the receiver is tuned to the true value
    and all ``n`` probes go to stage 2.  For ``kind="coherent"`` the
    protocol collapses to a single homodyne stage.

    For the TMSV receiver, ``cutoff`` is the photon-number resolution of
    each detector.  If ``max_deficit`` is given, the cutoff is raised
    (up to ``MAX_CUTOFF``) until the truncated pair table misses at most
    that much mass at the tuned squeeze.
    """
    if kind not in KINDS:
        raise DomainError(f"kind must be one of {KINDS}, got {kind!r}")
    if n < 4:
        raise DomainError("the two-stage protocol needs n >= 4")
    nS, nB = s_true.nS, s_true.nB
    if kind == "coherent":
        x = sample_homodyne(s_true, rng, n, homodyne_convention)
        return mle_coherent(x, nS, theta_lo, theta_hi)

    if oracle:
        theta0, n2 = s_true.theta, n
    else:
        n1 = stage1_size(n, beta)
        x = sample_homodyne(s_true, rng, n1, homodyne_convention)
        theta0 = mle_coherent(x, nS, theta_lo, theta_hi).theta_hat
        n2 = n - n1
    stage1 = None if oracle else theta0

    if kind == "opa":
        gain = maximize_opa_gain(s_true.with_theta(theta0)).gain
        y = sample_geometric(float(nbar_opa(s_true, gain)), rng, n2)
        res = mle_opa(y, gain, nS, nB, theta_lo, theta_hi)
        return EstimateResult(res.theta_hat, stage1, res.clamped)

    fallback = False
    p = sld_params(s_true.with_theta(theta0))
    if not p.exists:
        boundary = existence_boundary(nS, nB)
        if oracle or boundary is None or boundary + fallback_margin >= 1.0:
            raise ReceiverExistenceError(s_true.with_theta(theta0), p.discriminant)
        theta0 = boundary + fallback_margin
        p = sld_params(s_true.with_theta(theta0))
        fallback = True
    pmf = output_pair_pmf(s_true, p.omega, cutoff, max_deficit=None)
    if max_deficit is not None:
        # A mistuned squeeze spreads mass to higher counts; widen the table.
        while pmf.deficit > max_deficit and pmf.cutoff < MAX_CUTOFF:
            pmf = output_pair_pmf(s_true, p.omega, pmf.cutoff + 1, max_deficit=None)
    cutoff = pmf.cutoff
    z = sample_pair(pmf, rng, n2)
    res = mle_tmsv(z, p.omega, nS, nB, cutoff, theta_lo, theta_hi)
    return EstimateResult(
        res.theta_hat,
        None if oracle else theta0,
        res.clamped,
        fallback,
        res.likelihood_boundary,
        res.truncation_floor,
    )


# --- scikit-learn style wrappers ----------------------------------------------

class _ThetaEstimator(BaseEstimator):
    def _finish(self, result):
        self.result_ = result
        self.theta_ = result.theta_hat
        return self

    def score(self, X, y=None):
        """Mean per-sample log-likelihood at the fitted transmittance."""
        check_is_fitted(self, "theta_")
        return float(np.mean(self._loglik(X)))


class CoherentHomodyneEstimator(_ThetaEstimator):
    """Homodyne MLE. ``X`` holds one homodyne outcome per row."""

    def __init__(self, nS=0.01, nB=1.0, theta_lo=THETA_LO, theta_hi=THETA_HI, convention="fisher"):
        self.nS = nS
        self.nB = nB
        self.theta_lo = theta_lo
        self.theta_hi = theta_hi
        self.convention = convention

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=False).ravel()
        return self._finish(mle_coherent(X, self.nS, self.theta_lo, self.theta_hi))

    def _loglik(self, X):
        X = check_array(X, ensure_2d=False).ravel()
        s = Scenario(self.theta_, self.nS, self.nB)
        sd = math.sqrt(homodyne_variance(s, self.convention))
        return norm.logpdf(X, math.sqrt(self.theta_ * self.nS), sd)


class OPAEstimator(_ThetaEstimator):
    """Photon-counting MLE behind an OPA. ``X`` holds one count per row."""

    def __init__(self, gain=2.0, nS=0.01, nB=1.0, theta_lo=THETA_LO, theta_hi=THETA_HI):
        self.gain = gain
        self.nS = nS
        self.nB = nB
        self.theta_lo = theta_lo
        self.theta_hi = theta_hi

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=False).ravel()
        return self._finish(
            mle_opa(X, self.gain, self.nS, self.nB, self.theta_lo, self.theta_hi)
        )

    def _loglik(self, X):
        X = check_array(X, ensure_2d=False).ravel()
        nb = float(nbar_opa(Scenario(self.theta_, self.nS, self.nB), self.gain))
        return X * math.log(nb) - (X + 1.0) * math.log1p(nb)


class TMSVReceiverEstimator(_ThetaEstimator):
    """Photon-pair MLE for the squeezer + PNR receiver.

    ``X`` is an ``(n, 2)`` array of ``(z0, z1)`` counts.
    """

    def __init__(self, omega0=0.1428, nS=0.01, nB=1.0, cutoff=9, theta_lo=THETA_LO, theta_hi=THETA_HI):
        self.omega0 = omega0
        self.nS = nS
        self.nB = nB
        self.cutoff = cutoff
        self.theta_lo = theta_lo
        self.theta_hi = theta_hi

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.int64)
        if X.shape[1] != 2:
            raise DomainError("expected an (n, 2) array of photon-pair counts")
        return self._finish(
            mle_tmsv(X, self.omega0, self.nS, self.nB, self.cutoff, self.theta_lo, self.theta_hi)
        )

    def _loglik(self, X):
        X = check_array(X, dtype=np.int64)
        table = pair_pmf_tables(self.theta_, self.omega0, self.nS, self.nB, self.cutoff)[0]
        table = table / table.sum()
        inside = (X[:, 0] <= self.cutoff) & (X[:, 1] <= self.cutoff)
        with np.errstate(divide="ignore"):
            return np.where(
                inside,
                np.log(table[np.minimum(X[:, 0], self.cutoff), np.minimum(X[:, 1], self.cutoff)]),
                -np.inf,
            )
