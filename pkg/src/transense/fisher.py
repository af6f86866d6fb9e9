"""Fisher information and photon Fisher information efficiency (PFIE).

Covers the ultimate per-photon bound, the TMSV quantum Fisher information,
coherent probes with homodyne detection, the TMSV + OPA joint receiver,
Fock-state probes, single photons and the heralded TMSV source.
"""

import enum
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import binom

from .exceptions import DomainError, UnsupportedRangeError
from .gaussian import thermal_pmf
from .special import hypergeom_2f1_terminating, log_binom, log_hyp2f1_terminating

__all__ = [
    "FiMethod",
    "OpaResult",
    "HeraldedResult",
    "qfi_upper_bound_per_photon",
    "qfi_tmsv",
    "qfi_coherent",
    "pfie_coherent_alternate",
    "coherent_forms_consistent",
    "nbar_opa",
    "opa_fisher_information",
    "maximize_opa_gain",
    "hypergeom_2f1_terminating",
    "fock_output_pmf",
    "qfi_fock",
    "qfi_singlephoton",
    "cfi_heralded",
    "pfie",
    "MAX_FOCK_PHOTONS",
]

MAX_FOCK_PHOTONS = 30

# Infinite k-sums stop after this many consecutive negligible terms.
TAIL_RUN = 20
TAIL_RTOL = 1e-14
_MAX_TERMS = 200_000


class FiMethod(enum.Enum):
    ULTIMATE_BOUND = "ub"
    TMSV = "tmsv"
    COHERENT = "coh"
    TMSV_OPA = "opa"
    FOCK = "fock"
    SINGLE_PHOTON = "sp"
    TMSV_HERALDED = "her"


@dataclass(frozen=True)
class OpaResult:
    """Optimal OPA operating point.

    ``at_boundary`` is set when the optimum sits on an edge of the gain
    search interval, in which case ``fi`` approaches the supremum.
    """

    gain: float
    fi: float
    nbar_opa: float
    at_boundary: bool = False


class HeraldedResult(NamedTuple):
    fi: float
    truncated: bool
    tail_mass: float


def qfi_upper_bound_per_photon(s):
    return 1.0 / (s.theta * (s.nB + 1.0 - s.theta))


def qfi_tmsv(s):
    th, nS, nB = s.theta, s.nS, s.nB
    num = nS * (nB + 1.0 + (1.0 - th) * nS + nB * nS)
    den = th * (nB + 1.0 - th) * (nB + 1.0 + nS * (2.0 * nB + 1.0 - th))
    return num / den


def qfi_coherent(s):
    """Fisher information of a coherent probe read out by homodyne detection."""
    return s.nS / (s.theta * (2.0 * s.nB + 1.0))


def pfie_coherent_alternate(s):
    """The competing closed form ``1/(2 theta (nB + 1))`` for the coherent PFIE.

    It disagrees with ``qfi_coherent(s) / nS``; both are exposed so callers
    can choose, and :func:`coherent_forms_consistent` reports the mismatch.
    """
    return 1.0 / (2.0 * s.theta * (s.nB + 1.0))


def coherent_forms_consistent(s, rtol=1e-12):
    if s.nS == 0:
        return False
    return math.isclose(qfi_coherent(s) / s.nS, pfie_coherent_alternate(s), rel_tol=rtol)


# --- OPA receiver -----------------------------------------------------------

def nbar_opa(s, G):
    """Mean photon number at the OPA output (a thermal state)."""
    G = np.asarray(G, dtype=float)
    if np.any(G < 1):
        raise DomainError("OPA gain must be >= 1")
    out = (
        G * s.nS
        + (G - 1.0) * (s.nB + 1.0 + s.theta * s.nS)
        + 2.0 * np.sqrt(G * (G - 1.0) * s.theta * s.nS * (s.nS + 1.0))
    )
    return out[()] if out.ndim == 0 else out


def opa_fisher_information(s, G):
    """Classical Fisher information of photon counting after the OPA."""
    G = np.asarray(G, dtype=float)
    nb = nbar_opa(s, G)
    dn = (G - 1.0) * s.nS + np.sqrt(G * (G - 1.0) * s.nS * (s.nS + 1.0) / s.theta)
    out = dn**2 / (nb * (nb + 1.0))
    return out[()] if out.ndim == 0 else out


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f, a, b, tol):
    """Maximize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def maximize_opa_gain(s, g_min_excess=1e-9, g_max=10.0, n_grid=200):
    """Maximize the OPA Fisher information over the gain ``G``.

    Scans ``G - 1`` on a log grid over ``[g_min_excess, g_max - 1]`` and
    refines the best cell by golden-section search in ``log(G - 1)``.
    """
    if g_max <= 1 + g_min_excess:
        raise DomainError("g_max must exceed 1 + g_min_excess")
    if s.nS == 0:
        G = 1.0 + g_min_excess
        return OpaResult(G, 0.0, float(nbar_opa(s, G)), True)
    lo, hi = math.log(g_min_excess), math.log(g_max - 1.0)
    grid = np.linspace(lo, hi, n_grid)
    vals = opa_fisher_information(s, 1.0 + np.exp(grid))
    i = int(np.argmax(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, n_grid - 1)]

    def f(x):
        return float(opa_fisher_information(s, 1.0 + math.exp(x)))

    x, fx = golden_section_max(f, a, b, 1e-10)
    if vals[i] > fx:
        x, fx = grid[i], float(vals[i])
    at_boundary = bool(x - lo < 1e-6 or hi - x < 1e-6)
    G = 1.0 + math.exp(x)
    return OpaResult(G, fx, float(nbar_opa(s, G)), at_boundary)


# --- Fock probes ------------------------------------------------------------

def _fock_z(s):
    return (s.theta - s.nB) * (s.nB + 1.0) / s.theta


def _check_m(m):
    if int(m) != m or m < 1:
        raise DomainError(f"photon number m must be a positive integer, got {m!r}")
    if m > MAX_FOCK_PHOTONS:
        raise UnsupportedRangeError(
            f"m={m} exceeds the supported range m <= {MAX_FOCK_PHOTONS}"
        )
    return int(m)


def _log_fock_pmf_single(k, m, s):
    A = s.nB + 1.0 - s.theta
    sgn, lf = log_hyp2f1_terminating(k, m + k, _fock_z(s))
    if sgn <= 0:
        return -math.inf
    return (
        log_binom(m + k, k)
        + (m - k) * math.log(A)
        + k * math.log(s.theta)
        - (m + k + 1) * math.log1p(s.nB)
        + lf
    )


def fock_output_pmf(k, m, s):
    """Photon-count distribution at the output for an ``m``-photon Fock probe.

    ``k`` may be an integer or an integer array.  At ``nB = 0`` the exact
    binomial (pure-loss) distribution is returned.
    """
    if int(m) != m or m < 1:
        raise DomainError(f"photon number m must be a positive integer, got {m!r}")
    m = int(m)
    k_arr = np.atleast_1d(np.asarray(k))
    if np.any(k_arr < 0):
        raise DomainError("photon count must be >= 0")
    if s.nB == 0:
        out = binom.pmf(k_arr, m, s.theta)
    else:
        logs = np.array([_log_fock_pmf_single(int(kk), m, s) for kk in k_arr])
        out = np.where(logs > -690.0, np.exp(np.maximum(logs, -690.0)), 0.0)
    return float(out[0]) if np.ndim(k) == 0 else out


def _sum_series(term, start, rtol=TAIL_RTOL, run=TAIL_RUN):
    """Sum ``term(k)`` for ``k = start, start+1, ...`` until ``run`` successive
    terms are below ``rtol`` relative to the running total."""
    total = 0.0
    small = 0
    k = start
    while k < start + _MAX_TERMS:
        t = term(k)
        total += t
        if abs(t) <= rtol * abs(total):
            small += 1
            if small >= run:
                return total
        else:
            small = 0
        k += 1
    raise ArithmeticError("series did not converge")


def qfi_fock(m, s):
    """Quantum Fisher information of an ``m``-photon Fock probe.

    Five closed-form terms plus a remainder series built from ratios of
    terminating hypergeometric sums.  Valid for ``1 <= m <= 30``.
    """
    m = _check_m(m)
    th, nB = s.theta, s.nB
    if nB == 0:
        return m / (th * (1.0 - th))
    A = nB + 1.0 - th
    closed = (
        m * ((1.0 - th) / A**2 + 1.0 / th)
        - nB * (1.0 / A**2 - 1.0 / th**2)
        - 2.0 * nB * (th * m + nB + 1.0) / (A * th**2)
        - 2.0 * nB**2 * (2.0 * (th * m + nB + th * m * nB) + nB**2 + 1.0) / (A**2 * th**2)
        - nB**2 * m * (m - 1.0) / A**2
    )
    z = _fock_z(s)
    log_a, log_th, log_n1 = math.log(A), math.log(th), math.log1p(nB)

    def term(k):
        s_num, l_num = log_hyp2f1_terminating(k - 1, m + k - 1, z)
        s_den, l_den = log_hyp2f1_terminating(k, m + k, z)
        if s_den <= 0 or s_num == 0:
            return 0.0
        log_t = (
            log_binom(m + k, k)
            + 4.0 * math.log(k)
            + 2.0 * math.log(nB)
            + (m - k) * log_a
            + (k - 4) * log_th
            - 2.0 * math.log(m + k)
            - (m + k - 1) * log_n1
            + 2.0 * l_num
            - l_den
        )
        return math.exp(log_t) if log_t > -745.0 else 0.0

    return closed + _sum_series(term, 1)


def _singlephoton_term(k, s):
    nB, th = s.nB, s.theta
    log_mag = (k - 1) * math.log(nB) - (k + 2) * math.log1p(nB)
    return (k - nB) ** 2 * math.exp(log_mag) / (nB * (nB + 1.0) + th * (k - nB))


def qfi_singlephoton(s):
    """Quantum Fisher information of a single-photon probe."""
    if s.nB == 0:
        return 1.0 / (s.theta * (1.0 - s.theta))
    return _sum_series(lambda k: _singlephoton_term(k, s), 0)


def cfi_heralded(s, m_max=MAX_FOCK_PHOTONS):
    """Fisher information of the idler-heralded TMSV source.

    The heralded Fock number ``m`` follows the thermal distribution with
    mean ``nS``; the sum over ``m`` is truncated at ``m_max``.  The result
    is flagged as truncated when ``nS > 4`` with the default truncation,
    or whenever the neglected heralding mass exceeds 1e-3.
    """
    if m_max < 1 or m_max > MAX_FOCK_PHOTONS:
        raise UnsupportedRangeError(f"m_max must lie in [1, {MAX_FOCK_PHOTONS}]")
    if s.nS == 0:
        return HeraldedResult(0.0, False, 0.0)
    ms = np.arange(1, m_max + 1)
    q = thermal_pmf(ms, s.nS)
    fi = float(sum(qm * qfi_fock(int(m), s) for m, qm in zip(ms, q)))
    tail = (s.nS / (1.0 + s.nS)) ** (m_max + 1)
    truncated = (s.nS > 4 and m_max == MAX_FOCK_PHOTONS) or tail > 1e-3
    if truncated:
        warnings.warn(
            f"heralded FI truncated at m={m_max}; neglected mass {tail:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    return HeraldedResult(fi, truncated, float(tail))


def pfie(method, s, m=1, coherent_form="fisher"):
    """Fisher information per transmitted photon for ``method``.

    ``coherent_form`` selects between the Fisher-information form
    (``"fisher"``, the default) and the alternate closed form
    (``"alternate"``) for coherent probes.
    """
    method = FiMethod(method)
    if method is FiMethod.ULTIMATE_BOUND:
        return qfi_upper_bound_per_photon(s)
    if method is FiMethod.FOCK:
        return qfi_fock(m, s) / m
    if method is FiMethod.SINGLE_PHOTON:
        return qfi_singlephoton(s)
    if method is FiMethod.COHERENT and coherent_form == "alternate":
        return pfie_coherent_alternate(s)
    if method is FiMethod.COHERENT and coherent_form != "fisher":
        raise DomainError(f"unknown coherent_form {coherent_form!r}")
    if s.nS == 0:
        raise DomainError("PFIE is undefined at nS = 0")
    if method is FiMethod.TMSV:
        return qfi_tmsv(s) / s.nS
    if method is FiMethod.COHERENT:
        return qfi_coherent(s) / s.nS
    if method is FiMethod.TMSV_OPA:
        return maximize_opa_gain(s).fi / s.nS
    return cfi_heralded(s).fi / s.nS
