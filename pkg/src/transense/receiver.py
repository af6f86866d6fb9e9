"""The CRB-achieving TMSV receiver: two-mode squeezer followed by PNR detection.

The receiver applies a two-mode squeeze ``S(omega0)`` to the returned and
idler modes and counts photons on both.  This module provides the scalar
bundle that diagonalizes the output state and the symmetric logarithmic
derivative (SLD), the existence test for a real squeeze setting, Fock-basis
squeezer matrix elements and the resulting photon-pair distribution.

Fock states are ordered ``|n_R, n_I>`` (returned mode first).  The squeezer
is ``S(w) = exp(w a_R a_I - w a_R^dag a_I^dag)``; real squeezers commute, so
``S(a) S(b) = S(a + b)``.
"""

import functools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln, xlogy

from .exceptions import DomainError, ReceiverExistenceError, TruncationError
from .fisher import qfi_tmsv
from .gaussian import Scenario, output_covariance

__all__ = [
    "SldReceiverParams",
    "PairPmf",
    "SldVerification",
    "sld_params",
    "receiver_exists",
    "existence_boundary",
    "verify_diagonalizing_squeeze",
    "two_mode_squeezer_symplectic",
    "squeezer_fock_element",
    "squeezer_matrix",
    "default_cutoff",
    "pair_pmf_cells",
    "pair_pmf_tables",
    "output_pair_pmf",
    "pair_pmf_fisher_information",
    "sigma_fock",
    "sld_fock",
    "sld_eigenvalues",
    "sld_verify",
    "EXISTENCE_EPS",
]

# Discriminants below this are treated as "no receiver" (lambda diverges).
EXISTENCE_EPS = 1e-12
_R_TAIL = 1e-18


def _scalars(theta, nS, nB):
    """Vectorized closed forms; ``theta`` may be an array.

    The differences ``x - 1/2``, ``N1``, ``N2`` and ``nB - N1`` are written
    in rationalized form to avoid cancellation at small ``nS`` or ``nB``.
    """
    th = np.asarray(theta, dtype=float)
    a = nB**2 + (1.0 + nS * (1.0 - th)) ** 2 + 2.0 * nB * (1.0 + nS + th * nS)
    sa = np.sqrt(a)
    b = 1.0 + nB + nS + th * nS
    x = b / (2.0 * sa)
    nu2 = 2.0 * th * nS * (1.0 + nS) / (sa * (b + sa))
    mu2 = 1.0 + nu2
    mu = np.sqrt(mu2)
    nu = -np.sqrt(nu2)
    zeta = np.log(mu + nu)

    c2 = nB + 1.0 - nS * (1.0 - th)
    c1 = 1.0 + nS * (1.0 - th) - nB
    with np.errstate(divide="ignore", invalid="ignore"):
        N2 = np.where(c2 > 0, 2.0 * nS * (nB + 1.0 - th) / (sa + np.abs(c2)), 0.5 * (sa - c2))
        N1 = np.where(c1 > 0, 2.0 * nB * (1.0 + nS) / (sa + np.abs(c1)), 0.5 * (sa - c1))
        nB_minus_N1 = -2.0 * th * nB * nS / (nB + 1.0 + nS * (1.0 - th) + sa)

        C = mu2 * nB_minus_N1 / (N1 * (1.0 + N1))
        D = nu2 * (nB + 1.0 + N2) / (N2 * (1.0 + N2))
        E = mu * nu * (N1 - N2 - 2.0 * nB - 1.0) / (2.0 * N1 * N2 + N1 + N2 + 1.0)
        F = -mu2 * nB_minus_N1 / (1.0 + N1) - nu2 * (nB + 1.0 + N2) / (1.0 + N2)
        disc = (C + D) ** 2 - 4.0 * E**2
    return dict(a=a, x=x, mu=mu, nu=nu, zeta=zeta, N1=N1, N2=N2, C=C, D=D, E=E, F=F, disc=disc)


@dataclass(frozen=True)
class SldReceiverParams:
    """Scalars describing the diagonalized output state and its SLD.

    ``omega`` is ``None`` when no real receiver squeeze exists; the
    quantities that depend on it (``T1``, ``T2``, ``lam``, ``Fprime``) are
    then NaN and ``discriminant`` carries the diagnostic ``(C+D)^2 - 4E^2``.
    """

    theta: float
    a: float
    mu: float
    nu: float
    zeta: float
    N1: float
    N2: float
    C: float
    D: float
    E: float
    F: float
    discriminant: float
    T1: float
    T2: float
    lam: float
    Fprime: float
    omega: float | None

    @property
    def exists(self):
        return self.omega is not None

    @property
    def squeezing_db(self):
        """Squeezing factor ``10 log10(exp(2 omega))`` in dB."""
        if self.omega is None:
            return None
        return 20.0 * self.omega / math.log(10.0)


def _exists(disc):
    return np.isfinite(disc) & (disc > EXISTENCE_EPS)


def sld_params(s):
    v = {k: float(val) for k, val in _scalars(s.theta, s.nS, s.nB).items()}
    disc = v["disc"]
    T1 = T2 = lam = Fp = math.nan
    omega = None
    if _exists(disc):
        root = math.sqrt(disc)
        T1 = 0.5 * (root + v["C"] - v["D"])
        T2 = 0.5 * (root - v["C"] + v["D"])
        lam = 0.5 * math.log((2.0 * v["E"] + abs(v["C"] + v["D"])) / root)
        Fp = v["F"] - (T1 + T2) * math.sinh(lam) ** 2
        omega = lam - v["zeta"]
    return SldReceiverParams(
        theta=s.theta,
        a=v["a"],
        mu=v["mu"],
        nu=v["nu"],
        zeta=v["zeta"],
        N1=v["N1"],
        N2=v["N2"],
        C=v["C"],
        D=v["D"],
        E=v["E"],
        F=v["F"],
        discriminant=disc,
        T1=T1,
        T2=T2,
        lam=lam,
        Fprime=Fp,
        omega=omega,
    )


def receiver_exists(s):
    """True when the receiver squeeze parameter is real at ``s``."""
    return bool(_exists(_scalars(s.theta, s.nS, s.nB)["disc"]))


@functools.lru_cache(maxsize=256)
def existence_boundary(nS, nB, tol=1e-6):
    """Smallest transmittance above which the receiver exists, or ``None``.

    A log-spaced scan over (1e-7, 1) locates the last change from
    non-existence to existence, then bisection refines it to ``tol``.
    """
    grid = np.concatenate((np.logspace(-7, -1, 600, endpoint=False), np.linspace(0.1, 1 - 1e-9, 900)))
    ok = _exists(_scalars(grid, nS, nB)["disc"])
    if not ok[-1]:
        return None
    bad = np.nonzero(~ok)[0]
    if bad.size == 0:
        return None
    i = bad[-1]
    lo, hi = grid[i], grid[i + 1]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _exists(_scalars(mid, nS, nB)["disc"]):
            hi = mid
        else:
            lo = mid
    return float(0.5 * (lo + hi))


def two_mode_squeezer_symplectic(w):
    """Phase-space matrix of a real two-mode squeeze in ``(qI, qR, pI, pR)`` order."""
    c, sh = math.cosh(w), math.sinh(w)
    return np.array(
        [[c, sh, 0.0, 0.0], [sh, c, 0.0, 0.0], [0.0, 0.0, c, -sh], [0.0, 0.0, -sh, c]]
    )


def verify_diagonalizing_squeeze(s):
    """Largest inter-mode covariance left after squeezing by ``zeta``.

    Zero (to rounding) means the squeezed output is a product of thermal
    states with occupations ``N2`` (idler) and ``N1`` (returned mode).
    """
    if s.nS == 0:
        return 0.0
    Z = two_mode_squeezer_symplectic(sld_params(s).zeta)
    sd = Z @ output_covariance(s) @ Z.T
    return float(max(abs(sd[0, 1]), abs(sd[2, 3])))


# --- Fock-basis squeezer ------------------------------------------------------

_LOGFACT = gammaln(np.arange(1024) + 1.0)


def _logfact(n):
    global _LOGFACT
    n = np.asarray(n)
    top = int(n.max(initial=0))
    if top >= _LOGFACT.size:
        _LOGFACT = gammaln(np.arange(2 * top + 1) + 1.0)
    return _LOGFACT[np.clip(n, 0, None)]


def squeezer_fock_element(s, t, k, m, w):
    """Matrix element ``<s t| S(w) |k m>``; all arguments broadcast.

    The terminating sum over ``u`` is accumulated term by term from
    log-magnitudes and explicit sign parities.
    """
    s, t, k, m, w = np.broadcast_arrays(
        np.asarray(s), np.asarray(t), np.asarray(k), np.asarray(m), np.asarray(w, dtype=float)
    )
    d = s - k
    valid = (d == t - m) & (s >= 0) & (t >= 0) & (k >= 0) & (m >= 0)
    with np.errstate(divide="ignore"):
        log_tau = np.log(np.tanh(np.abs(w)))
    log_nu = np.log(np.cosh(w))
    flip = (w > 0) & (d % 2 == 1)
    base = 0.5 * (_logfact(s) + _logfact(t) + _logfact(k) + _logfact(m))
    u_lo = np.maximum(-d, 0)
    u_hi = np.minimum(k, m)
    out = np.zeros(s.shape)
    if not valid.any():
        return out[()] if out.ndim == 0 else out
    for u in range(int(u_hi[valid].max()) + 1):
        ok = valid & (u >= u_lo) & (u <= u_hi)
        if not ok.any():
            continue
        e = d + 2 * u
        with np.errstate(invalid="ignore"):
            tau_part = np.where(e == 0, 0.0, e * log_tau)
        logmag = (
            base
            - _logfact(np.where(ok, d + u, 0))
            - _logfact(u)
            - _logfact(np.where(ok, k - u, 0))
            - _logfact(np.where(ok, m - u, 0))
            + tau_part
            + (2 * u - k - m - 1) * log_nu
        )
        sign = np.where(flip, -1.0, 1.0) * (-1.0) ** u
        out += np.where(ok, sign * np.exp(np.where(ok, logmag, -np.inf)), 0.0)
    return out[()] if out.ndim == 0 else out


def squeezer_matrix(w, cutoff_out, cutoff_in=None):
    """Truncated squeezer ``<s t|S(w)|k m>`` with ``s, t <= cutoff_out`` and
    ``k, m <= cutoff_in``; rows are ``s * (cutoff_out + 1) + t``, columns
    ``k * (cutoff_in + 1) + m``."""
    L = int(cutoff_out)
    K = L if cutoff_in is None else int(cutoff_in)
    k = np.arange(K + 1)[:, None, None]
    m = np.arange(K + 1)[None, :, None]
    d = np.arange(-K, L + 1)[None, None, :]
    s, t = k + d, m + d
    band = (s >= 0) & (t >= 0) & (s <= L) & (t <= L)
    band = np.broadcast_to(band, (K + 1, K + 1, L + K + 1))
    kk, mm, dd = np.nonzero(band)
    dd = dd - K
    vals = squeezer_fock_element(kk + dd, mm + dd, kk, mm, w)
    out = np.zeros(((L + 1) ** 2, (K + 1) ** 2))
    out[(kk + dd) * (L + 1) + (mm + dd), kk * (K + 1) + mm] = vals
    return out


def _thermal(k, N):
    """Thermal mass for broadcast arrays of counts and occupations."""
    k = np.asarray(k)
    N = np.asarray(N, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = xlogy(k, N) - (k + 1) * np.log1p(N)
    return np.where(k >= 0, np.exp(np.where(k >= 0, logp, -np.inf)), 0.0)


def default_cutoff(s, tol=1e-8, cap=64):
    """Smallest per-mode cutoff capturing all but ``tol`` of the thermal
    product distribution of the diagonalized state, capped at ``cap``."""
    p = sld_params(s)
    r1 = p.N1 / (1.0 + p.N1)
    r2 = p.N2 / (1.0 + p.N2)
    for c in range(1, cap + 1):
        if 1.0 - (1.0 - r1 ** (c + 1)) * (1.0 - r2 ** (c + 1)) < tol:
            return c
    return cap


@dataclass(frozen=True)
class PairPmf:
    """Truncated joint distribution of the two photon counts.

    ``table[z0, z1]`` is the probability of ``z0`` photons in the returned
    mode and ``z1`` in the idler; ``deficit`` is the mass beyond the cutoff.
    """

    cutoff: int
    table: np.ndarray
    deficit: float

    def normalized(self):
        return PairPmf(self.cutoff, self.table / self.table.sum(), 0.0)


def _d_range(N1, N2):
    rho = float(np.max(N1 * N2 / ((1.0 + N1) * (1.0 + N2))))
    if not rho > 0:
        return 0
    return min(int(math.ceil(math.log(_R_TAIL) / math.log(rho))) + 1, 4000)


def pair_pmf_cells(thetas, z0, z1, omega0, nS, nB):
    """Pair probabilities for cells ``(z0[j], z1[j])`` at each of ``thetas``.

    Returns an array of shape ``(len(thetas), len(z0))``.  The pmf depends
    on ``theta`` through both the thermal occupations and ``zeta(theta)``;
    the receiver setting ``omega0`` stays fixed.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    z0 = np.atleast_1d(np.asarray(z0, dtype=np.int64))
    z1 = np.atleast_1d(np.asarray(z1, dtype=np.int64))
    v = _scalars(thetas, nS, nB)
    N1 = v["N1"][:, None, None]
    N2 = v["N2"][:, None, None]
    W = omega0 + v["zeta"][:, None, None]
    d_lo = -int(np.minimum(z0, z1).max(initial=0))
    d = np.arange(d_lo, _d_range(v["N1"], v["N2"]) + 1)[None, None, :]
    a0 = z0[None, :, None]
    a1 = z1[None, :, None]
    s, t = a0 + d, a1 + d
    r = _thermal(s, N1) * _thermal(t, N2)
    amp = squeezer_fock_element(s, t, a0, a1, W)
    return np.sum(r * amp**2, axis=2)


def _segments(starts, counts):
    """Concatenation of ``arange(a, a + n)`` for each ``(a, n)``."""
    offsets = np.cumsum(counts) - counts
    return np.repeat(starts - offsets, counts) + np.arange(int(counts.sum()))


@functools.lru_cache(maxsize=32)
def _table_plan(cutoff, d_hi):
    """Theta-independent pieces of every squeezer term a full table needs.

    Terms are grouped by ``(cell, d)`` and groups by cell, both contiguous,
    so sums reduce with ``np.add.reduceat``.
    """
    c = int(cutoff)
    z0c, z1c = np.divmod(np.arange((c + 1) ** 2), c + 1)
    lo_c = np.minimum(z0c, z1c)
    n_d = d_hi + lo_c + 1
    cell = np.repeat(np.arange(z0c.size), n_d)
    d = _segments(-lo_c, n_d)
    z0, z1, lo = z0c[cell], z1c[cell], lo_c[cell]
    s, t = z0 + d, z1 + d

    u_lo = np.maximum(-d, 0)
    n_u = lo - u_lo + 1
    grp = np.repeat(np.arange(d.size), n_u)
    u = _segments(u_lo, n_u)
    Z0, Z1, D = z0[grp], z1[grp], d[grp]
    const = (
        0.5 * (_logfact(s[grp]) + _logfact(t[grp]) + _logfact(Z0) + _logfact(Z1))
        - _logfact(D + u)
        - _logfact(u)
        - _logfact(Z0 - u)
        - _logfact(Z1 - u)
    )
    return dict(
        s=s,
        t=t,
        group_starts=np.cumsum(n_u) - n_u,
        cell_starts=np.cumsum(n_d) - n_d,
        const=const,
        sign=np.where(u % 2 == 0, 1.0, -1.0),
        e=D + 2 * u,
        f=2 * u - Z0 - Z1 - 1,
    )


def pair_pmf_tables(thetas, omega0, nS, nB, cutoff):
    """Full truncated tables, shape ``(len(thetas), cutoff + 1, cutoff + 1)``.

    Same values as :func:`pair_pmf_cells` over the whole grid, but the
    factorial and sign parts of the squeezer elements are precomputed once
    per cutoff.  Only squared amplitudes enter, so the sign of the total
    squeeze drops out.
    """
    c = int(cutoff)
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    v = _scalars(thetas, nS, nB)
    plan = _table_plan(c, _d_range(v["N1"], v["N2"]))
    W = np.abs(omega0 + v["zeta"])[:, None]
    N1 = v["N1"][:, None]
    N2 = v["N2"][:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        log_tau = np.log(np.tanh(W))
        tau_part = np.where(plan["e"] == 0, 0.0, plan["e"] * log_tau)
    terms = plan["sign"] * np.exp(plan["const"] + tau_part + plan["f"] * np.log(np.cosh(W)))
    amp = np.add.reduceat(terms, plan["group_starts"], axis=1)
    r = _thermal(plan["s"], N1) * _thermal(plan["t"], N2)
    p = np.add.reduceat(r * amp**2, plan["cell_starts"], axis=1)
    return p.reshape(-1, c + 1, c + 1)


def _suggest_cutoff(s, omega0, max_deficit, start):
    c = start
    while c < 64:
        c = min(2 * c, 64)
        if 1.0 - pair_pmf_tables(s.theta, omega0, s.nS, s.nB, c)[0].sum() <= max_deficit:
            return c
    return 64


def output_pair_pmf(s, omega0, cutoff, max_deficit=1e-2):
    """Photon-pair distribution after the receiver squeeze ``omega0``.

    Raises :class:`TruncationError` if more than ``max_deficit`` of the mass
    lies beyond ``cutoff``.
    """
    if int(cutoff) < 1:
        raise DomainError("cutoff must be >= 1")
    table = pair_pmf_tables(s.theta, omega0, s.nS, s.nB, cutoff)[0]
    deficit = max(0.0, 1.0 - float(table.sum()))
    if max_deficit is not None and deficit > max_deficit:
        raise TruncationError(
            deficit, max_deficit, _suggest_cutoff(s, omega0, max_deficit, int(cutoff))
        )
    return PairPmf(int(cutoff), table, deficit)


def pair_pmf_fisher_information(s, omega0, cutoff, step=1e-5, normalized=True):
    """Classical Fisher information of the truncated pair pmf, by central
    differences in ``theta``."""
    P = pair_pmf_tables([s.theta - step, s.theta, s.theta + step], omega0, s.nS, s.nB, cutoff)
    if normalized:
        P = P / P.sum(axis=(1, 2), keepdims=True)
    dP = (P[2] - P[0]) / (2.0 * step)
    mask = P[1] > 0
    return float(np.sum(dP[mask] ** 2 / P[1][mask]))


# --- Fock-space density operator and SLD -------------------------------------

def sigma_fock(s, cutoff_out, cutoff_in):
    """Output density matrix ``S(-zeta) (rho_N1 x rho_N2) S(-zeta)^dag``
    truncated to ``cutoff_out`` photons per mode."""
    p = sld_params(s)
    V = squeezer_matrix(-p.zeta, cutoff_out, cutoff_in)
    k = np.arange(cutoff_in + 1)
    r = np.outer(_thermal(k, p.N1), _thermal(k, p.N2)).ravel()
    return (V * r) @ V.T


def sld_eigenvalues(p, k, m):
    """SLD eigenvalue on ``S(omega)|k m>``.

    The overall sign is negative: the diagonalized occupations fall as
    ``theta`` grows, so the log-derivative of the state carries ``-1/theta``.
    """
    return -(p.Fprime + p.T1 * np.asarray(k) + p.T2 * np.asarray(m)) / p.theta


def sld_fock(s, cutoff_out, cutoff_in):
    """SLD built from its eigen-decomposition, truncated like :func:`sigma_fock`."""
    p = sld_params(s)
    if not p.exists:
        raise ReceiverExistenceError(s, p.discriminant)
    V = squeezer_matrix(p.omega, cutoff_out, cutoff_in)
    k = np.arange(cutoff_in + 1)
    ev = sld_eigenvalues(p, k[:, None], k[None, :]).ravel()
    return (V * ev) @ V.T


class SldVerification(NamedTuple):
    residual: float
    trace_error: float
    deficit: float


def sld_verify(s, cutoff=20, delta=1e-4, pad=12, max_deficit=1e-6):
    """Check the SLD against its defining equation in truncated Fock space.

    Operators are built in a space padded by ``pad`` photons (and the
    input basis by another ``pad``) so that truncation edges do not leak
    into the comparison, which is made on the ``cutoff`` block.

    Returns ``(residual, trace_error, deficit)``: the Frobenius norm of
    ``(L sigma + sigma L)/2 - d sigma/d theta``, the relative error of
    ``Tr(L^2 sigma)`` against the closed-form QFI, and the mass of
    ``sigma`` outside the block.
    """
    if not receiver_exists(s):
        raise ReceiverExistenceError(s, sld_params(s).discriminant)
    if not (0 < s.theta - delta and s.theta + delta < 1):
        raise DomainError("delta leaves (0, 1)")
    L = int(cutoff) + pad
    K = L + pad
    keep = (np.arange(L + 1)[:, None] <= cutoff) & (np.arange(L + 1)[None, :] <= cutoff)
    keep = np.nonzero(keep.ravel())[0]
    blk = np.ix_(keep, keep)

    sig = sigma_fock(s, L, K)
    deficit = max(0.0, 1.0 - float(np.trace(sig[blk])))
    if deficit > max_deficit:
        raise TruncationError(deficit, max_deficit, int(cutoff) + 10)
    d_sig = (
        sigma_fock(s.with_theta(s.theta + delta), L, K)
        - sigma_fock(s.with_theta(s.theta - delta), L, K)
    ) / (2.0 * delta)
    lam = sld_fock(s, L, K)
    lam_sig = lam @ sig
    resid = 0.5 * (lam_sig + lam_sig.T) - d_sig
    J = qfi_tmsv(s)
    trace = float(np.einsum("ij,ji->", lam[blk], lam_sig[blk]))
    return SldVerification(
        float(np.linalg.norm(resid[blk])), abs(trace - J) / J, deficit
    )
