"""Phase-space description of the TMSV probe and the lossy thermal-noise channel.

Covariance matrices use the ``(q_I, q_R, p_I, p_R)`` ordering with vacuum
variance 1/2 per quadrature, where ``I`` is the retained idler and ``R`` the
returned probe.  Fidelities are the root (amplitude) Uhlmann fidelity
``Tr sqrt(sqrt(rho1) rho2 sqrt(rho1))``, so that the quantum Fisher
information is ``-4`` times its second derivative.
"""

from dataclasses import dataclass, replace

import mpmath
import numpy as np

from .exceptions import DomainError, NumericDomainError, StepUnderflowError

__all__ = [
    "Scenario",
    "SYMPLECTIC_FORM",
    "thermal_pmf",
    "tmsv_covariance",
    "loss_channel_matrices",
    "apply_loss_channel",
    "output_covariance",
    "check_covariance",
    "symplectic_eigenvalues",
    "uhlmann_fidelity",
    "qfi_gaussian_numeric",
]

SYMPLECTIC_FORM = np.block(
    [[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]]
)

# Radicands and invariant bounds are allowed to miss by this much.
INVARIANT_TOL = 1e-10
FIDELITY_DPS = 50


@dataclass(frozen=True)
class Scenario:
    """Physical operating point.

    Parameters
    ----------
    theta : float
        Power transmittance, strictly inside (0, 1).
    nS : float
        Mean transmitted photons per mode.
    nB : float
        Mean background photons per mode reaching the receiver.
    """

    theta: float
    nS: float
    nB: float

    def __post_init__(self):
        for name in ("theta", "nS", "nB"):
            val = getattr(self, name)
            if not np.isfinite(val):
                raise DomainError(f"{name} must be finite, got {val!r}")
            object.__setattr__(self, name, float(val))
        if not 0.0 < self.theta < 1.0:
            raise DomainError(f"theta must lie in (0, 1), got {self.theta!r}")
        if self.nS < 0:
            raise DomainError(f"nS must be >= 0, got {self.nS!r}")
        if self.nB < 0:
            raise DomainError(f"nB must be >= 0, got {self.nB!r}")

    @property
    def nT(self):
        """Environment occupation that keeps the background at nB at the receiver."""
        return self.nB / (1.0 - self.theta)

    def with_theta(self, theta):
        return replace(self, theta=theta)


def thermal_pmf(k, nbar):
    """Bose-Einstein mass ``nbar**k / (1 + nbar)**(k + 1)``.

    ``k`` may be an integer array; negative entries get zero mass.
    """
    if nbar < 0:
        raise DomainError(f"mean photon number must be >= 0, got {nbar!r}")
    k = np.asarray(k)
    if nbar == 0:
        out = np.where(k == 0, 1.0, 0.0)
    else:
        kk = np.maximum(k, 0)
        logp = kk * np.log(nbar) - (kk + 1) * np.log1p(nbar)
        out = np.where(k >= 0, np.exp(logp), 0.0)
    return out[()] if out.ndim == 0 else out


def tmsv_covariance(nS):
    if nS < 0:
        raise DomainError(f"nS must be >= 0, got {nS!r}")
    u1 = nS + 0.5
    u2 = np.sqrt(nS * (nS + 1.0))
    return np.array(
        [
            [u1, u2, 0.0, 0.0],
            [u2, u1, 0.0, 0.0],
            [0.0, 0.0, u1, -u2],
            [0.0, 0.0, -u2, u1],
        ]
    )


def loss_channel_matrices(s):
    """Return ``(X, Y)`` with ``sigma_out = X sigma_in X^T + Y`` on the probe mode."""
    st = np.sqrt(s.theta)
    noise = s.nB + 0.5 - 0.5 * s.theta
    X = np.diag([1.0, st, 1.0, st])
    Y = np.diag([0.0, noise, 0.0, noise])
    return X, Y


def apply_loss_channel(sigma_in, s):
    sigma_in = check_covariance(sigma_in)
    X, Y = loss_channel_matrices(s)
    out = X @ sigma_in @ X.T + Y
    return 0.5 * (out + out.T)


def output_covariance(s):
    """Covariance of the returned probe and retained idler for TMSV input."""
    return apply_loss_channel(tmsv_covariance(s.nS), s)


def check_covariance(sigma, tol=INVARIANT_TOL):
    """Validate a two-mode covariance matrix and return it as a float array.

    Raises :class:`NumericDomainError` if the matrix is not symmetric or
    violates the uncertainty relation ``sigma + i Omega / 2 >= 0``.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (4, 4):
        raise DomainError(f"expected a 4x4 covariance, got shape {sigma.shape}")
    asym = np.max(np.abs(sigma - sigma.T))
    if asym > 1e-12:
        raise NumericDomainError("symmetry", asym)
    eig = np.linalg.eigvalsh(sigma + 0.5j * SYMPLECTIC_FORM)
    if eig.min() < -tol:
        raise NumericDomainError("uncertainty", eig.min())
    return sigma


def symplectic_eigenvalues(sigma):
    """Symplectic spectrum (two values, ascending) of a two-mode covariance."""
    ev = np.abs(np.linalg.eigvals(1j * SYMPLECTIC_FORM @ np.asarray(sigma, dtype=float)))
    return np.sort(ev)[::2]


def _to_mp(sigma):
    if isinstance(sigma, mpmath.matrix):
        return sigma
    return mpmath.matrix(np.asarray(sigma, dtype=float).tolist())


_OMEGA_MP = None


def _omega_mp():
    global _OMEGA_MP
    if _OMEGA_MP is None:
        _OMEGA_MP = mpmath.matrix(SYMPLECTIC_FORM.tolist())
    return _OMEGA_MP


def _clamped_sqrt(x, name):
    if x < 0:
        if x < -INVARIANT_TOL:
            raise NumericDomainError(name, float(x))
        return mpmath.mpf(0)
    return mpmath.sqrt(x)


def _fidelity_mp(S1, S2):
    Om = _omega_mp()
    eye = mpmath.eye(4)
    delta = mpmath.det(S1 + S2)
    gamma = 16 * mpmath.det(Om * S1 * Om * S2 - eye / 4)
    lam = 16 * mpmath.re(mpmath.det(S1 + 0.5j * Om) * mpmath.det(S2 + 0.5j * Om))
    if delta < 1 - INVARIANT_TOL:
        raise NumericDomainError("Delta", float(delta))
    if gamma < delta - INVARIANT_TOL * max(1, abs(delta)):
        raise NumericDomainError("Gamma", float(gamma))
    root = _clamped_sqrt(gamma, "Gamma") + _clamped_sqrt(lam, "Lambda")
    inner = root - _clamped_sqrt(root * root - delta, "(sqrt(Gamma)+sqrt(Lambda))^2-Delta")
    if inner <= 0:
        raise NumericDomainError("fidelity denominator", float(inner))
    return 1 / mpmath.sqrt(inner)


def uhlmann_fidelity(sigma1, sigma2, dps=FIDELITY_DPS):
    """Root fidelity between two zero-mean two-mode Gaussian states.

    Evaluated through the symplectic invariants ``Delta``, ``Gamma`` and
    ``Lambda`` in ``dps``-digit arithmetic; the 4x4 determinants are
    otherwise too noisy for the fidelity's use in second differences.
    """
    check_covariance(sigma1)
    check_covariance(sigma2)
    with mpmath.workdps(dps):
        return float(_fidelity_mp(_to_mp(sigma1), _to_mp(sigma2)))


def _output_covariance_mp(theta, nS, nB):
    half = mpmath.mpf(1) / 2
    w11 = nS + half
    w22 = nB + theta * nS + half
    w12 = mpmath.sqrt(theta * nS * (nS + 1))
    return mpmath.matrix(
        [[w11, w12, 0, 0], [w12, w22, 0, 0], [0, 0, w11, -w12], [0, 0, -w12, w22]]
    )


def qfi_gaussian_numeric(s, step=None, dps=FIDELITY_DPS):
    """Quantum Fisher information from the curvature of the fidelity.

    Central second difference of ``F(sigma(theta), sigma(theta + d))`` at
    steps ``h`` and ``h/2``, combined by Richardson extrapolation.  The
    default step is ``1e-4 * theta``.
    """
    h = 1e-4 * s.theta if step is None else float(step)
    if h <= 0:
        raise DomainError(f"step must be > 0, got {h!r}")
    if s.theta - h <= 0 or s.theta + h >= 1:
        raise DomainError(f"step {h!r} leaves (0, 1) around theta={s.theta}")
    with mpmath.workdps(dps):
        th, nS, nB = (mpmath.mpf(v) for v in (s.theta, s.nS, s.nB))
        S0 = _output_covariance_mp(th, nS, nB)
        hh = mpmath.mpf(h)

        def second_difference(d):
            fp = _fidelity_mp(S0, _output_covariance_mp(th + d, nS, nB))
            fm = _fidelity_mp(S0, _output_covariance_mp(th - d, nS, nB))
            if fp == 1 or fm == 1:
                if nS == 0:
                    return mpmath.mpf(0)
                raise StepUnderflowError(float(d), float(min(fp, fm)))
            return -4 * (fp + fm - 2) / d**2

        coarse = second_difference(hh)
        fine = second_difference(hh / 2)
        return float((4 * fine - coarse) / 3)
