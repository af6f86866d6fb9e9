"""Registry of cross-module invariant checks run by ``transense verify``.

Each check returns a :class:`CheckResult`; tolerances live next to the
checks so the table that gates a release is in one place.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from .estimators import mle_opa
from .fisher import (
    fock_output_pmf,
    maximize_opa_gain,
    nbar_opa,
    pfie,
    qfi_fock,
    qfi_singlephoton,
    qfi_tmsv,
    qfi_upper_bound_per_photon,
)
from .gaussian import (
    SYMPLECTIC_FORM,
    Scenario,
    check_covariance,
    output_covariance,
    qfi_gaussian_numeric,
    symplectic_eigenvalues,
    tmsv_covariance,
    uhlmann_fidelity,
)
from .receiver import (
    existence_boundary,
    pair_pmf_fisher_information,
    sld_params,
    sld_verify,
    squeezer_matrix,
    verify_diagonalizing_squeeze,
)

__all__ = ["CheckResult", "Check", "REGISTRY", "run_checks", "fock_cfi_finite_difference"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0


@dataclass(frozen=True)
class Check:
    name: str
    tags: tuple
    func: object

    def run(self):
        t0 = time.perf_counter()
        value, tol, detail = self.func()
        dt = time.perf_counter() - t0
        passed = bool(np.isfinite(value) and value <= tol)
        return CheckResult(self.name, passed, float(value), float(tol), detail, dt)


REGISTRY = []


def register(*tags):
    def deco(func):
        REGISTRY.append(Check(func.__name__.removeprefix("check_"), tags, func))
        return func

    return deco


GRID_THETA = (0.1, 0.3, 0.5, 0.7, 0.9)
GRID_NS = (1e-3, 1e-2, 0.1, 0.5, 1.0)
GRID_NB = (0.1, 0.5, 1.0, 2.0, 5.0)
REFERENCE_POINT = Scenario(0.5, 0.01, 1.0)


def _grid():
    for th in GRID_THETA:
        for nS in GRID_NS:
            for nB in GRID_NB:
                yield Scenario(th, nS, nB)


def fock_cfi_finite_difference(m, s, step=1e-5, k_max=400):
    """Classical Fisher information of the Fock-probe count distribution by
    central differences in ``theta``."""
    k = np.arange(k_max)
    p = fock_output_pmf(k, m, s)
    dp = (
        fock_output_pmf(k, m, s.with_theta(s.theta + step))
        - fock_output_pmf(k, m, s.with_theta(s.theta - step))
    ) / (2.0 * step)
    keep = p > 0
    return float(np.sum(dp[keep] ** 2 / p[keep]))


# --- gaussian ----------------------------------------------------------------

@register("gaussian")
def check_uncertainty_relation():
    worst = 0.0
    for s in _grid():
        sig = output_covariance(s)
        check_covariance(sig)
        ev = np.linalg.eigvalsh(sig + 0.5j * SYMPLECTIC_FORM)
        worst = max(worst, -float(ev.min()))
    return max(worst, 0.0), 1e-10, "max violation of sigma + i Omega/2 >= 0"


@register("gaussian")
def check_tmsv_purity():
    worst = max(
        float(np.max(np.abs(symplectic_eigenvalues(tmsv_covariance(n)) - 0.5)))
        for n in (0.0, 0.01, 1.0, 10.0)
    )
    return worst, 1e-10, "symplectic eigenvalues of TMSV minus 1/2"


@register("gaussian")
def check_fidelity_symmetry():
    worst = 0.0
    for s in [Scenario(0.3, 0.1, 2.0), REFERENCE_POINT, Scenario(0.9, 1.0, 0.1)]:
        a = output_covariance(s)
        b = output_covariance(s.with_theta(s.theta * 0.9))
        worst = max(worst, abs(uhlmann_fidelity(a, b) - uhlmann_fidelity(b, a)))
    return worst, 1e-12, "|F(a, b) - F(b, a)|"


@register("gaussian", "fisher")
def check_numeric_qfi():
    worst = max(abs(qfi_gaussian_numeric(s) / qfi_tmsv(s) - 1.0) for s in _grid())
    return worst, 1e-5, "fidelity-curvature QFI vs closed form, 125-point grid"


# --- fisher ------------------------------------------------------------------

@register("fisher")
def check_qfi_limit():
    worst = 0.0
    for j in range(3, 7):
        s = Scenario(0.5, 10.0**-j, 1.0)
        dev = abs(pfie("tmsv", s) / pfie("ub", s) - 1.0)
        worst = max(worst, dev / (2 * s.nS * s.nB / (s.nB + 1)))
    s = Scenario(0.5, 1e-6, 1.0)
    dev = abs(qfi_tmsv(s) / s.nS / qfi_upper_bound_per_photon(s) - 1.0)
    return max(dev / 1e-4, worst), 1.0, "small-nS limit (deviation / envelope)"


@register("fisher")
def check_pfie_below_bound():
    worst = max(pfie("tmsv", s) / pfie("ub", s) for s in _grid())
    return worst, 1.0 - 1e-15, "max pfie(tmsv) / pfie(ub)"


@register("fisher")
def check_fock_vs_classical():
    worst = 0.0
    for m in (1, 2, 5):
        for th in (0.3, 0.5, 0.7):
            for nB in (0.5, 1.0, 2.0):
                s = Scenario(th, 0.01, nB)
                worst = max(worst, abs(fock_cfi_finite_difference(m, s) / qfi_fock(m, s) - 1.0))
    return worst, 1e-6, "Fock QFI vs finite-difference classical FI of the count pmf"


@register("fisher")
def check_singlephoton_vs_fock():
    worst = 0.0
    for th in (0.3, 0.5, 0.7):
        for nB in (0.5, 1.0, 2.0):
            s = Scenario(th, 0.01, nB)
            worst = max(worst, abs(qfi_singlephoton(s) - qfi_fock(1, s)) / qfi_fock(1, s))
    return worst, 1e-9, "single-photon series vs Fock formula at m = 1"


@register("fisher")
def check_fock_normalization():
    worst = 0.0
    for m in (1, 5, 30):
        for nB in (0.1, 1.0, 3.0):
            p = fock_output_pmf(np.arange(600), m, Scenario(0.5, 0.01, nB))
            worst = max(worst, abs(p.sum() - 1.0))
    return worst, 1e-9, "|sum of Fock output pmf - 1|"


@register("fisher")
def check_opa_below_bound():
    worst = max(maximize_opa_gain(s).fi / s.nS / pfie("ub", s) for s in _grid())
    return worst, 1.0, "max OPA fi / nS over the ultimate bound"


# --- receiver ----------------------------------------------------------------

@register("receiver", "sld")
def check_receiver_omega():
    p = sld_params(REFERENCE_POINT)
    err = max(abs(p.omega - 0.1428) / 1e-4, abs(p.squeezing_db - 1.24) / 1e-2)
    return err, 1.0, f"omega={p.omega:.6f}, {p.squeezing_db:.4f} dB (scaled error)"


@register("receiver", "sld")
def check_existence_boundaries():
    want = {0.1: 0.2882, 0.01: 0.0385, 0.001: 0.0040}
    err = max(abs(existence_boundary(nS, 1.0) - t) for nS, t in want.items())
    return err, 5e-4, "max |theta* - reference| at nB = 1"


@register("receiver", "sld")
def check_diagonalizing_squeeze():
    worst = max(verify_diagonalizing_squeeze(s) for s in _grid())
    return worst, 1e-10, "residual inter-mode covariance after the zeta squeeze"


@register("receiver", "sld")
def check_hyperbolic_identities():
    worst = 0.0
    for s in _grid():
        p = sld_params(s)
        worst = max(worst, abs(p.mu**2 - p.nu**2 - 1.0), abs(p.N1 + p.N2 + 1.0 - math.sqrt(p.a)))
        if p.exists:
            root = math.sqrt(p.discriminant)
            worst = max(worst, abs(p.T1 + p.T2 - root), abs(p.T1 - p.T2 - (p.C - p.D)))
    return worst, 1e-10, "mu^2 - nu^2 = 1, N1 + N2 + 1 = sqrt(a), T1 +/- T2"


@register("receiver", "sld")
def check_sld_equation():
    worst = 0.0
    for s in (REFERENCE_POINT, Scenario(0.7, 0.005, 0.5)):
        r = sld_verify(s, cutoff=20)
        worst = max(worst, r.residual / 1e-6, r.trace_error / 5e-3)
    return worst, 1.0, "SLD residual / 1e-6 and trace error / 5e-3, cutoff 20"


@register("receiver", "sld")
def check_squeezer_unitarity():
    worst = 0.0
    for w in (-0.5, -0.25, 0.0, 0.1428, 0.5):
        M = squeezer_matrix(w, 60, 9)
        worst = max(worst, float(np.max(np.abs(1.0 - np.sum(M**2, axis=0)))))
    return worst, 1e-8, "column mass deficit at cutoff 60, inputs k, m <= 9"


@register("receiver", "sld")
def check_receiver_efficiency():
    s = REFERENCE_POINT
    ratio = pair_pmf_fisher_information(s, sld_params(s).omega, 9) / qfi_tmsv(s)
    return 0.99 / ratio, 1.0, f"pair-pmf FI / QFI = {ratio:.5f} at cutoff 9"


# --- estimators --------------------------------------------------------------

@register("estimators")
def check_opa_inversion():
    worst = 0.0
    for th in np.arange(1, 10) / 10:
        s = Scenario(th, 0.01, 1.0)
        G = maximize_opa_gain(s).gain
        worst = max(worst, abs(mle_opa([nbar_opa(s, G)], G, s.nS, s.nB).theta_hat - th))
    return worst, 1e-9, "mle_opa(nbar_opa(theta)) - theta"


def select(pattern=None):
    if not pattern:
        return list(REGISTRY)
    return [c for c in REGISTRY if pattern in c.tags or pattern in c.name]


def run_checks(pattern=None, on_result=None):
    results = []
    for check in select(pattern):
        try:
            res = check.run()
        except Exception as exc:  # a crashing check is a failing check
            res = CheckResult(check.name, False, math.nan, math.nan, f"{type(exc).__name__}: {exc}")
        results.append(res)
        if on_result is not None:
            on_result(res)
    return results
