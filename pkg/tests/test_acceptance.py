"""Release acceptance criteria, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line (also collected
into the terminal summary) and then asserts.  Tolerances are fixed here.
"""

import io
import os
import time

import numpy as np
import pytest

from transense.checks import fock_cfi_finite_difference
from transense.cli import main
from transense.estimators import mle_opa
from transense.fisher import maximize_opa_gain, nbar_opa, qfi_fock, qfi_singlephoton, qfi_tmsv
from transense.gaussian import Scenario, qfi_gaussian_numeric
from transense.montecarlo import ExperimentConfig, run_mse_experiment
from transense.receiver import (
    existence_boundary,
    pair_pmf_fisher_information,
    sld_params,
    sld_verify,
    squeezer_matrix,
)

P = Scenario(0.5, 0.01, 1.0)
RESULTS = {}


def report(capsys, number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def test_criterion_01_receiver_squeeze(capsys):
    p = sld_params(P)
    ok = abs(p.omega - 0.1428) <= 1e-4 and abs(p.squeezing_db - 1.24) <= 1e-2
    report(capsys, 1, ok, f"omega={p.omega:.6f} (0.1428 +/- 1e-4), {p.squeezing_db:.4f} dB (1.24 +/- 0.01)")


def test_criterion_02_existence_boundaries(capsys):
    want = {0.1: 0.2882, 0.01: 0.0385, 0.001: 0.0040}
    got = {nS: existence_boundary(nS, 1.0) for nS in want}
    ok = all(abs(got[nS] - t) <= 5e-4 for nS, t in want.items())
    detail = ", ".join(f"nS={nS}: {got[nS]:.5f}" for nS in want)
    report(capsys, 2, ok, f"{detail} (+/- 5e-4)")


def test_criterion_03_numeric_qfi(capsys):
    grid = [
        Scenario(th, nS, nB)
        for th in (0.1, 0.3, 0.5, 0.7, 0.9)
        for nS in (1e-3, 1e-2, 0.1, 0.5, 1.0)
        for nB in (0.1, 0.5, 1.0, 2.0, 5.0)
    ]
    worst = max(abs(qfi_gaussian_numeric(s) / qfi_tmsv(s) - 1) for s in grid)
    report(capsys, 3, worst < 1e-5, f"max rel. deviation {worst:.2e} over 125 points (< 1e-5)")


def test_criterion_04_small_signal_limit(capsys):
    s = Scenario(0.5, 1e-6, 1.0)
    bound = 1 / (s.theta * (s.nB + 1 - s.theta))
    dev = abs(qfi_tmsv(s) / s.nS - bound) / bound
    report(capsys, 4, dev < 1e-4, f"relative deviation {dev:.2e} (< 1e-4)")


def test_criterion_05_sld(capsys):
    r = sld_verify(P, cutoff=20)
    ok = r.residual < 1e-6 and r.trace_error < 5e-3
    report(capsys, 5, ok, f"residual {r.residual:.2e} (< 1e-6), trace error {r.trace_error:.2e} (< 5e-3)")


def test_criterion_06_receiver_efficiency(capsys):
    ratio = pair_pmf_fisher_information(P, sld_params(P).omega, 9) / qfi_tmsv(P)
    report(capsys, 6, ratio >= 0.99, f"pair-pmf FI / QFI = {ratio:.5f} at cutoff 9 (>= 0.99)")


def test_criterion_07_fock_cross_check(capsys):
    worst = 0.0
    for m in (1, 2, 5):
        for th in (0.3, 0.5, 0.7):
            for nB in (0.5, 1.0, 2.0):
                s = Scenario(th, 0.01, nB)
                worst = max(worst, abs(fock_cfi_finite_difference(m, s) / qfi_fock(m, s) - 1))
    s = Scenario(0.5, 0.01, 1.0)
    sp = abs(qfi_singlephoton(s) - qfi_fock(1, s)) / qfi_fock(1, s)
    ok = worst < 1e-6 and sp < 1e-9
    report(capsys, 7, ok, f"Fock vs count FI {worst:.2e} (< 1e-6), single-photon vs Fock {sp:.2e} (< 1e-9)")


@pytest.fixture(scope="module")
def desk_scale_run():
    workers = min(8, os.cpu_count() or 1)
    out = {}
    t0 = time.perf_counter()
    for receiver in ("coherent", "opa", "tmsv"):
        cfg = ExperimentConfig(scenario=P, receiver=receiver, n_grid=(16384,), trials=5000, threads=workers)
        out[receiver] = run_mse_experiment(cfg).rows[0]
    return out, time.perf_counter() - t0, workers


def test_criterion_08_desk_scale_convergence(capsys, desk_scale_run):
    rows, seconds, workers = desk_scale_run
    c = {k: r.c_theta for k, r in rows.items()}
    ref_tmsv = 1.05 / qfi_tmsv(P)
    ok_coh = abs(c["coherent"] / 150 - 1) <= 0.10
    ok_tmsv = abs(c["tmsv"] / ref_tmsv - 1) <= 0.15
    ok_order = c["tmsv"] < c["opa"] < c["coherent"]
    # the time budget is stated for 8 cores; only enforce it when they exist
    ok_time = seconds < 1800 or workers < 8
    ok = ok_coh and ok_tmsv and ok_order and ok_time
    ci = {k: r.n * r.ci95 for k, r in rows.items()}
    detail = (
        f"c_coh={c['coherent']:.1f}+/-{ci['coherent']:.1f} (150 +/- 10%), "
        f"c_opa={c['opa']:.1f}+/-{ci['opa']:.1f}, "
        f"c_tmsv={c['tmsv']:.1f}+/-{ci['tmsv']:.1f} ({ref_tmsv:.1f} +/- 15%), "
        f"order {'ok' if ok_order else 'violated'}, {seconds:.0f}s on {workers} worker(s), "
        f"fallback rate {rows['tmsv'].flag_rates['receiver_fallback']:.3f}"
    )
    report(capsys, 8, ok, detail)


def test_criterion_09_opa_inversion(capsys):
    worst = 0.0
    for th in np.arange(1, 10) / 10:
        s = P.with_theta(th)
        G = maximize_opa_gain(s).gain
        worst = max(worst, abs(mle_opa([nbar_opa(s, G)], G, s.nS, s.nB).theta_hat - th))
    report(capsys, 9, worst < 1e-9, f"max |theta_hat - theta| = {worst:.2e} (< 1e-9)")


def test_criterion_10_squeezer_unitarity(capsys):
    worst = 0.0
    for w in np.linspace(-0.5, 0.5, 11):
        M = squeezer_matrix(w, 60, 9)
        worst = max(worst, float(np.max(np.abs(1 - np.sum(M**2, axis=0)))))
    report(capsys, 10, worst < 1e-8, f"max column deficit {worst:.2e} at cutoff 60, |w| <= 0.5, k,m <= 9 (< 1e-8)")


def test_criterion_11_determinism(capsys, tmp_path):
    args = ["mse", "--receiver", "tmsv", "--n-grid", "16,128,1024", "--trials", "256", "--seed", "314"]
    blobs = {}
    for threads in (1, 4, 8):
        out = tmp_path / f"t{threads}.csv"
        code = main(args + ["--threads", str(threads), "--out", str(out)], stdout=io.StringIO())
        assert code == 0
        blobs[threads] = out.read_bytes()
    ok = blobs[1] == blobs[4] == blobs[8]
    report(capsys, 11, ok, f"CSV bytes identical across 1/4/8 workers: {ok} ({len(blobs[1])} bytes)")
