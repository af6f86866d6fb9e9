import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import squeezer_expm
from transense.exceptions import ReceiverExistenceError, TruncationError
from transense.fisher import qfi_tmsv
from transense.gaussian import Scenario, thermal_pmf
from transense.receiver import (
    default_cutoff,
    existence_boundary,
    output_pair_pmf,
    pair_pmf_cells,
    pair_pmf_fisher_information,
    pair_pmf_tables,
    receiver_exists,
    sigma_fock,
    sld_eigenvalues,
    sld_fock,
    sld_params,
    sld_verify,
    squeezer_fock_element,
    squeezer_matrix,
    verify_diagonalizing_squeeze,
)

P = Scenario(0.5, 0.01, 1.0)
scenarios = st.builds(Scenario, st.floats(0.05, 0.95), st.floats(1e-3, 2.0), st.floats(0.05, 5.0))


class TestParams:
    def test_reference_point(self):
        p = sld_params(P)
        assert p.exists
        assert abs(p.omega - 0.1428) < 1e-4
        assert abs(p.squeezing_db - 1.24) < 1e-2
        assert p.zeta == pytest.approx(-0.03532, abs=1e-5)
        assert p.N1 == pytest.approx(1.00249, abs=1e-5)
        assert p.N2 == pytest.approx(0.0074907, abs=1e-7)

    def test_no_signal(self):
        p = sld_params(Scenario(0.5, 0.0, 1.0))
        assert p.zeta == 0 and p.N1 == pytest.approx(1.0) and p.N2 == 0

    @given(scenarios)
    def test_property_identities(self, s):
        p = sld_params(s)
        assert abs(p.mu**2 - p.nu**2 - 1) < 1e-12
        assert p.N1 >= 0 and p.N2 >= 0
        assert abs(p.N1 + p.N2 + 1 - math.sqrt(p.a)) < 1e-10
        assert math.cosh(p.zeta) > 0 and p.zeta <= 0
        if p.exists:
            root = math.sqrt(p.discriminant)
            assert abs(p.T1 + p.T2 - root) < 1e-10
            assert abs(p.T1 - p.T2 - (p.C - p.D)) < 1e-10
            c2, s2 = math.cosh(2 * p.lam), math.sinh(2 * p.lam)
            assert abs(c2**2 - s2**2 - 1) < 1e-10 * c2**2
            assert s2 * p.E >= 0
        else:
            assert p.omega is None and p.squeezing_db is None

    def test_omega_grows_slowly_with_noise(self):
        w1 = sld_params(Scenario(0.5, 0.01, 1)).omega
        w10 = sld_params(Scenario(0.5, 0.01, 10)).omega
        assert 0 < w10 - w1 < 0.5


class TestExistence:
    @pytest.mark.parametrize(
        "s,want", [(P, True), (Scenario(0.1, 0.1, 1), False), (Scenario(0.05, 0.01, 1), True)]
    )
    def test_examples(self, s, want):
        assert receiver_exists(s) is want
        assert sld_params(s).exists is want

    @pytest.mark.parametrize("nS,want", [(0.1, 0.2882), (0.01, 0.0385), (0.001, 0.0040)])
    def test_boundaries(self, nS, want):
        assert abs(existence_boundary(nS, 1.0) - want) < 5e-4

    def test_boundary_is_sharp(self):
        t = existence_boundary(0.1, 1.0)
        assert not receiver_exists(Scenario(t - 1e-5, 0.1, 1.0))
        assert receiver_exists(Scenario(t + 1e-5, 0.1, 1.0))

    def test_squeezing_diverges_near_boundary(self):
        t = existence_boundary(0.1, 1.0)
        db = [sld_params(Scenario(t + d, 0.1, 1.0)).squeezing_db for d in (1e-4, 1e-3, 1e-2, 1e-1)]
        assert np.all(np.diff(db) < 0) and db[0] > 5


class TestDiagonalizingSqueeze:
    @pytest.mark.parametrize("s", [P, Scenario(0.3, 0.1, 2)])
    def test_residual(self, s):
        assert verify_diagonalizing_squeeze(s) < 1e-10

    def test_no_signal_exact(self):
        assert verify_diagonalizing_squeeze(Scenario(0.5, 0.0, 1.0)) == 0.0


class TestSqueezer:
    def test_vacuum_element(self):
        assert squeezer_fock_element(0, 0, 0, 0, 0.3) == pytest.approx(1 / math.cosh(0.3))

    @pytest.mark.parametrize("n", [0, 1, 4, 9])
    def test_tmsv_amplitudes(self, n):
        w = 0.3
        want = (-math.tanh(w)) ** n / math.cosh(w)
        assert squeezer_fock_element(n, n, 0, 0, w) == pytest.approx(want, rel=1e-13)

    def test_selection_rule(self):
        assert squeezer_fock_element(3, 1, 1, 0, 0.3) == 0.0

    @pytest.mark.parametrize("w", [0.3, -0.4])
    def test_against_matrix_exponential(self, w):
        dim, L = 30, 6
        U = squeezer_expm(w, dim)
        idx = (np.arange(L + 1)[:, None] * dim + np.arange(L + 1)[None, :]).ravel()
        np.testing.assert_allclose(squeezer_matrix(w, L, L), U[np.ix_(idx, idx)], atol=1e-12)

    @pytest.mark.parametrize("w", [-0.5, 0.0, 0.1428, 0.5])
    def test_unitarity(self, w):
        M = squeezer_matrix(w, 60, 9)
        assert np.max(np.abs(1 - np.sum(M**2, axis=0))) < 1e-8

    def test_inverse(self):
        A = squeezer_matrix(0.2, 40, 40) @ squeezer_matrix(-0.2, 40, 5)
        idx = (np.arange(6)[:, None] * 41 + np.arange(6)[None, :]).ravel()
        np.testing.assert_allclose(A[idx], np.eye(36), atol=1e-10)


class TestPairPmf:
    def test_identity_squeeze_factorizes(self):
        p = sld_params(P)
        pmf = output_pair_pmf(P, -p.zeta, 30)
        k = np.arange(31)
        np.testing.assert_allclose(pmf.table, np.outer(thermal_pmf(k, p.N1), thermal_pmf(k, p.N2)), atol=1e-15)
        np.testing.assert_allclose(pmf.table.sum(axis=1), thermal_pmf(k, p.N1), atol=1e-9)

    def test_matched_mass(self):
        pmf = output_pair_pmf(P, sld_params(P).omega, 9)
        assert 1 - pmf.deficit > 0.99
        assert np.all(pmf.table >= 0) and pmf.deficit >= 0
        assert pmf.normalized().table.sum() == pytest.approx(1.0, abs=1e-14)

    def test_fast_path_matches_cells(self):
        w = sld_params(P).omega
        c = 6
        z0, z1 = np.divmod(np.arange((c + 1) ** 2), c + 1)
        th = [0.3, 0.5]
        a = pair_pmf_cells(th, z0, z1, w, P.nS, P.nB).reshape(2, c + 1, c + 1)
        b = pair_pmf_tables(th, w, P.nS, P.nB, c)
        np.testing.assert_allclose(a, b, atol=1e-15)

    def test_quantum_efficiency(self):
        ratio = pair_pmf_fisher_information(P, sld_params(P).omega, 9) / qfi_tmsv(P)
        assert 0.99 <= ratio < 1.0 + 1e-6

    def test_truncation_error_suggests_cutoff(self):
        s = Scenario(0.5, 0.01, 5.0)
        with pytest.raises(TruncationError) as exc:
            output_pair_pmf(s, sld_params(s).omega, 3, max_deficit=1e-3)
        err = exc.value
        assert err.deficit > 1e-3 and err.suggested_cutoff > 3
        output_pair_pmf(s, sld_params(s).omega, err.suggested_cutoff, max_deficit=1e-3)

    def test_default_cutoff(self):
        c = default_cutoff(P)
        p = sld_params(P)
        k = np.arange(c + 1)
        assert 1 - thermal_pmf(k, p.N1).sum() * thermal_pmf(k, p.N2).sum() < 1e-8
        assert c <= 64


class TestSld:
    def test_defining_equation(self):
        r = sld_verify(P, cutoff=20)
        assert r.residual < 1e-6 and r.trace_error < 5e-3

    def test_second_point(self):
        r = sld_verify(Scenario(0.7, 0.005, 0.5), cutoff=20)
        assert r.residual < 1e-6 and r.trace_error < 5e-3

    def test_trace_normalization(self):
        c, pad = 30, 12
        L = c + pad
        sig = sigma_fock(P, L, L + pad)
        idx = (np.arange(c + 1)[:, None] * (L + 1) + np.arange(c + 1)[None, :]).ravel()
        assert 1 - np.trace(sig[np.ix_(idx, idx)]) < 1e-8

    def test_eigen_relation(self):
        p = sld_params(P)
        L = 36
        lam = sld_fock(P, L, L + 10)
        v = squeezer_matrix(-p.zeta, L, L + 10) @ squeezer_matrix(p.lam, L + 10, 5)
        for k in range(6):
            for m in range(6):
                col = v[:, k * 6 + m]
                ev = sld_eigenvalues(p, k, m)
                assert np.linalg.norm(lam @ col - ev * col) / np.linalg.norm(col) < 1e-6

    def test_requires_existence(self):
        with pytest.raises(ReceiverExistenceError):
            sld_verify(Scenario(0.1, 0.1, 1))
