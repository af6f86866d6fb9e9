import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import fock_fidelity, thermal_dm
from transense.exceptions import DomainError, NumericDomainError, StepUnderflowError
from transense.fisher import qfi_tmsv
from transense.gaussian import (
    SYMPLECTIC_FORM,
    Scenario,
    apply_loss_channel,
    check_covariance,
    output_covariance,
    qfi_gaussian_numeric,
    symplectic_eigenvalues,
    thermal_pmf,
    tmsv_covariance,
    uhlmann_fidelity,
)

thetas = st.floats(0.05, 0.95)
photons = st.floats(1e-3, 2.0)
noise = st.floats(0.05, 5.0)


class TestScenario:
    def test_valid(self):
        s = Scenario(0.5, 0.01, 1)
        assert s.nT == pytest.approx(2.0)
        assert isinstance(s.nB, float)

    @pytest.mark.parametrize("args", [(0, 0.1, 1), (1, 0.1, 1), (0.5, -1, 1), (0.5, 0.1, -0.1), (math.nan, 0.1, 1)])
    def test_invalid(self, args):
        with pytest.raises(DomainError):
            Scenario(*args)


class TestThermalPmf:
    def test_examples(self):
        assert thermal_pmf(0, 0) == 1
        assert thermal_pmf(3, 0) == 0
        assert thermal_pmf(0, 1) == 0.5
        assert thermal_pmf(2, 1) == pytest.approx(0.125)

    def test_vectorized_sums_to_one(self):
        assert thermal_pmf(np.arange(400), 3.0).sum() == pytest.approx(1.0, abs=1e-12)

    def test_negative_mean(self):
        with pytest.raises(DomainError):
            thermal_pmf(0, -0.1)


class TestCovariances:
    def test_vacuum(self):
        np.testing.assert_allclose(tmsv_covariance(0), np.eye(4) / 2)

    def test_tmsv_entries(self):
        sig = tmsv_covariance(1.0)
        assert sig[0, 0] == 1.5 and sig[0, 1] == pytest.approx(math.sqrt(2))
        assert sig[2, 3] == pytest.approx(-math.sqrt(2))

    @pytest.mark.parametrize("nS", [0, 0.01, 1, 10])
    def test_tmsv_is_pure(self, nS):
        np.testing.assert_allclose(symplectic_eigenvalues(tmsv_covariance(nS)), [0.5, 0.5], atol=1e-10)

    def test_identity_channel_limit(self):
        s = Scenario(1 - 1e-15, 0.3, 0.0)
        np.testing.assert_allclose(apply_loss_channel(tmsv_covariance(0.3), s), tmsv_covariance(0.3), atol=1e-12)

    def test_loss_channel_against_matrix_arithmetic(self):
        s = Scenario(0.5, 1.0, 1.0)
        out = output_covariance(s)
        assert out[1, 1] == pytest.approx(2.0) and out[0, 1] == pytest.approx(1.0)
        X = np.diag([1, math.sqrt(0.5), 1, math.sqrt(0.5)])
        Y = np.diag([0, 1.25, 0, 1.25])
        np.testing.assert_allclose(out, X @ tmsv_covariance(1.0) @ X.T + Y, atol=1e-15)

    def test_vacuum_in_thermal_out(self):
        out = apply_loss_channel(tmsv_covariance(0), Scenario(0.5, 0, 1))
        np.testing.assert_allclose(out, np.diag([0.5, 1.5, 0.5, 1.5]))

    def test_rejects_unphysical(self):
        with pytest.raises(NumericDomainError):
            check_covariance(np.eye(4) * 0.1)
        bad = np.eye(4)
        bad[0, 1] = 1e-6
        with pytest.raises(NumericDomainError):
            check_covariance(bad)

    @given(thetas, photons, noise)
    def test_property_uncertainty(self, th, nS, nB):
        sig = output_covariance(Scenario(th, nS, nB))
        assert np.linalg.eigvalsh(sig + 0.5j * SYMPLECTIC_FORM).min() >= -1e-10


class TestFidelity:
    def test_identical(self):
        sig = output_covariance(Scenario(0.4, 0.2, 1))
        assert uhlmann_fidelity(sig, sig) == pytest.approx(1.0, abs=1e-14)

    def test_against_fock_oracle(self):
        dim = 40
        want = fock_fidelity(
            np.kron(thermal_dm(0, dim), thermal_dm(0, dim)),
            np.kron(thermal_dm(0, dim), thermal_dm(1.0, dim)),
        )
        got = uhlmann_fidelity(np.eye(4) / 2, np.diag([0.5, 1.5, 0.5, 1.5]))
        assert got == pytest.approx(want, rel=1e-9)

    def test_continuity(self):
        s = Scenario(0.5, 0.01, 1)
        a = output_covariance(s)
        gaps = [1 - uhlmann_fidelity(a, output_covariance(s.with_theta(0.5 + d))) for d in (1e-2, 1e-3)]
        # quadratic in delta
        assert gaps[0] / gaps[1] == pytest.approx(100, rel=0.05)

    @given(thetas, photons, noise, st.floats(0.5, 0.99))
    def test_property_symmetric(self, th, nS, nB, f):
        s = Scenario(th, nS, nB)
        a, b = output_covariance(s), output_covariance(s.with_theta(th * f))
        assert abs(uhlmann_fidelity(a, b) - uhlmann_fidelity(b, a)) < 1e-12


class TestNumericQfi:
    def test_reference_point(self):
        assert qfi_gaussian_numeric(Scenario(0.5, 0.01, 1)) == pytest.approx(1.3267489711934156e-2, rel=1e-9)

    def test_pure_loss(self):
        assert qfi_gaussian_numeric(Scenario(0.5, 1, 0)) == pytest.approx(4.0, rel=1e-9)

    def test_richardson_consistency(self):
        s = Scenario(0.3, 0.1, 2)
        h = 1e-4 * s.theta
        a, b = qfi_gaussian_numeric(s, h), qfi_gaussian_numeric(s, h / 2)
        assert abs(a - b) / b < 1e-5

    def test_step_underflow(self):
        with pytest.raises(StepUnderflowError):
            qfi_gaussian_numeric(Scenario(0.5, 0.01, 1), step=1e-40)

    def test_bad_step(self):
        with pytest.raises(DomainError):
            qfi_gaussian_numeric(Scenario(0.5, 0.01, 1), step=-1)
        with pytest.raises(DomainError):
            qfi_gaussian_numeric(Scenario(0.5, 0.01, 1), step=0.6)

    @given(st.floats(0.1, 0.9), st.floats(1e-3, 1.0), st.floats(0.1, 5.0))
    def test_property_matches_closed_form(self, th, nS, nB):
        s = Scenario(th, nS, nB)
        assert abs(qfi_gaussian_numeric(s) / qfi_tmsv(s) - 1) < 1e-5
