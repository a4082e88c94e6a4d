import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from tfqkd.estimators import DriftCalibration, KeyRateCurve
from tfqkd.optimize import optimal_mu
from tfqkd.phase import drift_sigma
from tfqkd.rates import qkd_rate, tfqkd_rate


class TestKeyRateCurve:
    def test_params_roundtrip(self):
        est = KeyRateCurve(protocol="qkd", mu=0.3, e_opt=0.02)
        twin = clone(est)
        assert twin.get_params() == est.get_params()
        assert twin.set_params(mu=0.4).mu == 0.4

    def test_unfitted(self):
        with pytest.raises(NotFittedError):
            KeyRateCurve().predict([100.0])

    def test_fixed_mu(self):
        est = KeyRateCurve(mu=0.5).fit()
        np.testing.assert_array_equal(est.predict([100.0, 300.0]), [tfqkd_rate(0.5, 100.0), tfqkd_rate(0.5, 300.0)])
        est = KeyRateCurve(protocol="qkd", mu=0.5).fit()
        assert est.predict(np.array([[50.0]]))[0] == qkd_rate(0.5, 50.0)

    def test_optimized(self):
        est = KeyRateCurve().fit()
        assert est.predict([400.0])[0] == optimal_mu(400.0).objective

    def test_transform(self):
        X = KeyRateCurve(mu=0.5).fit().transform([0.0, 50.0])
        assert X.shape == (2, 3)
        np.testing.assert_allclose(X[:, 0], [1.0, 0.1])
        np.testing.assert_array_equal(X[:, 1], 0.5)

    def test_auto_m(self):
        grid = np.arange(0, 600, 10.0)
        est = KeyRateCurve(m_slices="auto", m_candidates=(8, 16, 32)).fit(grid)
        assert est.m_slices_ == 16 and est.protocol_spec_.m_slices == 16
        assert [m for m, _ in est.objective_table_] == [8, 16, 32]

    def test_auto_needs_grid(self):
        with pytest.raises(ValueError):
            KeyRateCurve(m_slices="auto").fit()

    def test_bad_input(self):
        est = KeyRateCurve(mu=0.5).fit()
        with pytest.raises(ValueError):
            est.predict([-1.0])
        with pytest.raises(ValueError):
            est.predict(np.ones((2, 2)))
        with pytest.raises(ValueError):
            KeyRateCurve(protocol="bb84").fit()


class TestDriftCalibration:
    def test_recovers_reference(self):
        lengths = np.array([50.0, 100.0, 200.0, 550.0])
        sigmas = np.array([drift_sigma(L) for L in lengths])
        cal = DriftCalibration().fit(lengths, sigmas)
        assert cal.sigma_rate_ref_ == pytest.approx(2.4, rel=1e-12)
        np.testing.assert_allclose(cal.relative_residuals_, 0.0, atol=1e-12)

    def test_single_point_gap(self):
        cal = DriftCalibration().fit([100.0], [2.4])
        assert abs(cal.predict([550.0])[0] / 6.0 - 1) <= 0.10

    def test_validation(self):
        with pytest.raises(ValueError):
            DriftCalibration().fit([100.0, 200.0], [1.0])
        with pytest.raises(ValueError):
            DriftCalibration().fit([100.0], [0.0])
        with pytest.raises(NotFittedError):
            DriftCalibration().predict([1.0])
