"""scikit-learn style wrappers.

:class:`KeyRateCurve` maps distances (km) to key rates and can pick the slice
count during ``fit``. :class:`DriftCalibration` fits the reference drift-rate
spread to measured (length, spread) pairs. Both follow the estimator
conventions (constructor stores parameters verbatim, learned state ends in an
underscore) so they work with ``clone``, ``get_params`` and pipelines.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import (
    ALPHA_DB_PER_KM,
    DEFAULT_DUTY_CYCLE,
    DEFAULT_E_OPT,
    DEFAULT_EC_FACTOR,
    DEFAULT_ETA_DET,
    DEFAULT_P_DC,
    ChannelSpec,
    DetectorSpec,
    ProtocolSpec,
    transmittance,
)
from .optimize import DEFAULT_M_CANDIDATES, optimal_m, optimal_mu
from .phase import DriftModel, drift_sigma
from .rates import qkd_rate, tfqkd_rate


def _distances(X) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single distance column, got shape {X.shape}")
        X = X[:, 0]
    if np.any(X < 0):
        raise ValueError("distances must be >= 0")
    return X


class KeyRateCurve(TransformerMixin, BaseEstimator):
    """Secret-key rate as a function of Alice-Bob distance.

    Parameters
    ----------
    protocol : {"tfqkd", "qkd"}
    mu : float or None
        Total intensity; ``None`` optimises it at every distance.
    m_slices : int or "auto"
        ``"auto"`` selects the slice count on the distances passed to ``fit``
        by maximising the area above the capacity bound.
    """

    def __init__(
        self,
        protocol="tfqkd",
        mu=None,
        m_slices=16,
        alpha=ALPHA_DB_PER_KM,
        p_dc=DEFAULT_P_DC,
        eta_det=DEFAULT_ETA_DET,
        e_opt=DEFAULT_E_OPT,
        ec_factor=DEFAULT_EC_FACTOR,
        duty_cycle=DEFAULT_DUTY_CYCLE,
        m_candidates=DEFAULT_M_CANDIDATES,
    ):
        self.protocol = protocol
        self.mu = mu
        self.m_slices = m_slices
        self.alpha = alpha
        self.p_dc = p_dc
        self.eta_det = eta_det
        self.e_opt = e_opt
        self.ec_factor = ec_factor
        self.duty_cycle = duty_cycle
        self.m_candidates = m_candidates

    def _specs(self, m_slices):
        if self.protocol not in ("tfqkd", "qkd"):
            raise ValueError(f"protocol must be 'tfqkd' or 'qkd', got {self.protocol!r}")
        channel = ChannelSpec(alpha=self.alpha)
        det = DetectorSpec(p_dc=self.p_dc, eta_det=self.eta_det)
        proto = ProtocolSpec(
            m_slices=m_slices, duty_cycle=self.duty_cycle, ec_factor=self.ec_factor, e_opt=self.e_opt
        )
        return channel, det, proto

    def fit(self, X=None, y=None):
        if self.m_slices == "auto":
            if X is None:
                raise ValueError("m_slices='auto' needs a distance grid passed to fit")
            grid = _distances(X)
            channel, det, proto = self._specs(16)
            res = optimal_m(grid, channel, det, proto, candidates=self.m_candidates)
            self.m_slices_ = res.params["m_slices"]
            self.objective_table_ = res.table
        else:
            self.m_slices_ = int(self.m_slices)
            self.objective_table_ = None
        self.channel_, self.detector_, self.protocol_spec_ = self._specs(self.m_slices_)
        return self

    def _evaluate(self, L):
        if self.mu is None:
            res = optimal_mu(L, self.channel_, self.detector_, self.protocol_spec_, kind=self.protocol)
            return res.params["mu"], res.objective
        fn = tfqkd_rate if self.protocol == "tfqkd" else qkd_rate
        return self.mu, fn(self.mu, L, self.channel_, self.detector_, self.protocol_spec_)

    def predict(self, X):
        check_is_fitted(self, "m_slices_")
        return np.array([self._evaluate(float(L))[1] for L in _distances(X)])

    def transform(self, X):
        """Columns: transmittance over the full distance, intensity used, rate."""
        check_is_fitted(self, "m_slices_")
        out = []
        for L in _distances(X):
            mu, rate = self._evaluate(float(L))
            eta = transmittance(self.channel_.with_length(float(L)))
            out.append((eta, np.nan if mu is None else mu, rate))
        return np.array(out, dtype=float).reshape(-1, 3)


class DriftCalibration(BaseEstimator):
    """Fit the reference drift-rate spread with the length exponent held fixed.

    ``fit(lengths, sigmas)`` solves for the reference spread by least squares
    on log(sigma); ``predict`` returns the model spread at new lengths.
    """

    def __init__(self, scaling_exponent=0.5, length_ref=100.0, sample_dt=0.025):
        self.scaling_exponent = scaling_exponent
        self.length_ref = length_ref
        self.sample_dt = sample_dt

    def fit(self, X, y):
        lengths = _distances(X)
        sigmas = check_array(y, ensure_2d=False, dtype=float).ravel()
        if lengths.shape != sigmas.shape:
            raise ValueError("X and y must have the same number of samples")
        if np.any(lengths <= 0) or np.any(sigmas <= 0):
            raise ValueError("lengths and drift spreads must be > 0")
        log_ref = np.mean(np.log(sigmas) - self.scaling_exponent * np.log(lengths / self.length_ref))
        self.model_ = DriftModel(
            sigma_rate_ref=float(np.exp(log_ref)),
            length_ref=self.length_ref,
            scaling_exponent=self.scaling_exponent,
            sample_dt=self.sample_dt,
        )
        self.sigma_rate_ref_ = self.model_.sigma_rate_ref
        self.relative_residuals_ = self.predict(lengths) / sigmas - 1.0
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return np.array([drift_sigma(float(L), self.model_) for L in _distances(X)])
