"""Differential phase of the twin fields over long fibre.

Covers the deterministic drift terms (laser detuning and path-length
mismatch), a random-walk drift process whose rate spread grows with the square
root of fibre length, the visibility to QBER map, and the residual error left
by periodic phase feedback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._random import substream

FIBRE_LIGHT_SPEED = 2.0e8  # m/s, group velocity in silica


@dataclass(frozen=True)
class DriftModel:
    """Drift-rate spread calibrated at one reference fibre length.

    The default 2.4 rad/ms at 100 km and the 40 kHz sampling step (0.025 ms)
    follow the characterisation measurements.
    """

    sigma_rate_ref: float = 2.4
    length_ref: float = 100.0
    scaling_exponent: float = 0.5
    sample_dt: float = 0.025

    def __post_init__(self):
        if not self.sigma_rate_ref >= 0:
            raise ValueError("sigma_rate_ref must be >= 0")
        if not self.length_ref > 0:
            raise ValueError("length_ref must be > 0")
        if not self.sample_dt > 0:
            raise ValueError("sample_dt must be > 0")


@dataclass(frozen=True)
class DriftTrace:
    times: np.ndarray  # ms, n + 1 samples
    phases: np.ndarray  # rad, cumulative (not reduced)
    rates: np.ndarray  # rad/ms, n finite differences

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def summary(self) -> dict:
        r = self.rates
        n = r.size
        std = float(np.std(r, ddof=1)) if n > 1 else 0.0
        degenerate = std == 0.0
        return {
            "n_samples": n,
            "mean_rate": float(np.mean(r)),
            "std_rate": std,
            "mean_stderr": std / math.sqrt(n),
            "skewness": 0.0 if degenerate else float(stats.skew(r)),
            "excess_kurtosis": 0.0 if degenerate else float(stats.kurtosis(r)),
        }

    def rows(self):
        """(time_ms, phase_rad, rate_rad_per_ms) per step; the final phase sample has no rate."""
        for t, p, r in zip(self.times[:-1], self.phases[:-1], self.rates):
            yield float(t), float(p), float(r)


def differential_phase(
    delta_nu: float,
    nu: float,
    length: float,
    delta_length: float,
    fibre_light_speed: float = FIBRE_LIGHT_SPEED,
) -> float:
    """Relative phase between the two arms.

    ``delta_nu`` and ``nu`` in Hz, ``length`` in km, ``delta_length`` in m.
    """
    if not fibre_light_speed > 0:
        raise ValueError("fibre_light_speed must be > 0")
    return 2.0 * math.pi / fibre_light_speed * (delta_nu * length * 1e3 + nu * delta_length)


def drift_sigma(length: float, model: DriftModel | None = None) -> float:
    """Standard deviation of the drift rate (rad/ms) for ``length`` km of fibre."""
    model = DriftModel() if model is None else model
    if not length > 0:
        raise ValueError(f"length must be > 0, got {length!r}")
    return model.sigma_rate_ref * (length / model.length_ref) ** model.scaling_exponent


def simulate_drift(duration: float, length: float, model: DriftModel | None = None, seed: int = 0) -> DriftTrace:
    """Random-walk phase with i.i.d. Gaussian drift rates of spread ``drift_sigma``."""
    model = DriftModel() if model is None else model
    dt = model.sample_dt
    if not duration >= 10 * dt:
        raise ValueError(f"duration must cover at least 10 samples ({10 * dt} ms), got {duration!r}")
    n = int(round(duration / dt))
    sigma = drift_sigma(length, model)
    rng = substream(seed, "drift")
    rates = rng.normal(0.0, sigma, size=n) if sigma > 0 else np.zeros(n)
    phases = np.concatenate(([0.0], np.cumsum(rates * dt)))
    times = np.arange(n + 1) * dt
    # report rates as the finite differences of the stored phases
    return DriftTrace(times, phases, np.diff(phases) / dt)


def visibility_to_qber(visibility: float) -> float:
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {visibility!r}")
    return (1.0 - visibility) / 2.0


def residual_phase_qber(sigma_rate: float, feedback_interval: float) -> float:
    """Mean of sin^2(delta/2) for delta ~ N(0, sigma_rate**2 * feedback_interval)."""
    if not feedback_interval > 0:
        raise ValueError("feedback_interval must be > 0")
    if not sigma_rate >= 0:
        raise ValueError("sigma_rate must be >= 0")
    var = sigma_rate**2 * feedback_interval
    return -0.5 * math.expm1(-0.5 * var)


@dataclass(frozen=True)
class DutyCycleEstimate:
    duty_cycle: float | None
    feedback_interval: float
    feasible: bool


def duty_cycle_estimate(
    sigma_rate: float,
    target_qber: float,
    stabilization_cost: float = 1.0,
    interval_overhead: float = 1e-3,
    min_interval: float = 1e-4,
) -> DutyCycleEstimate:
    """Fraction of time left for dim pulses when feedback keeps the drift error at ``target_qber``.

    The longest feedback interval meeting the target is found by inverting
    :func:`residual_phase_qber`; each interval then costs
    ``stabilization_cost * interval_overhead`` ms of bright-pulse operation.
    An interval shorter than ``min_interval`` ms is reported as infeasible.
    """
    if not stabilization_cost >= 0 or not interval_overhead >= 0:
        raise ValueError("stabilization cost and overhead must be >= 0")
    if target_qber >= 0.5 or sigma_rate == 0:
        return DutyCycleEstimate(1.0, math.inf, True)
    if target_qber <= 0:
        return DutyCycleEstimate(None, 0.0, False)
    var = -2.0 * math.log1p(-2.0 * target_qber)
    interval = var / sigma_rate**2
    if interval < min_interval:
        return DutyCycleEstimate(None, interval, False)
    d = interval / (interval + stabilization_cost * interval_overhead)
    return DutyCycleEstimate(d, interval, True)
