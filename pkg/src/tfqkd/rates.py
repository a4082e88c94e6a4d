"""Asymptotic secret-key rates for decoy-state BB84 and twin-field QKD.

The channel model is the usual one for threshold detectors: a background
yield ``Y0 = 2*p_dc`` from the two detectors, dark clicks carrying random bits,
and a misalignment error ``e_opt`` on every signal detection. Decoy estimation
is taken in the infinite-decoy limit, so the single-photon "bounds" coincide
with the true single-photon statistics of this model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import (
    ChannelSpec,
    DetectorSpec,
    ProtocolSpec,
    binary_entropy,
    intrinsic_qber,
    poisson_pmf,
    transmittance,
)


@dataclass(frozen=True)
class GainQber:
    gain: float
    qber: float


@dataclass(frozen=True)
class SinglePhotonBounds:
    y1_lower: float
    e1_upper: float
    q1_lower: float


@dataclass(frozen=True)
class RatePoint:
    distance: float
    rate: float
    curve_id: str
    mu: float | None = None


def _check_inputs(mu: float, eta: float, e_opt: float) -> None:
    if not mu >= 0:
        raise ValueError(f"mu must be >= 0, got {mu!r}")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta!r}")
    if not 0.0 <= e_opt <= 0.5:
        raise ValueError(f"e_opt must lie in [0, 0.5], got {e_opt!r}")


def compose_qber(e_a: float, e_b: float) -> float:
    """Error rate of two independent bit-flip channels in series."""
    for e in (e_a, e_b):
        if not 0.0 <= e <= 0.5:
            raise ValueError(f"error rates must lie in [0, 0.5], got {e!r}")
    return e_a + e_b - 2.0 * e_a * e_b


def channel_gain_qber(mu: float, eta: float, det: DetectorSpec, e_opt: float) -> GainQber:
    """Overall gain and QBER for a phase-randomised coherent source.

    With no detections at all (``Q == 0``) the QBER is undefined; it is reported
    as 0.5, which carries zero weight in any rate since it multiplies ``Q``.
    """
    _check_inputs(mu, eta, e_opt)
    y0 = 2.0 * det.p_dc
    detected = -math.expm1(-eta * det.eta_det * mu)
    # y0 + (1 - y0) * detected == 1 - (1 - y0) * exp(-x), without cancellation
    gain = y0 + (1.0 - y0) * detected
    if gain <= 0.0:
        return GainQber(0.0, 0.5)
    qber = (0.5 * y0 + e_opt * detected) / gain
    return GainQber(gain, min(qber, 0.5))


def single_photon_bounds(mu: float, eta: float, det: DetectorSpec, e_opt: float) -> SinglePhotonBounds:
    _check_inputs(mu, eta, e_opt)
    y0 = 2.0 * det.p_dc
    eta_tot = eta * det.eta_det
    y1 = y0 + (1.0 - y0) * eta_tot
    if y1 <= 0.0:
        e1 = 0.5
    else:
        e1 = min((0.5 * y0 + e_opt * eta_tot * (1.0 - y0)) / y1, 0.5)
    return SinglePhotonBounds(y1, e1, poisson_pmf(1, mu) * y1)


def qkd_rate(
    mu: float,
    distance: float,
    channel: ChannelSpec | None = None,
    det: DetectorSpec | None = None,
    proto: ProtocolSpec | None = None,
    extra_qber: float = 0.0,
) -> float:
    """Secret bits per pulse of efficient decoy-state BB84 over ``distance`` km.

    ``extra_qber`` is composed into both the measured QBER and the
    single-photon phase-error bound before the entropies are taken; the
    twin-field rate uses it to charge the intrinsic slice error.
    """
    channel = ChannelSpec() if channel is None else channel
    det = DetectorSpec() if det is None else det
    proto = ProtocolSpec() if proto is None else proto
    eta = transmittance(channel.with_length(distance))

    measured = channel_gain_qber(mu, eta, det, proto.e_opt)
    single = single_photon_bounds(mu, eta, det, proto.e_opt)
    e_meas = compose_qber(measured.qber, extra_qber)
    e_phase = compose_qber(single.e1_upper, extra_qber)

    rate = single.q1_lower * (1.0 - binary_entropy(e_phase)) - proto.ec_factor * measured.gain * binary_entropy(e_meas)
    return min(max(rate, 0.0), 1.0)


def tfqkd_rate(
    mu: float,
    distance: float,
    channel: ChannelSpec | None = None,
    det: DetectorSpec | None = None,
    proto: ProtocolSpec | None = None,
) -> float:
    """Twin-field rate for users ``distance`` km apart (Charlie in the middle).

    Each twin crosses half the distance, so the decoy-state rate is taken at
    ``distance / 2`` with the intrinsic slice error folded in, then scaled by
    the duty cycle and the 1/M slice-sifting factor. ``mu`` is the total
    intensity of both users.
    """
    proto = ProtocolSpec() if proto is None else proto
    inner = qkd_rate(mu, distance / 2.0, channel, det, proto, extra_qber=intrinsic_qber(proto.m_slices))
    return proto.duty_cycle / proto.m_slices * inner
