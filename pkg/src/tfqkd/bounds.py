"""Repeaterless reference bounds and the comparison curves built from them.

A :class:`CurveSpec` names one rate-versus-distance curve together with every
parameter that produced it, so curves can be evaluated, written to CSV and
compared with :func:`crossover_distance`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .core import ChannelSpec, DetectorSpec, ProtocolSpec, transmittance
from .optimize import optimal_mu
from .rates import RatePoint, qkd_rate, tfqkd_rate

GENERATORS = (
    "skc",
    "single_repeater",
    "ideal_decoy_qkd",
    "ideal_single_photon_qkd",
    "tfqkd_ideal",
    "tfqkd_realistic",
)
IDEAL_GENERATORS = ("ideal_decoy_qkd", "ideal_single_photon_qkd", "tfqkd_ideal")

IDEAL_DETECTOR = DetectorSpec(p_dc=0.0, eta_det=1.0)

# Literature results quoted alongside the bounds; plotting reference only.
# Rates are in bits per second as reported, distances in km of the fibre used.
EXPERIMENTAL_POINTS = (
    {"scheme": "QKD", "distance_km": 50.0, "rate": 1.26e6, "unit": "bit/s", "fibre": "standard"},
    {"scheme": "MDI-QKD", "distance_km": 404.0, "rate": 1.16 / 3600.0, "unit": "bit/s", "fibre": "ultralow-loss"},
)


class MultipleCrossingsError(ValueError):
    """The rate difference changes sign more than once inside the bracket."""


def ideal_protocol(m_slices: int = 16) -> ProtocolSpec:
    return ProtocolSpec(m_slices=m_slices, duty_cycle=1.0, ec_factor=1.0, e_opt=0.0)


def skc(eta: float) -> float:
    """Secret key capacity -log2(1 - eta) of a pure-loss channel."""
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"eta must lie in [0, 1), got {eta!r}")
    return -math.log1p(-eta) / math.log(2.0)


def single_repeater_bound(eta: float) -> float:
    """Capacity with one ideal middle node, -log2(1 - sqrt(eta))."""
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"eta must lie in [0, 1), got {eta!r}")
    return -math.log1p(-math.sqrt(eta)) / math.log(2.0)


def skc_at(eta: float) -> float:
    # curve evaluation at zero length: the capacity is unbounded
    return math.inf if eta >= 1.0 else skc(eta)


def single_repeater_at(eta: float) -> float:
    return math.inf if eta >= 1.0 else single_repeater_bound(eta)


@dataclass(frozen=True)
class CurveSpec:
    generator: str
    curve_id: str = ""
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    det: DetectorSpec = field(default_factory=DetectorSpec)
    proto: ProtocolSpec = field(default_factory=ProtocolSpec)
    mu: float | None = None

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown curve generator {self.generator!r}; choose from {', '.join(GENERATORS)}")
        if not self.curve_id:
            object.__setattr__(self, "curve_id", self.generator)
        if self.generator in IDEAL_GENERATORS:
            object.__setattr__(self, "det", IDEAL_DETECTOR)
            object.__setattr__(self, "proto", ideal_protocol(self.proto.m_slices))

    @property
    def parameters(self) -> dict:
        params = {"alpha": self.channel.alpha, "mu": self.mu}
        params.update(asdict(self.det))
        params.update(asdict(self.proto))
        return params

    def point(self, distance: float) -> RatePoint:
        return curve_point(self, distance)

    def rate(self, distance: float) -> float:
        return curve_point(self, distance).rate


def curve_point(curve: CurveSpec, distance: float) -> RatePoint:
    """Evaluate a curve at one distance, optimising the intensity if needed."""
    eta = transmittance(curve.channel.with_length(distance))
    gen = curve.generator
    mu = curve.mu
    if gen == "skc":
        rate = skc_at(eta)
    elif gen == "single_repeater":
        rate = single_repeater_at(eta)
    elif gen == "ideal_single_photon_qkd":
        # one photon per pulse, no noise, no sifting loss
        rate = eta
    else:
        kind = "qkd" if gen == "ideal_decoy_qkd" else "tfqkd"
        if mu is None:
            res = optimal_mu(distance, curve.channel, curve.det, curve.proto, kind=kind)
            mu, rate = res.params["mu"], res.objective
        else:
            fn = qkd_rate if kind == "qkd" else tfqkd_rate
            rate = fn(mu, distance, curve.channel, curve.det, curve.proto)
    return RatePoint(float(distance), float(rate), curve.curve_id, mu)


def ideal_curves(distance_grid: Sequence[float], alpha: float = 0.2) -> dict[str, list[RatePoint]]:
    """Ideal-parameter reference curves plus the two capacity bounds."""
    grid = list(distance_grid)
    if not grid:
        raise ValueError("distance grid is empty")
    channel = ChannelSpec(alpha=alpha)
    curves = [
        CurveSpec("ideal_decoy_qkd", channel=channel),
        CurveSpec("ideal_single_photon_qkd", channel=channel),
        CurveSpec("skc", channel=channel),
        CurveSpec("single_repeater", channel=channel),
    ]
    return {c.curve_id: [curve_point(c, L) for L in grid] for c in curves}


def _log_gap(a: CurveSpec, b: CurveSpec, distance: float) -> float | None:
    ra, rb = a.rate(distance), b.rate(distance)
    if not (ra > 0 and rb > 0 and math.isfinite(ra) and math.isfinite(rb)):
        return None
    return math.log(ra) - math.log(rb)


def crossover_distance(
    curve_a: CurveSpec,
    curve_b: CurveSpec,
    bracket: tuple[float, float],
    scan_step: float = 1.0,
    tol: float = 0.1,
) -> float | None:
    """Distance where two curves cross, or ``None`` when they do not.

    The log-rate difference is scanned on a ``scan_step`` grid and the single
    sign change is refined by bisection to within ``tol`` km. Distances where
    either rate is zero or infinite have no log-rate and are skipped, so a
    curve ending (rate dropping to zero) is not counted as a crossing.
    """
    lo, hi = (float(x) for x in bracket)
    if not (0 <= lo < hi):
        raise ValueError(f"invalid bracket {bracket!r}: need 0 <= start < stop")

    grid = np.append(np.arange(lo, hi, scan_step), hi)
    scan = [(float(L), _log_gap(curve_a, curve_b, float(L))) for L in grid]
    signed = [(L, g) for L, g in scan if g is not None and g != 0.0]
    changes = [(signed[i], signed[i + 1]) for i in range(len(signed) - 1) if (signed[i][1] > 0) != (signed[i + 1][1] > 0)]
    if not changes:
        return None
    if len(changes) > 1:
        where = ", ".join(f"~{p[0]:.0f}-{q[0]:.0f} km" for p, q in changes)
        raise MultipleCrossingsError(f"rate difference changes sign {len(changes)} times ({where}); use a tighter bracket")

    (x0, g0), (x1, _) = changes[0]
    positive_left = g0 > 0
    while x1 - x0 > tol:
        mid = 0.5 * (x0 + x1)
        g = _log_gap(curve_a, curve_b, mid)
        if g is None or g == 0.0:
            # degenerate midpoint; stop at the best current estimate
            if g == 0.0:
                return mid
            break
        if (g > 0) == positive_left:
            x0 = mid
        else:
            x1 = mid
    return 0.5 * (x0 + x1)
