"""Shared parameter types and closed-form primitives.

Transmittance, Poisson photon statistics, binary entropy, phase slices and the
intrinsic slice-mismatch QBER all live here; every other module builds on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

TWO_PI = 2.0 * math.pi

# Toolkit defaults. Only ALPHA_DB_PER_KM is a published value; the detector and
# protocol numbers are placeholders since the original simulation inset is not
# recoverable. Every entry point accepts overrides.
ALPHA_DB_PER_KM = 0.2
DEFAULT_P_DC = 1e-8
DEFAULT_ETA_DET = 0.30
DEFAULT_E_OPT = 0.01
DEFAULT_EC_FACTOR = 1.15
DEFAULT_DUTY_CYCLE = 0.9
DEFAULT_M_SLICES = 16


def _check_probability(name: str, value: float, upper: float = 1.0) -> float:
    value = float(value)
    if not (0.0 <= value <= upper) or math.isnan(value):
        raise ValueError(f"{name} must lie in [0, {upper}], got {value!r}")
    return value


@dataclass(frozen=True)
class ChannelSpec:
    """Optical fibre described by its attenuation (dB/km) and length (km)."""

    alpha: float = ALPHA_DB_PER_KM
    length: float = 0.0

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha!r}")
        if not self.length >= 0:
            raise ValueError(f"length must be >= 0, got {self.length!r}")

    def with_length(self, length: float) -> ChannelSpec:
        return ChannelSpec(alpha=self.alpha, length=length)

    @property
    def loss_db(self) -> float:
        return self.alpha * self.length

    @property
    def eta(self) -> float:
        return transmittance(self)


@dataclass(frozen=True)
class DetectorSpec:
    """Charlie's two threshold detectors (assumed identical)."""

    p_dc: float = DEFAULT_P_DC
    eta_det: float = DEFAULT_ETA_DET

    def __post_init__(self):
        _check_probability("p_dc", self.p_dc)
        _check_probability("eta_det", self.eta_det)


@dataclass(frozen=True)
class ProtocolSpec:
    """Protocol-level settings.

    ``mu_a`` and ``mu_b`` are the per-user mean photon numbers; their sum is the
    total intensity entering the rate formulas. ``decoy_intensities`` holds
    optional per-user decoy levels, chosen with total probability
    ``decoy_probability`` in the Monte Carlo.
    """

    m_slices: int = DEFAULT_M_SLICES
    duty_cycle: float = DEFAULT_DUTY_CYCLE
    ec_factor: float = DEFAULT_EC_FACTOR
    e_opt: float = DEFAULT_E_OPT
    mu_a: float = 0.25
    mu_b: float = 0.25
    decoy_intensities: tuple[float, ...] = field(default=())
    decoy_probability: float = 0.0

    def __post_init__(self):
        if int(self.m_slices) != self.m_slices or self.m_slices < 1:
            raise ValueError(f"m_slices must be an integer >= 1, got {self.m_slices!r}")
        if not 0.0 < self.duty_cycle <= 1.0:
            raise ValueError(f"duty_cycle must lie in (0, 1], got {self.duty_cycle!r}")
        if not self.ec_factor >= 1.0:
            raise ValueError(f"ec_factor must be >= 1, got {self.ec_factor!r}")
        _check_probability("e_opt", self.e_opt, 0.5)
        for name in ("mu_a", "mu_b"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        object.__setattr__(self, "decoy_intensities", tuple(float(x) for x in self.decoy_intensities))
        if any(not x >= 0 for x in self.decoy_intensities):
            raise ValueError("decoy intensities must be >= 0")
        _check_probability("decoy_probability", self.decoy_probability)
        if self.decoy_probability > 0 and not self.decoy_intensities:
            raise ValueError("decoy_probability > 0 requires decoy_intensities")

    @property
    def mu(self) -> float:
        return self.mu_a + self.mu_b


@dataclass(frozen=True)
class Phase:
    """An optical phase, canonicalised into [0, 2*pi) on construction."""

    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", reduce_phase(self.value))

    def __add__(self, other: Phase | float) -> Phase:
        other = other.value if isinstance(other, Phase) else other
        return Phase(self.value + other)

    def __sub__(self, other: Phase | float) -> Phase:
        other = other.value if isinstance(other, Phase) else other
        return Phase(self.value - other)

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class SliceIndex:
    k: int
    m: int

    def __post_init__(self):
        if self.m < 1 or not 0 <= self.k < self.m:
            raise ValueError(f"invalid slice index k={self.k} for M={self.m}")

    @property
    def lower(self) -> float:
        return TWO_PI * self.k / self.m

    @property
    def upper(self) -> float:
        return TWO_PI * (self.k + 1) / self.m


def reduce_phase(value: float) -> float:
    r = math.fmod(float(value), TWO_PI)
    if r < 0:
        r += TWO_PI
    # fmod of a value just below a multiple of 2*pi can round up to 2*pi
    if r >= TWO_PI:
        r = 0.0
    return r


def transmittance(channel: ChannelSpec) -> float:
    """Power transmission 10**(-alpha*L/10) of a fibre."""
    return 10.0 ** (-channel.alpha * channel.length / 10.0)


def binary_entropy(x: float) -> float:
    """Shannon entropy in bits of a Bernoulli(x) variable."""
    x = _check_probability("x", x)
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def poisson_pmf(n: int, mu: float) -> float:
    """Probability of emitting ``n`` photons from a coherent state of mean ``mu``.

    Evaluated in log space so that large ``n`` does not overflow the factorial.
    """
    if n < 0 or int(n) != n:
        raise ValueError(f"n must be a non-negative integer, got {n!r}")
    if not mu >= 0:
        raise ValueError(f"mu must be >= 0, got {mu!r}")
    if mu == 0:
        return 1.0 if n == 0 else 0.0
    return math.exp(-mu + n * math.log(mu) - math.lgamma(n + 1))


def intrinsic_qber(m_slices: int) -> float:
    """Mean error from twins whose phases differ by up to one slice width.

    Closed form of the average of sin^2(t/2) for t uniform on [0, 2*pi/M].
    """
    if m_slices < 1 or int(m_slices) != m_slices:
        raise ValueError(f"m_slices must be an integer >= 1, got {m_slices!r}")
    width = TWO_PI / m_slices
    e = 0.5 - math.sin(width) / (2.0 * width)
    return min(max(e, 0.0), 0.5)


def slice_of(phase: Phase | float, m_slices: int) -> SliceIndex:
    """Slice k whose half-open interval [2*pi*k/M, 2*pi*(k+1)/M) holds the phase."""
    rho = phase.value if isinstance(phase, Phase) else reduce_phase(phase)
    k = int(math.floor(m_slices * rho / TWO_PI))
    # rho just below 2*pi can round to k == M
    return SliceIndex(min(k, m_slices - 1), m_slices)


def slice_match_probability(m_slices: int) -> float:
    if m_slices < 1:
        raise ValueError("m_slices must be >= 1")
    return 1.0 / m_slices
