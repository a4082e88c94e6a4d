"""Event-level Monte Carlo of the twin-field protocol.

Each trial draws independent global phases for Alice and Bob, a key bit and a
basis per user, and sends two coherent fields to Charlie's 50:50 beam splitter.
Threshold detectors with dark counts register the outputs. Trials survive
sifting only when both users announced the same phase slice and basis and
exactly one detector clicked.

Phase mismatch inside a matched slice is simulated, not injected: for two
independent uniform phases in the same slice the weak-field error rate is
:func:`twin_mismatch_qber`. Optical misalignment ``e_opt`` enters as a fringe
visibility ``1 - 2*e_opt`` on the interference term.

Tally counters beyond ``n_slice_match`` refer to slice- and basis-matched
trials only; detector outcomes of discarded trials are never drawn.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from ._random import substream
from .core import (
    TWO_PI,
    ChannelSpec,
    DetectorSpec,
    Phase,
    ProtocolSpec,
    binary_entropy,
    intrinsic_qber,
    poisson_pmf,
    slice_of,
    transmittance,
)
from .rates import compose_qber, single_photon_bounds

MAX_TRIALS = 2**63 - 1
CHUNK = 1 << 20


@dataclass(frozen=True)
class TrialSetting:
    rho_a: Phase
    rho_b: Phase
    gamma_a: Phase
    gamma_b: Phase
    basis_a: int
    basis_b: int
    bit_a: int
    bit_b: int
    mu_a: float
    mu_b: float


@dataclass(frozen=True)
class DetectionOutcome:
    click_d0: bool
    click_d1: bool


@dataclass(frozen=True)
class SiftResult:
    kept: bool
    bit_a: int | None = None
    bit_b: int | None = None
    error: bool = False
    reason: str = ""


@dataclass(frozen=True)
class SimTally:
    n_trials: int = 0
    n_slice_match: int = 0
    n_basis_match: int = 0
    n_sift: int = 0
    n_errors: int = 0
    n_double_clicks: int = 0
    n_dark_only: int = 0

    def __add__(self, other: SimTally) -> SimTally:
        return SimTally(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def check(self) -> None:
        if not (self.n_sift <= self.n_basis_match <= self.n_slice_match <= self.n_trials):
            raise AssertionError(f"tally ordering violated: {self}")
        if self.n_errors > self.n_sift:
            raise AssertionError(f"more errors than sifted events: {self}")


@dataclass(frozen=True)
class TallyEstimate:
    gain: float
    qber: float | None
    rate: float


def encoding_phase(bit, basis):
    return bit * math.pi + basis * (math.pi / 2.0)


def twin_mismatch_qber(m_slices: int) -> float:
    """Weak-field error rate from independent uniform phases sharing a slice.

    Their difference is triangular on (-w, w) with w = 2*pi/M, so the mean of
    sin^2(delta/2) is 1/2 - (1 - cos w) / w**2.
    """
    if m_slices < 1:
        raise ValueError("m_slices must be >= 1")
    w = TWO_PI / m_slices
    return 0.5 - (1.0 - math.cos(w)) / w**2


def _intensities(proto: ProtocolSpec, signal: float, rng: np.random.Generator, n: int) -> np.ndarray:
    mu = np.full(n, signal)
    if proto.decoy_probability > 0:
        use_decoy = rng.random(n) < proto.decoy_probability
        levels = np.asarray(proto.decoy_intensities)
        mu[use_decoy] = levels[rng.integers(0, levels.size, size=int(use_decoy.sum()))]
    return mu


def _draw(proto: ProtocolSpec, rng: np.random.Generator, n: int, postselect: bool = False) -> dict:
    """Draw ``n`` trial settings as arrays.

    With ``postselect`` the draw is conditioned on matching slices and bases:
    Bob's phase is uniform inside Alice's slice and his basis equals hers.
    """
    m = proto.m_slices
    rho_a = rng.random(n) * TWO_PI
    if postselect:
        k = np.minimum(np.floor(rho_a * (m / TWO_PI)), m - 1)
        rho_b = (k + rng.random(n)) * (TWO_PI / m)
        rho_b[rho_b >= TWO_PI] = 0.0
    else:
        rho_b = rng.random(n) * TWO_PI
    bits = rng.integers(0, 2, size=(2, n), dtype=np.int8)
    basis_a = rng.integers(0, 2, size=n, dtype=np.int8)
    basis_b = basis_a.copy() if postselect else rng.integers(0, 2, size=n, dtype=np.int8)
    return {
        "rho_a": rho_a,
        "rho_b": rho_b,
        "bit_a": bits[0],
        "bit_b": bits[1],
        "basis_a": basis_a,
        "basis_b": basis_b,
        "mu_a": _intensities(proto, proto.mu_a, rng, n),
        "mu_b": _intensities(proto, proto.mu_b, rng, n),
    }


def _slices(rho: np.ndarray, m: int) -> np.ndarray:
    return np.minimum(np.floor(rho * (m / TWO_PI)), m - 1).astype(np.int64)


def _detect(s: dict, eta_a: float, eta_b: float, det: DetectorSpec, visibility: float, rng: np.random.Generator):
    """Click arrays for the two detectors plus dark-only flags.

    D0 sits on the constructive port for zero phase difference. One uniform
    per detector decides the outcome: below ``1 - exp(-I)`` a photon click,
    then a dark-only click with probability ``p_dc * exp(-I)``.
    """
    a = eta_a * det.eta_det * s["mu_a"]
    b = eta_b * det.eta_det * s["mu_b"]
    dphi = (s["rho_a"] + encoding_phase(s["bit_a"], s["basis_a"])) - (s["rho_b"] + encoding_phase(s["bit_b"], s["basis_b"]))
    cross = visibility * np.sqrt(a * b) * np.cos(dphi)
    total = 0.5 * (a + b)
    i_plus = np.maximum(total + cross, 0.0)
    i_minus = np.maximum(total - cross, 0.0)
    u = rng.random((2, np.size(a)))
    out = []
    for intensity, ui in ((i_plus, u[0]), (i_minus, u[1])):
        photon = -np.expm1(-intensity)
        click = ui < photon + (1.0 - photon) * det.p_dc
        out.append((click, click & (ui >= photon)))
    (c0, dark0), (c1, dark1) = out
    return c0, c1, dark0, dark1


def draw_trial(proto: ProtocolSpec, rng: np.random.Generator) -> TrialSetting:
    s = _draw(proto, rng, 1)
    bit_a, bit_b = int(s["bit_a"][0]), int(s["bit_b"][0])
    basis_a, basis_b = int(s["basis_a"][0]), int(s["basis_b"][0])
    return TrialSetting(
        rho_a=Phase(s["rho_a"][0]),
        rho_b=Phase(s["rho_b"][0]),
        gamma_a=Phase(encoding_phase(bit_a, basis_a)),
        gamma_b=Phase(encoding_phase(bit_b, basis_b)),
        basis_a=basis_a,
        basis_b=basis_b,
        bit_a=bit_a,
        bit_b=bit_b,
        mu_a=float(s["mu_a"][0]),
        mu_b=float(s["mu_b"][0]),
    )


def interfere_and_detect(
    trial: TrialSetting,
    eta_a: float,
    eta_b: float,
    det: DetectorSpec,
    rng: np.random.Generator,
    visibility: float = 1.0,
) -> DetectionOutcome:
    s = {
        "rho_a": np.array([trial.rho_a.value]),
        "rho_b": np.array([trial.rho_b.value]),
        "bit_a": np.array([trial.bit_a]),
        "bit_b": np.array([trial.bit_b]),
        "basis_a": np.array([trial.basis_a]),
        "basis_b": np.array([trial.basis_b]),
        "mu_a": np.array([trial.mu_a]),
        "mu_b": np.array([trial.mu_b]),
    }
    c0, c1, _, _ = _detect(s, eta_a, eta_b, det, visibility, rng)
    return DetectionOutcome(bool(c0[0]), bool(c1[0]))


def sift(trial: TrialSetting, outcome: DetectionOutcome, m_slices: int) -> SiftResult:
    """Keep a trial only for matching slice and basis and exactly one click.

    A D1 click announces that the users' bits differ; Bob flips his bit
    accordingly, and the error flag marks a wrong announcement.
    """
    if slice_of(trial.rho_a, m_slices).k != slice_of(trial.rho_b, m_slices).k:
        return SiftResult(False, reason="slice mismatch")
    if trial.basis_a != trial.basis_b:
        return SiftResult(False, reason="basis mismatch")
    if outcome.click_d0 == outcome.click_d1:
        return SiftResult(False, reason="double click" if outcome.click_d0 else "no click")
    parity = int(outcome.click_d1)
    bob = trial.bit_b ^ parity
    return SiftResult(True, trial.bit_a, bob, error=bob != trial.bit_a)


def _shard_sizes(n: int, shards: int) -> list[int]:
    base, extra = divmod(n, shards)
    return [base + (1 if i < extra else 0) for i in range(shards)]


def _run_shard(args) -> SimTally:
    n, eta_a, eta_b, det, proto, seed, shard, postselect = args
    rng = substream(seed, "protocol-sim", shard)
    m = proto.m_slices
    visibility = 1.0 - 2.0 * proto.e_opt
    tally = SimTally()
    remaining = n
    while remaining > 0:
        size = min(CHUNK, remaining)
        remaining -= size
        s = _draw(proto, rng, size, postselect)
        slice_ok = _slices(s["rho_a"], m) == _slices(s["rho_b"], m)
        matched = slice_ok & (s["basis_a"] == s["basis_b"])
        sub = {k: v[matched] for k, v in s.items()}
        c0, c1, dark0, dark1 = _detect(sub, eta_a, eta_b, det, visibility, rng)
        single = c0 ^ c1
        wrong = c1 != (sub["bit_a"] != sub["bit_b"])
        any_click = c0 | c1
        dark_only = any_click & (dark0 | ~c0) & (dark1 | ~c1)
        tally = tally + SimTally(
            n_trials=size,
            n_slice_match=int(np.count_nonzero(slice_ok)),
            n_basis_match=int(np.count_nonzero(matched)),
            n_sift=int(np.count_nonzero(single)),
            n_errors=int(np.count_nonzero(single & wrong)),
            n_double_clicks=int(np.count_nonzero(c0 & c1)),
            n_dark_only=int(np.count_nonzero(dark_only)),
        )
    return tally


def arm_transmittances(distance: float, channel: ChannelSpec | None = None) -> tuple[float, float]:
    """Both arms span half the Alice-Bob distance."""
    channel = ChannelSpec() if channel is None else channel
    eta = transmittance(channel.with_length(distance / 2.0))
    return eta, eta


def run_batch(
    n_trials: int,
    distance: float = 0.0,
    channel: ChannelSpec | None = None,
    det: DetectorSpec | None = None,
    proto: ProtocolSpec | None = None,
    seed: int = 0,
    shards: int = 1,
    postselect: bool = False,
    etas: tuple[float, float] | None = None,
    workers: int = 1,
) -> SimTally:
    """Simulate ``n_trials`` pulse pairs and tally the outcomes.

    Each shard draws from its own substream of ``seed``, so the tally is fixed
    by ``(seed, shards)`` whatever the number of ``workers``. ``postselect``
    draws only slice- and basis-matched trials (see :func:`_draw`). ``etas``
    overrides the arm transmittances derived from ``distance``.
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials!r}")
    if n_trials > MAX_TRIALS:
        raise ValueError(f"n_trials exceeds counter capacity ({MAX_TRIALS})")
    if shards < 1:
        raise ValueError("shards must be >= 1")
    det = DetectorSpec() if det is None else det
    proto = ProtocolSpec() if proto is None else proto
    eta_a, eta_b = arm_transmittances(distance, channel) if etas is None else etas

    jobs = [(n, eta_a, eta_b, det, proto, seed, i, postselect) for i, n in enumerate(_shard_sizes(n_trials, shards))]
    if workers > 1 and shards > 1:
        with ProcessPoolExecutor(max_workers=min(workers, shards)) as pool:
            parts = list(pool.map(_run_shard, jobs))
    else:
        parts = [_run_shard(job) for job in jobs]

    tally = SimTally()
    for part in parts:
        tally = tally + part
    return tally


def estimate_from_tally(
    tally: SimTally,
    proto: ProtocolSpec,
    eta_arm: float,
    det: DetectorSpec,
) -> TallyEstimate:
    """Gain, QBER and twin-field secret rate from a tally.

    The gain is per slice- and basis-matched pulse pair; the slice sifting
    factor 1/M and the duty cycle are applied once, in the rate. Single-photon
    terms come from the analytic infinite-decoy model at the total intensity.
    A QBER at or above 1/2 leaves no key.
    """
    if tally.n_basis_match == 0:
        return TallyEstimate(0.0, None, 0.0)
    gain = tally.n_sift / tally.n_basis_match
    if tally.n_sift == 0:
        return TallyEstimate(gain, None, 0.0)
    qber = tally.n_errors / tally.n_sift
    if qber >= 0.5:
        return TallyEstimate(gain, qber, 0.0)
    single = single_photon_bounds(proto.mu, eta_arm, det, proto.e_opt)
    e_phase = compose_qber(single.e1_upper, intrinsic_qber(proto.m_slices))
    q1 = poisson_pmf(1, proto.mu) * single.y1_lower
    inner = q1 * (1.0 - binary_entropy(e_phase)) - proto.ec_factor * gain * binary_entropy(qber)
    rate = proto.duty_cycle / proto.m_slices * min(max(inner, 0.0), 1.0)
    return TallyEstimate(gain, qber, rate)
