"""Intensity and slice-count optimisation.

``optimal_mu`` scans a log grid and then polishes the best bracket with a
golden-section search. ``optimal_m`` is exhaustive over a small candidate set,
scoring each M by how far (in decades) the twin-field curve sits above the
secret key capacity, integrated over distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .core import ChannelSpec, DetectorSpec, ProtocolSpec, transmittance
from .rates import qkd_rate, tfqkd_rate

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
MU_BRACKET = (1e-6, 2.0)
DEFAULT_M_CANDIDATES = (4, 8, 12, 16, 20, 24, 32, 64)

CONVERGED = "converged"
BOUNDARY = "boundary"
INFEASIBLE = "infeasible"


@dataclass
class OptimizationResult:
    params: dict
    objective: float
    trace: list = field(default_factory=list)
    status: str = CONVERGED
    table: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status != INFEASIBLE


def golden_section_max(f: Callable[[float], float], a: float, b: float, rtol: float = 1e-4, trace: list | None = None):
    """Maximise a unimodal ``f`` on [a, b]; returns (x, f(x)) of the best point seen.

    Stops once the bracket width drops below ``rtol`` times its midpoint.
    """
    if trace is None:
        trace = []

    def ev(x):
        y = f(x)
        trace.append((x, y))
        return y

    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = ev(c), ev(d)
    while (b - a) > rtol * 0.5 * abs(a + b):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = ev(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = ev(d)
    return max(trace, key=lambda p: p[1])


def _rate_function(kind: str, distance: float, channel, det, proto) -> Callable[[float], float]:
    if kind == "qkd":
        return lambda mu: qkd_rate(mu, distance, channel, det, proto)
    if kind == "tfqkd":
        return lambda mu: tfqkd_rate(mu, distance, channel, det, proto)
    raise ValueError(f"unknown protocol kind {kind!r}; expected 'qkd' or 'tfqkd'")


def optimal_mu(
    distance: float,
    channel: ChannelSpec | None = None,
    det: DetectorSpec | None = None,
    proto: ProtocolSpec | None = None,
    kind: str = "tfqkd",
    bracket: tuple[float, float] = MU_BRACKET,
    n_grid: int = 64,
    rtol: float = 1e-4,
) -> OptimizationResult:
    """Intensity maximising the key rate at one distance."""
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ValueError(f"invalid mu bracket {bracket!r}")
    f = _rate_function(kind, distance, channel, det, proto)

    grid = np.geomspace(lo, hi, n_grid)
    trace = [(float(mu), f(float(mu))) for mu in grid]
    i = max(range(n_grid), key=lambda j: trace[j][1])
    if trace[i][1] <= 0.0:
        return OptimizationResult({"mu": None}, 0.0, trace, INFEASIBLE)

    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, n_grid - 1)])
    golden_section_max(f, a, b, rtol=rtol, trace=trace)
    # best over the whole trace: a flat peak can leave a grid point on top
    mu_star, r_star = max(trace, key=lambda p: p[1])
    at_edge = mu_star <= lo * (1 + rtol) or mu_star >= hi * (1 - rtol)
    status = BOUNDARY if at_edge else CONVERGED
    return OptimizationResult({"mu": mu_star}, r_star, trace, status)


def area_objective(rates: Sequence[float], reference: Sequence[float], distance_grid: Sequence[float]) -> float:
    """Integral over distance of the positive part of log10(rate / reference).

    Points where the rate is zero contribute nothing; the trapezoid rule is
    applied on the supplied grid.
    """
    rates = np.asarray(rates, dtype=float)
    reference = np.asarray(reference, dtype=float)
    x = np.asarray(distance_grid, dtype=float)
    if not (rates.shape == reference.shape == x.shape) or x.ndim != 1:
        raise ValueError("rates, reference and distance grid must share one 1-d shape")
    if x.size < 2:
        return 0.0
    gap = np.zeros_like(x)
    ok = (rates > 0) & (reference > 0) & np.isfinite(reference)
    gap[ok] = np.maximum(0.0, np.log10(rates[ok]) - np.log10(reference[ok]))
    return float(np.sum(0.5 * (gap[1:] + gap[:-1]) * np.diff(x)))


def default_area_grid() -> np.ndarray:
    return np.arange(0.0, 600.0 + 1e-9, 2.0)


def optimal_m(
    distance_grid: Sequence[float] | None = None,
    channel: ChannelSpec | None = None,
    det: DetectorSpec | None = None,
    proto: ProtocolSpec | None = None,
    candidates: Sequence[int] = DEFAULT_M_CANDIDATES,
) -> OptimizationResult:
    """Slice count maximising the area by which TF-QKD beats the capacity bound.

    ``result.table`` lists ``(M, area)`` for every candidate.
    """
    from .bounds import skc_at

    grid = default_area_grid() if distance_grid is None else np.asarray(distance_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("distance grid is empty")
    if not candidates:
        raise ValueError("no candidate slice counts")
    channel = ChannelSpec() if channel is None else channel
    proto = ProtocolSpec() if proto is None else proto
    reference = [skc_at(transmittance(channel.with_length(L))) for L in grid]

    table = []
    for m in candidates:
        p = replace(proto, m_slices=int(m))
        rates = [optimal_mu(float(L), channel, det, p, kind="tfqkd").objective for L in grid]
        table.append((int(m), area_objective(rates, reference, grid)))
    best_m, best_area = max(table, key=lambda row: row[1])
    status = INFEASIBLE if best_area <= 0 else CONVERGED
    return OptimizationResult({"m_slices": best_m}, best_area, list(table), status, table)
