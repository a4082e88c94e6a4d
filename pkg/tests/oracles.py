"""Independent high-precision reference evaluations used as test oracles."""

import mpmath as mp

mp.mp.dps = 40


def h2(x):
    x = mp.mpf(x)
    if x <= 0 or x >= 1:
        return mp.mpf(0)
    return -x * mp.log(x, 2) - (1 - x) * mp.log(1 - x, 2)


def bsc(a, b):
    return a + b - 2 * a * b


def decoy_rate(mu, distance, alpha, p_dc, eta_det, e_opt, f, extra=0.0):
    """Decoy-state BB84 rate written out term by term, infinite-decoy limit."""
    mu = mp.mpf(mu)
    eta = mp.mpf(10) ** (-mp.mpf(alpha) * mp.mpf(distance) / 10) * mp.mpf(eta_det)
    y0 = 2 * mp.mpf(p_dc)
    gain = 1 - (1 - y0) * mp.exp(-eta * mu)
    qber = mp.mpf(0.5) if gain == 0 else min((y0 / 2 + e_opt * (1 - mp.exp(-eta * mu))) / gain, mp.mpf(0.5))
    y1 = 1 - (1 - y0) * (1 - eta)
    e1 = mp.mpf(0.5) if y1 == 0 else min((y0 / 2 + e_opt * eta * (1 - y0)) / y1, mp.mpf(0.5))
    q1 = mu * mp.exp(-mu) * y1
    rate = q1 * (1 - h2(bsc(e1, extra))) - f * gain * h2(bsc(qber, extra))
    return min(max(rate, 0), 1)


def slice_qber(m):
    w = 2 * mp.pi / m
    return mp.quad(lambda t: mp.sin(t / 2) ** 2, [0, w]) / w


def matched_twin_stats(m, mu_a, mu_b, eta_a, eta_b, eta_det, p_dc, visibility=1.0):
    """Exact single-click gain and QBER for slice- and basis-matched pulse pairs.

    The phase difference of two uniform phases in one slice is triangular on
    (-w, w); by symmetry of the bit parity only the even-parity case is needed.
    """
    w = 2 * mp.pi / m
    a = mp.mpf(eta_a) * eta_det * mu_a
    b = mp.mpf(eta_b) * eta_det * mu_b
    p_dc = mp.mpf(p_dc)

    def clicks(d):
        cross = visibility * mp.sqrt(a * b) * mp.cos(d)
        p0 = 1 - (1 - p_dc) * mp.exp(-((a + b) / 2 + cross))
        p1 = 1 - (1 - p_dc) * mp.exp(-((a + b) / 2 - cross))
        return p0 * (1 - p1), p1 * (1 - p0)

    def avg(k):
        return mp.quad(lambda d: (w - abs(d)) / w**2 * clicks(d)[k], [-w, 0, w])

    good, bad = avg(0), avg(1)
    return good + bad, bad / (good + bad)
