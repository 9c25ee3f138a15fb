"""Reference computations that do not import the package under test.

Each oracle rederives its quantity from first principles with the
standard library, numpy or scipy, so agreement with the package is a
genuine cross-check rather than a re-run of the same code.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import erfc

C = 299_792_458.0


def path_loss_db(d, f_mhz=2400.0, d0=100.0, a=4.0, b=0.0065, c=17.1, hb=32.0, ht=15.0):
    """Suburban path loss, written out directly from the model definition."""
    lam = C / (f_mhz * 1e6)
    beta = a - b * hb + c / hb
    df = 6.0 * math.log10(f_mhz / 2000.0)
    dh = -10.0 * math.log10(ht / 3.0) if ht <= 3.0 else -20.0 * math.log10(ht / 3.0)
    d0p = d0 * 10.0 ** (-(df + dh) / (10.0 * beta))
    if d > d0p:
        return 20.0 * math.log10(4.0 * math.pi * d0p / lam) + 10.0 * beta * math.log10(d / d0) \
            + df + dh
    return 20.0 * math.log10(4.0 * math.pi * d / lam)


# Values frozen from a standalone run of the formula above (math only).
FROZEN_PATH_LOSS = {
    # (distance, h_b, h_t): (loss dB, linear gain)
    (5000.0, 32.0, 15.0): (146.29429310780932, 2.347311298623476e-15),
    (8000.0, 32.0, 15.0): (155.1252890074396, 3.072352904370879e-16),
    (2000.0, 15.0, 1.5): (147.75942848577142, 1.6751633063366885e-15),
    (1000.0, 15.0, 1.5): (132.57999095441517, 5.520785891614776e-14),
}
FROZEN_BREAKPOINTS = {(32.0, 15.0): 205.18197547525943, (15.0, 1.5): 85.28639810547104}


def qfunc(x):
    return 0.5 * erfc(np.asarray(x) / math.sqrt(2.0))


def onoff_min_outage(gamma_t, snr_sr1, snr_sr2):
    """High-SNR minimum outage: both relays below their thresholds."""
    return (1.0 - math.exp(-gamma_t / snr_sr1)) * (1.0 - math.exp(-gamma_t / snr_sr2))


def _hypoexp_cdf(x, c1, c2):
    """P{c1 W1 + c2 W2 < x} for independent unit exponentials."""
    if abs(c1 - c2) <= 1e-9 * max(c1, c2):
        c = 0.5 * (c1 + c2)
        return -math.expm1(-x / c) - (x / c) * math.exp(-x / c)
    return 1.0 - (c1 * math.exp(-x / c1) - c2 * math.exp(-x / c2)) / (c1 - c2)


def onoff_exact_outage(gamma_t, snr_sr, snr_rd):
    """Finite-SNR outage of the on-off rule at the optimal threshold.

    Normalized links, equal SNRs on both branches.  With relay i on
    (``s_i = snr_sr v_i >= gamma_t``) the SNR clears the threshold iff
    ``sum_i c_i w_i >= gamma_t`` with ``c_i = snr_rd (s_i - gamma_t)/(s_i + 1)``.
    """
    t = gamma_t / snr_sr

    def coef(v):
        s = snr_sr * v
        return snr_rd * (s - gamma_t) / (s + 1.0)

    p_off = -math.expm1(-t)
    single, _ = integrate.quad(lambda v: -math.expm1(-gamma_t / coef(v)) * math.exp(-v)
                               if coef(v) > 0 else math.exp(-v), t, math.inf,
                               epsabs=1e-13, limit=200)
    both, _ = integrate.dblquad(
        lambda v2, v1: (_hypoexp_cdf(gamma_t, coef(v1), coef(v2)) if coef(v1) > 0 and coef(v2) > 0
                        else 1.0) * math.exp(-v1 - v2),
        t, t + 60.0, t, t + 60.0, epsabs=1e-12)
    return p_off ** 2 + 2.0 * p_off * single + both


def exp_ratio_mc(a, b, mean_a, mean_b, n, rng):
    """Brute force P{a X < b Y}, X ~ Exp(mean_a), Y ~ Exp(mean_b), a, b > 0."""
    x = rng.exponential(mean_a, n)
    y = rng.exponential(mean_b, n)
    p = float(np.mean(a * x < b * y))
    return p, math.sqrt(max(p * (1 - p), 1e-300) / n)


def asymptotic_outage_mc(gamma_t, ps, pr1, pr2, gsr1, gsr2, alpha1, alpha2, n, rng,
                         grd1=1.0, grd2=1.0):
    """Direct simulation of the high-SNR outage event.

    `alpha1`/`alpha2` map ``g_sr`` to the scaling factor.  Outage when
    ``sum_i (v_i - xi/Gamma_sr_i) F_i(v_i) W_i < 0`` or both relays are silent.
    """
    xi = gamma_t / ps
    v = rng.exponential(1.0, (2, n))
    w = rng.exponential(1.0, (2, n))
    total = np.zeros(n)
    silent = np.ones(n, dtype=bool)
    for i, (g, pr, grd, fn) in enumerate(((gsr1, pr1, grd1, alpha1), (gsr2, pr2, grd2, alpha2))):
        a = np.asarray(fn(g * v[i]), dtype=float)
        f = a * ps * pr * g * grd / (ps * g * v[i] + 1.0)
        total += (v[i] - xi / g) * f * w[i]
        silent &= f == 0
    out = (total < 0) | silent
    p = float(out.mean())
    return p, math.sqrt(max(p * (1 - p), 1e-300) / n)
