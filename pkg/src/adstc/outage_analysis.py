"""Outage probability when the relay-destination links are strong.

With ``Pr Gamma_rd >> Ps Gamma_sr`` and ``Pr Gamma_rd >> N0`` the outage
event, conditioned on the source-relay fading gains ``v_i = |h_sr_i|^2``,
becomes

    (v1 - xi/Gamma_sr1) X1 < (xi/Gamma_sr2 - v2) X2,   xi = gamma_t N0 / Ps,

with ``X_i`` exponential of mean ``F(v_i)``.  Its probability Omega(v1, v2)
is 1 when both gains sit below their thresholds, 0 when both are above, and
a ratio of the two exponential means otherwise.  Averaging Omega over the
unit-mean exponential gains gives the outage probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cubature, quad

from .channel_model import LinkBudget
from .relay_policy import HybridAfDf, PolicySpec, ThresholdDF

__all__ = [
    "AsymptoticContext",
    "QuadratureError",
    "amplification_gain",
    "omega_conditional",
    "outage_asymptotic",
    "outage_min_closed_form",
]


class QuadratureError(RuntimeError):
    """Cubature failed to reach the requested tolerance."""

    def __init__(self, message, estimate, error):
        super().__init__(f"{message} (estimate={estimate:.6g}, error bound={error:.3g})")
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class AsymptoticContext:
    """Everything Omega needs: threshold, path gains, powers and the two alpha(v) rules.

    ``alpha_fn1``/``alpha_fn2`` take the unit-mean fading gain ``v`` (not
    ``g_sr``).  ``breakpoints1``/``breakpoints2`` list the ``v`` values where
    they jump or kink; the quadrature splits there.
    """

    xi: float
    gamma_sr1: float
    gamma_sr2: float
    ps_over_n0: float
    pr1_over_n0: float
    pr2_over_n0: float
    alpha_fn1: Callable = field(repr=False)
    alpha_fn2: Callable = field(repr=False)
    gamma_r1d: float = 1.0
    gamma_r2d: float = 1.0
    breakpoints1: tuple = ()
    breakpoints2: tuple = ()

    def __post_init__(self):
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi!r}")
        for name in ("gamma_sr1", "gamma_sr2", "gamma_r1d", "gamma_r2d", "ps_over_n0",
                     "pr1_over_n0", "pr2_over_n0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_policies(cls, lb: LinkBudget, gamma_t: float, policy1: PolicySpec,
                      policy2: PolicySpec | None = None) -> "AsymptoticContext":
        """Context for AF policies acting on ``g_sr = Gamma_sr * v``."""
        policy2 = policy1 if policy2 is None else policy2
        fns, bps = [], []
        for p, g in ((policy1, lb.gamma_sr1), (policy2, lb.gamma_sr2)):
            if isinstance(p, (ThresholdDF, HybridAfDf)) and not _af_only(p):
                raise ValueError("the high-SNR outage model covers amplify-and-forward only")
            fns.append(lambda v, p=p, g=g: p.alpha(np.asarray(v) * g))
            bps.append(tuple(sorted(b / g for b in p.breakpoints() if math.isfinite(b))))
        return cls(xi=gamma_t / lb.ps_over_n0, gamma_sr1=lb.gamma_sr1, gamma_sr2=lb.gamma_sr2,
                   ps_over_n0=lb.ps_over_n0, pr1_over_n0=lb.pr1_over_n0,
                   pr2_over_n0=lb.pr2_over_n0, alpha_fn1=fns[0], alpha_fn2=fns[1],
                   gamma_r1d=lb.gamma_r1d, gamma_r2d=lb.gamma_r2d,
                   breakpoints1=bps[0], breakpoints2=bps[1])

    @property
    def thresholds(self) -> tuple[float, float]:
        """Case boundaries ``xi / Gamma_sr_i`` on the fading gains."""
        return self.xi / self.gamma_sr1, self.xi / self.gamma_sr2


def _af_only(p) -> bool:
    return isinstance(p, HybridAfDf) and math.isinf(p.t2)


def amplification_gain(v, relay: int, ctx: AsymptoticContext):
    """Mean ``F(v)`` of ``X_i = F(v_i) |h_rid|^2`` for relay 1 or 2."""
    v = np.asarray(v, dtype=float)
    if relay == 1:
        a, gsr, grd, pr = ctx.alpha_fn1(v), ctx.gamma_sr1, ctx.gamma_r1d, ctx.pr1_over_n0
    elif relay == 2:
        a, gsr, grd, pr = ctx.alpha_fn2(v), ctx.gamma_sr2, ctx.gamma_r2d, ctx.pr2_over_n0
    else:
        raise ValueError("relay must be 1 or 2")
    ps = ctx.ps_over_n0
    out = np.asarray(a) * ps * pr * gsr * grd / (ps * gsr * v + 1.0)
    return float(out) if out.ndim == 0 else out


def _ratio(num, other):
    """num / (num + other) with the both-zero case sent to `fallback` by the caller."""
    den = num + other
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def omega_conditional(v1, v2, ctx: AsymptoticContext):
    """Conditional outage probability given the source-relay fading gains.

    A gain exactly on its threshold counts as above it.  Silent relays
    (``F = 0``) are handled by the limits of the exponential-ratio
    formulas; two silent relays always mean outage.
    """
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    th1, th2 = ctx.thresholds
    f1 = np.asarray(amplification_gain(v1, 1, ctx))
    f2 = np.asarray(amplification_gain(v2, 2, ctx))
    above1 = v1 >= th1
    above2 = v2 >= th2
    # Case 2: P{(v1-th1) X1 < (th2-v2) X2}; exponential means scale by the coefficients.
    case2 = _ratio(f2 * (th2 - v2), f1 * (v1 - th1))
    # Case 3: P{(v2-th2) X2 < (th1-v1) X1}.
    case3 = _ratio(f1 * (th1 - v1), f2 * (v2 - th2))
    omega = np.where(above1, np.where(above2, 0.0, case2), np.where(above2, case3, 1.0))
    omega = np.where((f1 == 0) & (f2 == 0), 1.0, omega)
    return float(omega) if omega.ndim == 0 else omega


def _cuts(lo, hi, points):
    inner = sorted({p for p in points if lo < p < hi})
    return [lo, *inner, hi]


def outage_asymptotic(ctx: AsymptoticContext, tol: float = 1e-6, max_evals: int = 1_000_000,
                      full_output: bool = False):
    """High-SNR outage probability by adaptive cubature.

    The both-below rectangle is taken in closed form; the both-above
    quadrant only contributes where both relays are silent, which
    factorizes into two 1-D integrals.  The two mixed strips are integrated
    numerically after mapping each fading gain through ``t = exp(-v)``, which
    turns ``e^{-v} dv`` into ``dt`` over a finite box.  Every strip is split
    at the policy breakpoints so each sub-box has a smooth integrand.

    Raises :class:`QuadratureError` if the tolerance is not met.  With
    ``full_output`` returns ``(value, error_bound, evaluations)``.
    """
    th1, th2 = ctx.thresholds
    total = (1.0 - math.exp(-th1)) * (1.0 - math.exp(-th2))
    err = 0.0
    evals = 0

    # Both above: outage only when both relays are silent.
    silent = []
    for fn, bps, th in ((ctx.alpha_fn1, ctx.breakpoints1, th1),
                        (ctx.alpha_fn2, ctx.breakpoints2, th2)):
        edges = _cuts(0.0, math.exp(-th), [math.exp(-b) for b in bps])
        acc = 0.0
        for a, b in zip(edges, edges[1:]):
            val, e, info = quad(lambda t: float(np.asarray(fn(-math.log(t))) == 0),
                                a, b, epsabs=tol / 8, full_output=True)[:3]
            acc += val
            err += e
            evals += info["neval"]
        silent.append(acc)
    total += silent[0] * silent[1]

    def integrand(x):
        return omega_conditional(-np.log(x[:, 0]), -np.log(x[:, 1]), ctx)

    # (t1 range, t2 range) for case 2 (v1 above, v2 below) and case 3.
    strips = [((0.0, math.exp(-th1)), (math.exp(-th2), 1.0)),
              ((math.exp(-th1), 1.0), (0.0, math.exp(-th2)))]
    boxes = []
    for (a1, b1), (a2, b2) in strips:
        c1 = _cuts(a1, b1, [math.exp(-b) for b in ctx.breakpoints1])
        c2 = _cuts(a2, b2, [math.exp(-b) for b in ctx.breakpoints2])
        boxes += [((x0, y0), (x1, y1)) for x0, x1 in zip(c1, c1[1:])
                  for y0, y1 in zip(c2, c2[1:])]
    box_tol = tol / (2 * max(len(boxes), 1))
    nodes = 21 * 21
    for lo, hi in boxes:
        res = cubature(integrand, np.array(lo), np.array(hi), rule="gk21",
                       atol=box_tol, rtol=0.0,
                       max_subdivisions=max(1, (max_evals - evals) // nodes))
        total += float(res.estimate)
        err += float(res.error)
        evals += res.subdivisions * nodes + nodes
        if res.status != "converged" or evals > max_evals:
            raise QuadratureError("outage cubature did not converge", total, err)
    if err > tol:
        raise QuadratureError("outage cubature error bound above tolerance", total, err)
    value = min(max(total, 0.0), 1.0)
    return (value, err, evals) if full_output else value


def outage_min_closed_form(gamma_t: float, snr_sr1: float, snr_sr2: float) -> float:
    """Minimum high-SNR outage, reached by the on-off rule at ``xi``."""
    if not (gamma_t >= 0 and snr_sr1 > 0 and snr_sr2 > 0):
        raise ValueError("need gamma_t >= 0 and positive SNRs")
    return -math.expm1(-gamma_t / snr_sr1) * -math.expm1(-gamma_t / snr_sr2)
