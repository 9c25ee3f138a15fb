"""Searches over relay thresholds and quantized scaling functions.

Every Monte-Carlo objective in a search is evaluated with the same
``master_seed``, so all candidates see identical channel draws (common
random numbers) and the comparisons are paired.  Ties go to the lower
threshold or the lower total alpha.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .outage_analysis import AsymptoticContext, outage_asymptotic
from .relay_policy import OnOff, QuantizedAlphaFunction
from .sim_engine import SimConfig, estimate_ber_many, estimate_outage_many

__all__ = [
    "QuantizedAlphaFunction",
    "SearchReport",
    "SearchSpaceTooLarge",
    "threshold_policy",
    "threshold_search",
    "centralized_search",
    "iterative_search",
]


class SearchSpaceTooLarge(ValueError):
    def __init__(self, size: int, cap: int):
        super().__init__(f"search space has {size} candidates, above the cap of {cap}")
        self.size = size
        self.cap = cap


@dataclass
class SearchReport:
    best_params: dict
    best_objective: float
    evaluations: int
    converged: bool
    trace: list[tuple[int, float]] = field(default_factory=list)
    half_width: float | None = None
    objectives: list[float] | None = None


def threshold_policy(cfg: SimConfig, threshold_db: float, kind: Callable = OnOff):
    """Policy with a threshold given in dB on the unit-mean fading gain.

    Relay i thresholds its ``g_sr`` at ``Gamma_sr_i * 10**(threshold_db/10)``.
    """
    v = 10.0 ** (threshold_db / 10.0)
    lb = cfg.link_budget
    if lb.gamma_sr1 == lb.gamma_sr2:
        return kind(v * lb.gamma_sr1)
    return kind(v * lb.gamma_sr1), kind(v * lb.gamma_sr2)


def _argmin_lowest(values) -> int:
    # np.argmin returns the first minimum: the lowest grid entry on ties.
    return int(np.argmin(np.asarray(values)))


def threshold_search(cfg: SimConfig, grid_db: Sequence[float], objective: str = "mc",
                     kind: Callable = OnOff, workers: int = 1) -> SearchReport:
    """Exhaustive 1-D search of a relay threshold.

    `objective` is ``"mc"`` (Monte-Carlo outage), ``"asymptotic"`` (high-SNR
    outage integral) or ``"ber"`` (Monte-Carlo uncoded BER).  All Monte-Carlo
    candidates run in one pass over the same draws.
    """
    grid = sorted(float(g) for g in grid_db)
    if not grid:
        raise ValueError("threshold grid is empty")
    policies = [threshold_policy(cfg, g, kind) for g in grid]
    half = None
    if objective == "mc":
        ests = estimate_outage_many(cfg, policies, workers=workers)
        values = [e.event_count for e in ests]
        objectives = [e.value for e in ests]
    elif objective == "ber":
        ests = estimate_ber_many(cfg, policies, workers=workers)
        values = [e.event_count for e in ests]
        objectives = [e.value for e in ests]
    elif objective == "asymptotic":
        ests = None
        objectives = [outage_asymptotic(AsymptoticContext.from_policies(
            cfg.link_budget, cfg.system.gamma_t, *_as_pair(p))) for p in policies]
        values = objectives
    else:
        raise ValueError(f"unknown objective {objective!r}")
    best = _argmin_lowest(values)
    if ests is not None:
        half = ests[best].half_width_95
    return SearchReport(best_params={"threshold_db": grid[best]},
                        best_objective=objectives[best], evaluations=len(grid),
                        converged=True, trace=list(enumerate(objectives)),
                        half_width=half, objectives=objectives)


def _as_pair(p):
    return p if isinstance(p, tuple) else (p, p)


def _evaluate_pairs(cfg, pairs, workers, chunk=64):
    ests = []
    for start in range(0, len(pairs), chunk):
        ests += estimate_outage_many(cfg, pairs[start:start + chunk], workers=workers)
    return ests


def _tie_key(est, pair):
    return (est.event_count, sum(pair[0].alpha_values) + sum(pair[1].alpha_values))


def centralized_search(cfg: SimConfig, q1: QuantizedAlphaFunction, q2: QuantizedAlphaFunction,
                       alpha_grid: Sequence[float], max_candidates: int = 4096,
                       workers: int = 1) -> SearchReport:
    """Joint exhaustive search of both relays' quantized alpha functions.

    Only the bin edges of `q1` and `q2` are used.  The candidate count is
    ``len(alpha_grid) ** (bins1 + bins2)``; searches above `max_candidates`
    are refused with :class:`SearchSpaceTooLarge`.
    """
    grid = sorted(set(float(a) for a in alpha_grid))
    n1, n2 = q1.n_bins, q2.n_bins
    size = len(grid) ** (n1 + n2)
    if size > max_candidates:
        raise SearchSpaceTooLarge(size, max_candidates)
    pairs = [(q1.with_values(c[:n1]), q2.with_values(c[n1:]))
             for c in itertools.product(grid, repeat=n1 + n2)]
    ests = _evaluate_pairs(cfg, pairs, workers)
    best = min(range(len(pairs)), key=lambda k: _tie_key(ests[k], pairs[k]))
    return SearchReport(best_params={"alpha1": pairs[best][0], "alpha2": pairs[best][1]},
                        best_objective=ests[best].value, evaluations=size, converged=True,
                        trace=[(0, ests[best].value)], half_width=ests[best].half_width_95,
                        objectives=[e.value for e in ests])


def _optimize_relay(cfg, fixed, current, relay, grid, workers):
    """Coordinate pass over the bins of one relay's function, the other fixed."""
    evals = 0
    est = None
    for j in range(current.n_bins):
        candidates = []
        for a in grid:
            values = list(current.alpha_values)
            values[j] = a
            candidates.append(current.with_values(values))
        pairs = [(fixed, c) if relay == 2 else (c, fixed) for c in candidates]
        ests = estimate_outage_many(cfg, pairs, workers=workers)
        evals += len(pairs)
        k = min(range(len(pairs)), key=lambda k: _tie_key(ests[k], pairs[k]))
        current, est = candidates[k], ests[k]
    return current, est, evals


def iterative_search(cfg: SimConfig, init_alpha1: QuantizedAlphaFunction,
                     alpha_grid: Sequence[float], max_iters: int = 10,
                     tol: float | None = None,
                     init_alpha2: QuantizedAlphaFunction | None = None,
                     workers: int = 1) -> SearchReport:
    """Alternating optimization of the two relays' alpha functions.

    Each iteration optimizes every bin of relay 2's function with relay 1's
    held fixed, then the reverse.  Stops when an iteration improves the
    outage by less than `tol` (default: the current 95% half-width).
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    grid = sorted(set(float(a) for a in alpha_grid))
    a1 = init_alpha1
    a2 = init_alpha2 or init_alpha1
    start = estimate_outage_many(cfg, [(a1, a2)], workers=workers)[0]
    current = start
    trace = [(0, start.value)]
    evals = 1
    converged = False
    for it in range(1, max_iters + 1):
        a2, _, n = _optimize_relay(cfg, a1, a2, 2, grid, workers)
        evals += n
        a1, est, n = _optimize_relay(cfg, a2, a1, 1, grid, workers)
        evals += n
        trace.append((it, est.value))
        step_tol = current.half_width_95 if tol is None else tol
        improvement = current.value - est.value
        current = est
        if improvement < step_tol or improvement <= 0:
            converged = True
            break
    return SearchReport(best_params={"alpha1": a1, "alpha2": a2},
                        best_objective=current.value, evaluations=evals,
                        converged=converged, trace=trace, half_width=current.half_width_95)
