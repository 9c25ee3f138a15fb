"""Monte-Carlo estimation of outage probability and uncoded BER.

Trials run in fixed batches of ``BATCH_SIZE``.  Batch ``b`` draws from its
own Philox stream keyed by ``(master_seed, b)``, and each batch returns
integer counters, so an estimate is a pure function of the configuration
regardless of how many worker processes share the batches.

Within one batch every random quantity is drawn in a fixed order and
before any policy is applied, so all policies evaluated together (see the
``*_many`` functions) see exactly the same channels, symbols and noise.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, Sequence, Union

import numpy as np

from .channel_model import (ChannelRealization, EstimationErrorModel, LinkBudget,
                            apply_estimation_error, complex_gaussian, sample_channel)
from .constellation import Constellation, get_constellation
from .dstc_core import (SymbolFrame, SystemParams, destination_decode, effective_channel,
                        end_to_end_snr, simulate_frame)
from .relay_policy import PolicySpec, RelayMode

__all__ = [
    "BATCH_SIZE",
    "SimConfig",
    "MetricEstimate",
    "SweepRow",
    "SweepResult",
    "batch_rng",
    "derive_seed",
    "estimate_outage",
    "estimate_outage_many",
    "estimate_ber",
    "estimate_ber_many",
    "sweep",
    "SWEEP_VARIABLES",
]

BATCH_SIZE = 1 << 16
LOW_CONFIDENCE_EVENTS = 30

PolicyPair = Union[PolicySpec, tuple]


@dataclass(frozen=True)
class SimConfig:
    link_budget: LinkBudget
    system: SystemParams
    policy: PolicyPair
    trials: int = 100_000
    master_seed: int = 0
    estimation_error: EstimationErrorModel | None = None
    constellation: str | Constellation = "bpsk"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")


def relay_policies(policy: PolicyPair) -> tuple:
    """A single policy applies to both relays; a pair assigns one per relay."""
    if isinstance(policy, tuple):
        if len(policy) != 2:
            raise ValueError("a policy pair needs exactly two entries")
        return policy
    return policy, policy


@dataclass(frozen=True)
class MetricEstimate:
    """Bernoulli frequency with a normal-approximation 95% half-width."""

    value: float
    half_width_95: float
    trials: int
    event_count: int
    active_fraction: float | None = None
    surrogate: bool = False

    @classmethod
    def from_counts(cls, events: int, trials: int, **extra) -> "MetricEstimate":
        p = events / trials
        return cls(p, 1.96 * math.sqrt(p * (1.0 - p) / trials), trials, events, **extra)

    @property
    def low_confidence(self) -> bool:
        return self.event_count < LOW_CONFIDENCE_EVENTS


def derive_seed(master_seed: int, *key: int) -> int:
    """Child 64-bit seed for a sub-experiment (sweep point, search stage, ...)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def batch_rng(master_seed: int, batch_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence(master_seed, spawn_key=(batch_index,))))


def _batches(trials: int):
    n_full, rest = divmod(trials, BATCH_SIZE)
    sizes = [BATCH_SIZE] * n_full + ([rest] if rest else [])
    return list(enumerate(sizes))


def _run_batches(kernel, trials: int, workers: int):
    batches = _batches(trials)
    if workers > 1 and len(batches) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(kernel, batches))
    else:
        parts = [kernel(b) for b in batches]
    return np.sum(parts, axis=0)


def _draw(cfg: SimConfig, batch_index: int, n: int, fixed_channel=None):
    """All randomness of one batch, in the fixed draw order."""
    rng = batch_rng(cfg.master_seed, batch_index)
    ch = sample_channel(rng, n)
    est = apply_estimation_error(ch, cfg.estimation_error or EstimationErrorModel(), rng)
    bits = rng.integers(0, 2, size=(n, 2, 2), dtype=np.uint8)
    relay_noise = complex_gaussian(rng, (n, 2, 2))
    dest_noise = complex_gaussian(rng, (n, 2))
    if fixed_channel is not None:
        ch = ChannelRealization(*(np.full(n, h, dtype=complex) for h in
                                  (fixed_channel.h_sr1, fixed_channel.h_sr2,
                                   fixed_channel.h_r1d, fixed_channel.h_r2d)))
        est = apply_estimation_error(ch, EstimationErrorModel(), rng)
    estimated = est.estimated if cfg.estimation_error is not None else None
    return ch, estimated, bits, relay_noise, dest_noise


def _relay_decisions(cfg: SimConfig, pair, relay_view: ChannelRealization):
    lb = cfg.link_budget
    g_hat, alphas, modes = [], [], []
    for i, p in enumerate(relay_policies(pair)):
        g = lb.gamma_sr[i] * np.abs(relay_view.h_sr[i]) ** 2
        g_hat.append(g)
        modes.append(np.asarray(p.mode(g)))
        alphas.append(np.asarray(p.alpha(g), dtype=float))
    return g_hat, alphas, modes


def _outage_kernel(cfg: SimConfig, policies, batch):
    batch_index, n = batch
    ch, est, *_ = _draw(cfg, batch_index, n)
    view = est if est is not None else ch
    out = np.zeros((len(policies), 3), dtype=np.int64)
    for k, pair in enumerate(policies):
        g_hat, alphas, modes = _relay_decisions(cfg, pair, view)
        df = (modes[0] == RelayMode.DF, modes[1] == RelayMode.DF)
        ec = effective_channel(ch, cfg.link_budget, cfg.system, alphas[0], alphas[1],
                               relay_gain=g_hat if est is not None else None, df=df)
        gamma = end_to_end_snr(ec)
        out[k, 0] = np.count_nonzero(gamma < cfg.system.gamma_t)
        out[k, 1] = sum(np.count_nonzero(m != RelayMode.SILENT) for m in modes)
        out[k, 2] = np.count_nonzero(df[0] | df[1])
    return out


def estimate_outage_many(cfg: SimConfig, policies: Sequence[PolicyPair],
                         workers: int = 1) -> list[MetricEstimate]:
    """Outage estimates for several policies on shared randomness.

    The relays decide (and normalize) with their own view of ``h_sr``:
    the estimate when ``cfg.estimation_error`` is set.  The SNR itself is
    computed from the true channel.  Trials where a relay detect-and-forwards
    use the noise-free DF branch as an outage surrogate (flagged via
    ``surrogate``).
    """
    policies = list(policies)
    counts = _run_batches(partial(_outage_kernel, cfg, policies), cfg.trials, workers)
    return [MetricEstimate.from_counts(int(c[0]), cfg.trials,
                                       active_fraction=c[1] / (2 * cfg.trials),
                                       surrogate=bool(c[2]))
            for c in counts]


def estimate_outage(cfg: SimConfig, workers: int = 1) -> MetricEstimate:
    """Monte-Carlo outage probability ``P{gamma < gamma_t}`` under ``cfg.policy``."""
    return estimate_outage_many(cfg, [cfg.policy], workers)[0]


def _ber_kernel(cfg: SimConfig, policies, noiseless: bool, fixed_channel, batch):
    batch_index, n = batch
    ch, est, bits, relay_noise, dest_noise = _draw(cfg, batch_index, n, fixed_channel)
    const = get_constellation(cfg.constellation)
    bits = bits[..., :const.bits_per_symbol]
    x = const.modulate(bits)
    frame = SymbolFrame(x[:, 0], x[:, 1], const)
    if noiseless:
        relay_noise = np.zeros_like(relay_noise)
        dest_noise = np.zeros_like(dest_noise)
    noise = {"relay": relay_noise, "dest": dest_noise}
    view = est if est is not None else ch
    out = np.zeros((len(policies), 3), dtype=np.int64)
    for k, pair in enumerate(policies):
        g_hat, alphas, modes = _relay_decisions(cfg, pair, view)
        df = (modes[0] == RelayMode.DF, modes[1] == RelayMode.DF)
        rf = simulate_frame(frame, ch, cfg.link_budget, cfg.system, alphas[0], alphas[1],
                            rng=None, estimate=est, df=df, noise=noise)
        # The destination only knows the (estimated) composite coefficients.
        ec_hat = effective_channel(view, cfg.link_budget, cfg.system, alphas[0], alphas[1],
                                   df=df)
        decoded, _ = destination_decode(rf, ec_hat, const)
        bits_hat = np.stack([const.demodulate(decoded.x1), const.demodulate(decoded.x2)], axis=1)
        out[k, 0] = np.count_nonzero(bits_hat != bits)
        out[k, 1] = sum(np.count_nonzero(m != RelayMode.SILENT) for m in modes)
        out[k, 2] = np.count_nonzero(df[0] | df[1])
    return out


def estimate_ber_many(cfg: SimConfig, policies: Sequence[PolicyPair], workers: int = 1,
                      noiseless: bool = False,
                      fixed_channel: ChannelRealization | None = None) -> list[MetricEstimate]:
    """Uncoded bit error rates for several policies on shared randomness.

    ``trials`` counts frames (two symbols each); the estimate's ``trials``
    counts transmitted bits.  `noiseless` and `fixed_channel` are diagnostic
    hooks: the first zeroes every noise sample, the second pins all frames
    to one channel realization.
    """
    policies = list(policies)
    kernel = partial(_ber_kernel, cfg, policies, noiseless, fixed_channel)
    counts = _run_batches(kernel, cfg.trials, workers)
    n_bits = cfg.trials * 2 * get_constellation(cfg.constellation).bits_per_symbol
    return [MetricEstimate.from_counts(int(c[0]), n_bits,
                                       active_fraction=c[1] / (2 * cfg.trials),
                                       surrogate=False)
            for c in counts]


def estimate_ber(cfg: SimConfig, workers: int = 1, noiseless: bool = False,
                 fixed_channel: ChannelRealization | None = None) -> MetricEstimate:
    """Uncoded BER of the full chain under ``cfg.policy``."""
    return estimate_ber_many(cfg, [cfg.policy], workers, noiseless, fixed_channel)[0]


# -- sweeps ------------------------------------------------------------------

def _with_snr_rd(cfg: SimConfig, snr_rd_db: float) -> SimConfig:
    lb = cfg.link_budget
    snr = 10.0 ** (snr_rd_db / 10.0)
    lb = replace(lb, pr1_over_n0=snr / lb.gamma_r1d, pr2_over_n0=snr / lb.gamma_r2d)
    sp = replace(cfg.system, pr1_over_n0=lb.pr1_over_n0, pr2_over_n0=lb.pr2_over_n0)
    return replace(cfg, link_budget=lb, system=sp)


def _with_snr_sr(cfg: SimConfig, snr_sr_db: float) -> SimConfig:
    lb = cfg.link_budget
    ps = 10.0 ** (snr_sr_db / 10.0) / lb.gamma_sr1
    lb = replace(lb, ps_over_n0=ps)
    return replace(cfg, link_budget=lb, system=replace(cfg.system, ps_over_n0=ps))


def _with_gamma_t(cfg: SimConfig, gamma_t_db: float) -> SimConfig:
    return replace(cfg, system=replace(cfg.system, gamma_t=10.0 ** (gamma_t_db / 10.0)))


SWEEP_VARIABLES: dict[str, Callable[[SimConfig, float], SimConfig]] = {
    "gamma_t_db": _with_gamma_t,
    "snr_rd_db": _with_snr_rd,
    "snr_sr_db": _with_snr_sr,
}


@dataclass(frozen=True)
class SweepRow:
    value: float
    policy: str
    estimate: MetricEstimate


@dataclass
class SweepResult:
    variable: str
    metric: str
    rows: list[SweepRow] = field(default_factory=list)

    HEADER = ("estimate", "half_width_95", "trials", "events", "low_confidence")

    def header(self) -> list[str]:
        return [self.variable, "policy", *self.HEADER]

    def records(self) -> list[list]:
        out = []
        for r in self.rows:
            e = r.estimate
            out.append([f"{r.value:g}", r.policy, f"{e.value:.6e}", f"{e.half_width_95:.6e}",
                        e.trials, e.event_count, int(e.low_confidence)])
        return out


def sweep(base_cfg: SimConfig, variable: str, grid: Sequence[float],
          policies: dict[str, PolicyPair | Callable[[SimConfig], PolicyPair]] | None = None,
          metric: str = "outage", workers: int = 1,
          prepare: Callable[[SimConfig], SimConfig] | None = None) -> SweepResult:
    """Run an estimator over a grid of one configuration variable.

    Grid point ``k`` runs with seed ``derive_seed(master_seed, k)``; all
    policies at that point share it.  A policy may be a callable of the
    point's configuration, for rules tied to it (e.g. a threshold at xi).
    `prepare` adjusts each point's configuration after the variable is set,
    e.g. to recompute SNR-dependent estimation error variances.
    """
    if variable not in SWEEP_VARIABLES:
        raise KeyError(f"unknown sweep variable {variable!r}; "
                       f"expected one of {sorted(SWEEP_VARIABLES)}")
    grid = list(grid)
    if not grid:
        raise ValueError("sweep grid is empty")
    if metric not in ("outage", "ber"):
        raise ValueError(f"unknown metric {metric!r}")
    policies = policies or {"policy": base_cfg.policy}
    estimator = estimate_outage_many if metric == "outage" else estimate_ber_many
    result = SweepResult(variable, metric)
    for k, value in enumerate(grid):
        cfg = SWEEP_VARIABLES[variable](base_cfg, value)
        cfg = replace(cfg, master_seed=derive_seed(base_cfg.master_seed, k))
        if prepare is not None:
            cfg = prepare(cfg)
        resolved = [p(cfg) if callable(p) else p for p in policies.values()]
        for name, est in zip(policies, estimator(cfg, resolved, workers=workers)):
            result.rows.append(SweepRow(value, name, est))
    return result
