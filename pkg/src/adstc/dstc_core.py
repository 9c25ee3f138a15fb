"""Two-hop distributed Alamouti chain with amplify-and-forward relays.

Phase 1: the source broadcasts x[1], x[2]; relay i observes
``u_i[k] = sqrt(Ps) L_sri x[k] + n_ri[k]`` and normalizes it to unit
average power.  Phase 2: the relays send the Alamouti columns of their
phase-compensated, scaled observations (RS1 carries x[1], RS2 carries
x[2]).  The destination sees

    r_d[1] = L'_1 x[1] + L'_2 x[2] + z_d[1]
    r_d[2] = L'_2 x[1]* - L'_1 x[2]* + z_d[2]

and decodes with the matched filter of the 2x2 Alamouti matrix.

Every function accepts scalars or equally shaped arrays, so a whole batch
of independent frames goes through in one call.  N0 = 1 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel_model import ChannelRealization, LinkBudget, complex_gaussian
from .constellation import BPSK, Constellation
from .relay_policy import df_detect

__all__ = [
    "SystemParams",
    "EffectiveChannel",
    "SymbolFrame",
    "ReceivedFrame",
    "phase_factor",
    "effective_channel",
    "end_to_end_snr",
    "alamouti_matrix",
    "physical_matrix",
    "relay_encode",
    "simulate_frame",
    "destination_decode",
]


@dataclass(frozen=True)
class SystemParams:
    """Transmit powers (ratios to N0) and the outage SNR threshold (linear)."""

    ps_over_n0: float
    pr1_over_n0: float
    pr2_over_n0: float
    gamma_t: float = 1.0

    def __post_init__(self):
        for name in ("ps_over_n0", "pr1_over_n0", "pr2_over_n0", "gamma_t"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value!r}")

    @classmethod
    def from_link_budget(cls, lb: LinkBudget, gamma_t: float = 1.0) -> "SystemParams":
        return cls(lb.ps_over_n0, lb.pr1_over_n0, lb.pr2_over_n0, gamma_t)

    @property
    def pr_over_n0(self) -> tuple[float, float]:
        return self.pr1_over_n0, self.pr2_over_n0


@dataclass(frozen=True)
class EffectiveChannel:
    """Composite coefficients L'_1, L'_2, Alamouti gain and noise power."""

    l1: complex | np.ndarray
    l2: complex | np.ndarray
    lam: float | np.ndarray
    sigma_sq: float | np.ndarray


@dataclass(frozen=True)
class SymbolFrame:
    x1: complex | np.ndarray
    x2: complex | np.ndarray
    constellation: Constellation = BPSK


@dataclass(frozen=True)
class ReceivedFrame:
    rd1: complex | np.ndarray
    rd2: complex | np.ndarray


def phase_factor(h):
    """``exp(-j*angle(h)) = conj(h)/|h|``, defined as 1 where h == 0."""
    h = np.asarray(h, dtype=complex)
    mag = np.abs(h)
    safe = np.where(mag > 0, mag, 1.0)
    return np.where(mag > 0, np.conj(h) / safe, 1.0 + 0j)


def _check_alpha(alpha):
    a = np.asarray(alpha, dtype=float)
    if np.any((a < 0) | (a > 1)) or np.any(np.isnan(a)):
        raise ValueError("scaling factors must lie in [0, 1]")
    return a


def effective_channel(ch: ChannelRealization, lb: LinkBudget, sp: SystemParams,
                      alpha1, alpha2, relay_gain=None, df=None) -> EffectiveChannel:
    """Composite coefficients seen by the destination.

    Parameters
    ----------
    ch : ChannelRealization
        Fading coefficients.  Pass an estimate to get the destination's view.
    lb, sp : LinkBudget, SystemParams
        Path gains come from `lb`, transmit powers from `sp`.
    alpha1, alpha2 : float or array
        Relay scaling factors in [0, 1].
    relay_gain : pair of arrays, optional
        Source-relay gains the relays normalize with (their own estimates
        of ``g_sr``).  Defaults to the gains implied by `ch`.
    df : pair of bool arrays, optional
        Branches where the relay detect-and-forwards: it sends the detected
        symbol at full power, so ``L'_i = sqrt(Pr_i) L_rid`` and no relay
        noise reaches the destination.
    """
    a = (_check_alpha(alpha1), _check_alpha(alpha2))
    ps = sp.ps_over_n0
    ls, noise = [], 1.0
    for i in range(2):
        h_sr, h_rd = ch.h_sr[i], ch.h_rd[i]
        g_sr = lb.gamma_sr[i] * np.abs(h_sr) ** 2
        g_hat = g_sr if relay_gain is None else np.asarray(relay_gain[i], dtype=float)
        pr = sp.pr_over_n0[i]
        l_rd = np.sqrt(lb.gamma_rd[i]) * np.asarray(h_rd, dtype=complex)
        denom = ps * g_hat + 1.0
        l_af = l_rd * np.sqrt(a[i] * ps * pr * g_sr / denom)
        # |L'|^2 / (Ps g_sr) written without the division so g_sr = 0 is finite.
        noise_af = a[i] * pr * np.abs(l_rd) ** 2 / denom
        if df is not None:
            mask = np.asarray(df[i], dtype=bool)
            l_af = np.where(mask, np.sqrt(pr) * l_rd, l_af)
            noise_af = np.where(mask, 0.0, noise_af)
        ls.append(l_af)
        noise = noise + noise_af
    lam = np.abs(ls[0]) ** 2 + np.abs(ls[1]) ** 2
    if np.ndim(lam) == 0:
        return EffectiveChannel(complex(ls[0]), complex(ls[1]), float(lam), float(noise))
    return EffectiveChannel(ls[0], ls[1], lam, noise)


def end_to_end_snr(ec: EffectiveChannel):
    """Instantaneous end-to-end SNR ``Lambda / sigma^2`` (0 when both relays are silent)."""
    lam = np.asarray(ec.lam, dtype=float)
    gamma = np.where(lam > 0, lam / np.asarray(ec.sigma_sq, dtype=float), 0.0)
    return float(gamma) if gamma.ndim == 0 else gamma


def alamouti_matrix(l1, l2) -> np.ndarray:
    """The destination's model ``[[L1, L2], [L2*, -L1*]]``, shape (..., 2, 2)."""
    l1 = np.asarray(l1, dtype=complex)
    l2 = np.asarray(l2, dtype=complex)
    top = np.stack([l1, l2], axis=-1)
    bottom = np.stack([np.conj(l2), -np.conj(l1)], axis=-1)
    return np.stack([top, bottom], axis=-2)


def physical_matrix(ch: ChannelRealization, lb: LinkBudget, sp: SystemParams,
                    alpha1, alpha2, relay_channel: ChannelRealization | None = None,
                    compensate: bool = True) -> np.ndarray:
    """Actual noiseless map from ``x`` to ``[r_d[1], r_d[2]*]``, shape (..., 2, 2).

    Built from the relay operations themselves rather than from the
    composite coefficients, so it exposes what phase compensation buys:
    without it (or with imperfect ``relay_channel``) the matrix is no longer
    orthogonal.
    """
    rel = relay_channel or ch
    ps = sp.ps_over_n0
    amp, q = [], []
    for i, alpha in enumerate((_check_alpha(alpha1), _check_alpha(alpha2))):
        g_hat = lb.gamma_sr[i] * np.abs(rel.h_sr[i]) ** 2
        rot = phase_factor(rel.h_sr[i]) if compensate else 1.0
        q.append(rot * np.sqrt(ps * lb.gamma_sr[i]) * np.asarray(ch.h_sr[i], dtype=complex)
                 / np.sqrt(ps * g_hat + 1.0))
        amp.append(np.sqrt(alpha * sp.pr_over_n0[i] * lb.gamma_rd[i])
                   * np.asarray(ch.h_rd[i], dtype=complex))
    top = np.stack([amp[0] * q[0], amp[1] * q[1]], axis=-1)
    bottom = np.stack([np.conj(amp[1]) * q[1], -np.conj(amp[0]) * q[0]], axis=-1)
    return np.stack([top, bottom], axis=-2)


def relay_encode(y1, y2, phase1, phase2, alpha1, alpha2):
    """Distributed Alamouti transmission of the normalized relay observations.

    `y1` and `y2` have a trailing slot axis of length 2.  Returns
    ``(slot1, slot2)``, each a pair ``(RS1 symbol, RS2 symbol)``.
    """
    y1 = np.asarray(y1, dtype=complex)
    y2 = np.asarray(y2, dtype=complex)
    s1, s2 = np.sqrt(alpha1), np.sqrt(alpha2)
    c1 = np.asarray(phase1)[..., None] * y1
    c2 = np.asarray(phase2)[..., None] * y2
    slot1 = (s1 * c1[..., 0], s2 * c2[..., 1])
    slot2 = (-s1 * np.conj(c1[..., 1]), s2 * np.conj(c2[..., 0]))
    return slot1, slot2


def simulate_frame(x: SymbolFrame, ch: ChannelRealization, lb: LinkBudget, sp: SystemParams,
                   alpha1, alpha2, rng: np.random.Generator | None,
                   estimate: ChannelRealization | None = None, df=None,
                   compensate: bool = True, noise: dict | None = None) -> ReceivedFrame:
    """Run one frame (or a batch) through both hops.

    Relays see only their own source link (the estimate, when given) for
    phase compensation, normalization and detection; the physical
    propagation always uses `ch`.  ``rng=None`` runs the chain noiselessly.
    Pre-drawn noise can be passed as ``noise={"relay": (...,2,2), "dest": (...,2)}``
    (relay axis first, then slot) so a caller controls the random stream.

    `df` marks branches where the relay detects x[k] and forwards the
    detected symbol at full power instead of amplifying.
    """
    x1 = np.asarray(x.x1, dtype=complex)
    x2 = np.asarray(x.x2, dtype=complex)
    xs = np.stack([x1, x2], axis=-1)
    shape = np.broadcast_shapes(xs.shape[:-1], np.shape(ch.h_sr1))
    if noise is not None:
        n_relay, n_dest = noise["relay"], noise["dest"]
    elif rng is None:
        n_relay = np.zeros(shape + (2, 2), dtype=complex)
        n_dest = np.zeros(shape + (2,), dtype=complex)
    else:
        n_relay = complex_gaussian(rng, shape + (2, 2))
        n_dest = complex_gaussian(rng, shape + (2,))
    rel = estimate or ch
    ps = sp.ps_over_n0
    alphas = [_check_alpha(alpha1), _check_alpha(alpha2)]
    ys, phases = [], []
    for i in range(2):
        l_sr = np.sqrt(lb.gamma_sr[i]) * np.asarray(ch.h_sr[i], dtype=complex)
        u = np.sqrt(ps) * l_sr[..., None] * xs + n_relay[..., i, :]
        g_hat = lb.gamma_sr[i] * np.abs(rel.h_sr[i]) ** 2
        y = u / np.sqrt(ps * g_hat + 1.0)[..., None]
        rot = phase_factor(rel.h_sr[i]) if compensate else np.ones_like(g_hat, dtype=complex)
        if df is not None:
            mask = np.asarray(df[i], dtype=bool)
            if np.any(mask):
                xhat, _ = df_detect(u, rel.h_sr[i], x.constellation)
                y = np.where(mask[..., None], xhat, y)
                rot = np.where(mask, 1.0 + 0j, rot)
                alphas[i] = np.where(mask, 1.0, alphas[i])
        ys.append(y)
        phases.append(rot)
    slot1, slot2 = relay_encode(ys[0], ys[1], phases[0], phases[1], alphas[0], alphas[1])
    gains = [np.sqrt(sp.pr_over_n0[i] * lb.gamma_rd[i]) * np.asarray(ch.h_rd[i], dtype=complex)
             for i in range(2)]
    rd1 = gains[0] * slot1[0] + gains[1] * slot1[1] + n_dest[..., 0]
    rd2 = gains[0] * slot2[0] + gains[1] * slot2[1] + n_dest[..., 1]
    return ReceivedFrame(rd1, rd2)


def destination_decode(rf: ReceivedFrame, ec: EffectiveChannel,
                       constellation: Constellation = BPSK):
    """Alamouti matched filter followed by per-symbol ML decisions.

    Returns ``(frame, degenerate)`` where `degenerate` flags frames with
    ``Lambda == 0``; those decode to the first constellation point.
    """
    l1 = np.asarray(ec.l1, dtype=complex)
    l2 = np.asarray(ec.l2, dtype=complex)
    r1 = np.asarray(rf.rd1, dtype=complex)
    r2c = np.conj(np.asarray(rf.rd2, dtype=complex))
    t1 = np.conj(l1) * r1 + l2 * r2c
    t2 = np.conj(l2) * r1 - l1 * r2c
    # Lambda > 0 scales both statistics identically: nearest point is unchanged.
    degenerate = np.asarray(ec.lam) <= 0
    first = constellation.points[0]
    d1 = np.where(degenerate, first, constellation.detect(t1))
    d2 = np.where(degenerate, first, constellation.detect(t2))
    if d1.ndim == 0:
        return SymbolFrame(complex(d1), complex(d2), constellation), bool(degenerate)
    return SymbolFrame(d1, d2, constellation), degenerate
