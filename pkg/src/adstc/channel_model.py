"""Propagation and fading for the source/relay/destination links.

Path loss follows the IEEE 802.16j terrain-B (intermediate path-loss,
ART to BRT) model.  Fading is frequency-flat block Rayleigh: one complex
coefficient per link, constant over the two symbol slots of a frame.

All powers are carried as ratios to the noise density N0 (N0 = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SPEED_OF_LIGHT",
    "PathLossParams",
    "LinkGeometry",
    "LinkBudget",
    "ChannelRealization",
    "EstimationErrorModel",
    "EstimatedChannel",
    "db_to_linear",
    "linear_to_db",
    "path_loss_db",
    "build_link_budget",
    "sample_channel",
    "apply_estimation_error",
    "complex_gaussian",
]

SPEED_OF_LIGHT = 299_792_458.0  # m/s

LINKS = ("sr1", "sr2", "r1d", "r2d")


def db_to_linear(x_db):
    """Power ratio in dB to linear (factor 10, base 10)."""
    if np.ndim(x_db):
        return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)
    return 10.0 ** (float(x_db) / 10.0)


def linear_to_db(x):
    """Linear power ratio to dB (factor 10, base 10)."""
    if np.ndim(x):
        return 10.0 * np.log10(x)
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class PathLossParams:
    """Parameters of the terrain-B path-loss model for one link.

    Attributes
    ----------
    carrier_freq : float
        Carrier frequency in MHz.
    d0 : float
        Reference distance in meters.
    a, b, c : float
        Path-loss exponent coefficients, ``beta = a - b*h_b + c/h_b``.
    h_b : float
        Height of the transmitting (above roof top) antenna in meters.
    h_t : float
        Height of the receiving (below roof top) antenna in meters.
    """

    carrier_freq: float = 2400.0
    d0: float = 100.0
    a: float = 4.0
    b: float = 0.0065
    c: float = 17.1
    h_b: float = 32.0
    h_t: float = 15.0

    def __post_init__(self):
        for name in ("carrier_freq", "d0", "h_b", "h_t"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value!r}")
        if not self.beta > 0:
            raise ValueError(f"path-loss exponent must be positive, got {self.beta!r}")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / (self.carrier_freq * 1e6)

    @property
    def beta(self) -> float:
        return self.a - self.b * self.h_b + self.c / self.h_b

    @property
    def freq_correction_db(self) -> float:
        return 6.0 * math.log10(self.carrier_freq / 2000.0)

    @property
    def height_correction_db(self) -> float:
        # h_t == 3 m takes the first branch; both give 0 there.
        if self.h_t <= 3.0:
            return -10.0 * math.log10(self.h_t / 3.0)
        return -20.0 * math.log10(self.h_t / 3.0)

    @property
    def breakpoint(self) -> float:
        """Distance d0' where the free-space and log-distance branches meet."""
        corr = self.freq_correction_db + self.height_correction_db
        return self.d0 * 10.0 ** (-corr / (10.0 * self.beta))

    @property
    def intercept_db(self) -> float:
        """Free-space loss K at the breakpoint distance."""
        return 20.0 * math.log10(4.0 * math.pi * self.breakpoint / self.wavelength)


def path_loss_db(d: float, p: PathLossParams) -> float:
    """Path loss in dB at distance `d` (meters).

    Free space up to the breakpoint ``d0'``, log-distance with frequency
    and receive-height corrections beyond it.

    >>> p = PathLossParams()
    >>> round(path_loss_db(p.wavelength / (4 * math.pi), p), 12)
    0.0
    """
    if not d > 0:
        raise ValueError(f"distance must be positive, got {d!r}")
    if d <= p.breakpoint:
        return 20.0 * math.log10(4.0 * math.pi * d / p.wavelength)
    return (p.intercept_db + 10.0 * p.beta * math.log10(d / p.d0)
            + p.freq_correction_db + p.height_correction_db)


@dataclass(frozen=True)
class LinkGeometry:
    """Distances (m) and antenna heights (m) for the dual-hop topology.

    Defaults are the evaluation parameters of the reference scenario.
    """

    d_sr1: float = 5000.0
    d_sr2: float = 8000.0
    d_r1d: float = 2000.0
    d_r2d: float = 1000.0
    bs_height: float = 32.0
    rs_height: float = 15.0
    ms_height: float = 1.5

    def link_params(self, base: PathLossParams | None = None) -> dict[str, PathLossParams]:
        """Per-link path-loss parameters.

        S->RS uses the BS/RS heights, RS->D uses the RS/MS heights.
        """
        base = base or PathLossParams()
        first = PathLossParams(base.carrier_freq, base.d0, base.a, base.b, base.c,
                               h_b=self.bs_height, h_t=self.rs_height)
        second = PathLossParams(base.carrier_freq, base.d0, base.a, base.b, base.c,
                                h_b=self.rs_height, h_t=self.ms_height)
        return {"sr1": first, "sr2": first, "r1d": second, "r2d": second}

    def distances(self) -> dict[str, float]:
        return {"sr1": self.d_sr1, "sr2": self.d_sr2, "r1d": self.d_r1d, "r2d": self.d_r2d}


@dataclass(frozen=True)
class LinkBudget:
    """Path-loss gains and average SNRs of the four links (linear units).

    ``snr_sr_i = ps_over_n0 * gamma_sr_i`` and
    ``snr_rid = pr_i_over_n0 * gamma_rid`` hold by construction; use
    :func:`build_link_budget` or :meth:`from_snrs` rather than filling the
    SNR fields by hand.
    """

    gamma_sr1: float
    gamma_sr2: float
    gamma_r1d: float
    gamma_r2d: float
    ps_over_n0: float
    pr1_over_n0: float
    pr2_over_n0: float
    snr_sr1: float = field(init=False)
    snr_sr2: float = field(init=False)
    snr_r1d: float = field(init=False)
    snr_r2d: float = field(init=False)

    def __post_init__(self):
        for name in ("gamma_sr1", "gamma_sr2", "gamma_r1d", "gamma_r2d",
                     "ps_over_n0", "pr1_over_n0", "pr2_over_n0"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value!r}")
        object.__setattr__(self, "snr_sr1", self.ps_over_n0 * self.gamma_sr1)
        object.__setattr__(self, "snr_sr2", self.ps_over_n0 * self.gamma_sr2)
        object.__setattr__(self, "snr_r1d", self.pr1_over_n0 * self.gamma_r1d)
        object.__setattr__(self, "snr_r2d", self.pr2_over_n0 * self.gamma_r2d)

    @classmethod
    def from_snrs(cls, snr_sr: float, snr_rd1: float, snr_rd2: float | None = None,
                  gamma_sr: float = 1.0, gamma_rd: float = 1.0) -> "LinkBudget":
        """Normalized budget hitting target SNRs directly.

        Both source-relay links share ``gamma_sr`` so that one source power
        gives both relays the same ``snr_sr``.  Every simulated metric
        depends on the link budget only through the four SNRs.
        """
        if snr_rd2 is None:
            snr_rd2 = snr_rd1
        return cls(gamma_sr1=gamma_sr, gamma_sr2=gamma_sr,
                   gamma_r1d=gamma_rd, gamma_r2d=gamma_rd,
                   ps_over_n0=snr_sr / gamma_sr,
                   pr1_over_n0=snr_rd1 / gamma_rd,
                   pr2_over_n0=snr_rd2 / gamma_rd)

    @property
    def gamma_sr(self) -> tuple[float, float]:
        return self.gamma_sr1, self.gamma_sr2

    @property
    def gamma_rd(self) -> tuple[float, float]:
        return self.gamma_r1d, self.gamma_r2d

    @property
    def pr_over_n0(self) -> tuple[float, float]:
        return self.pr1_over_n0, self.pr2_over_n0


def build_link_budget(geometry: LinkGeometry, ps_over_n0: float, pr1_over_n0: float,
                      pr2_over_n0: float, params: dict[str, PathLossParams] | None = None,
                      ) -> LinkBudget:
    """Link budget from distances, transmit powers and path-loss parameters.

    `params` maps link name (``sr1``, ``sr2``, ``r1d``, ``r2d``) to its
    :class:`PathLossParams`; by default the heights come from `geometry`.
    """
    params = params or geometry.link_params()
    distances = geometry.distances()
    gains = {}
    for link in LINKS:
        gains[link] = 10.0 ** (-path_loss_db(distances[link], params[link]) / 10.0)
    return LinkBudget(gamma_sr1=gains["sr1"], gamma_sr2=gains["sr2"],
                      gamma_r1d=gains["r1d"], gamma_r2d=gains["r2d"],
                      ps_over_n0=ps_over_n0, pr1_over_n0=pr1_over_n0,
                      pr2_over_n0=pr2_over_n0)


def complex_gaussian(rng: np.random.Generator, size=None, variance: float = 1.0):
    """Circularly symmetric CN(0, variance) samples."""
    scale = math.sqrt(variance / 2.0)
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return scale * (re + 1j * im)


@dataclass(frozen=True)
class ChannelRealization:
    """Fading coefficients of the four links for one block (or a batch).

    Fields are complex scalars or equally shaped complex arrays.
    """

    h_sr1: complex | np.ndarray
    h_sr2: complex | np.ndarray
    h_r1d: complex | np.ndarray
    h_r2d: complex | np.ndarray

    @property
    def h_sr(self):
        return self.h_sr1, self.h_sr2

    @property
    def h_rd(self):
        return self.h_r1d, self.h_r2d


def sample_channel(rng: np.random.Generator, size=None) -> ChannelRealization:
    """Draw independent unit-power Rayleigh coefficients for all four links.

    The draw order (sr1, sr2, r1d, r2d) is part of the reproducibility
    contract; do not reorder.
    """
    return ChannelRealization(*(complex_gaussian(rng, size) for _ in LINKS))


@dataclass(frozen=True)
class EstimationErrorModel:
    """Variances of the additive complex Gaussian estimation errors."""

    var_sr1: float = 0.0
    var_sr2: float = 0.0
    var_r1d: float = 0.0
    var_r2d: float = 0.0

    def __post_init__(self):
        for link in LINKS:
            value = getattr(self, "var_" + link)
            if value < 0:
                raise ValueError(f"var_{link} must be >= 0, got {value!r}")

    @classmethod
    def from_link_budget(cls, lb: LinkBudget) -> "EstimationErrorModel":
        """Pilot-based estimates: error variance is the inverse link SNR."""
        return cls(var_sr1=1.0 / lb.snr_sr1, var_sr2=1.0 / lb.snr_sr2,
                   var_r1d=1.0 / lb.snr_r1d, var_r2d=1.0 / lb.snr_r2d)

    @property
    def is_perfect(self) -> bool:
        return all(getattr(self, "var_" + link) == 0 for link in LINKS)


@dataclass(frozen=True)
class EstimatedChannel:
    true_channel: ChannelRealization
    estimated: ChannelRealization


def apply_estimation_error(ch: ChannelRealization, m: EstimationErrorModel,
                           rng: np.random.Generator) -> EstimatedChannel:
    """Add independent estimation errors to every link.

    Unit-variance errors are always drawn (then scaled) so the random
    stream consumed does not depend on the variances.
    """
    shape = np.shape(ch.h_sr1)
    size = shape if shape else None
    est = []
    for link in LINKS:
        e = complex_gaussian(rng, size) * math.sqrt(getattr(m, "var_" + link))
        est.append(getattr(ch, "h_" + link) + e)
    return EstimatedChannel(true_channel=ch, estimated=ChannelRealization(*est))
